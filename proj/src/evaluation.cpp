// src/evaluation.cpp

// Copyright 2026  RASO Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "raso/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "raso/generator.hpp"

namespace raso {

// ---------------------------------------------------------------------------
// EER
// ---------------------------------------------------------------------------

real ComputeEer(const std::vector<Trial> &trials) {
  int64_t n_pos = 0, n_neg = 0;
  for (const Trial &t : trials) {
    RASO_CHECK(std::isfinite(t.score), "trial scores must be finite");
    RASO_CHECK(t.label == 0 || t.label == 1, "trial label must be 0 or 1");
    (t.label ? n_pos : n_neg)++;
  }
  RASO_CHECK(n_pos > 0 && n_neg > 0,
             "EER needs at least one trial of each label");

  std::vector<real> thresholds;
  thresholds.reserve(trials.size());
  for (const Trial &t : trials) thresholds.push_back(t.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const auto rates_at = [&](real th) {
    int64_t fa = 0, fr = 0;
    for (const Trial &t : trials) {
      if (t.label == 0 && t.score > th) fa++;
      if (t.label == 1 && t.score <= th) fr++;
    }
    return std::pair<real, real>(static_cast<real>(fa) / static_cast<real>(n_neg),
                                 static_cast<real>(fr) / static_cast<real>(n_pos));
  };

  // Raising the threshold walks FAR monotonically from 1 to 0 and FRR from 0
  // to 1, so the first operating point with FRR >= FAR brackets the crossing
  // together with its predecessor; the endpoint below all scores (everything
  // accepted) seeds the walk.
  real prev_far = 1.0, prev_frr = 0.0;
  for (real th : thresholds) {
    const auto [far, frr] = rates_at(th);
    if (frr >= far) {
      const real d0 = prev_far - prev_frr;  // > 0: strictly above the diagonal
      const real d1 = far - frr;            // <= 0
      const real t = d0 / (d0 - d1);
      return 100.0 * (prev_far + t * (far - prev_far));
    }
    prev_far = far;
    prev_frr = frr;
  }
  // Unreachable: the top threshold rejects everything (FAR 0, FRR 1).
  throw Error("EER sweep found no crossing");
}

// ---------------------------------------------------------------------------
// WER
// ---------------------------------------------------------------------------

int64_t TokenEditDistance(const std::vector<std::string> &ref,
                          const std::vector<std::string> &hyp) {
  const size_t nr = ref.size(), nh = hyp.size();
  std::vector<int64_t> prev(nh + 1), cur(nh + 1);
  for (size_t j = 0; j <= nh; j++) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= nr; i++) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= nh; j++) {
      const int64_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[nh];
}

real ComputeWer(const std::vector<std::string> &ref_tokens,
                const std::vector<std::string> &hyp_tokens) {
  RASO_CHECK(!ref_tokens.empty(), "WER reference must be nonempty");
  return 100.0 * static_cast<real>(TokenEditDistance(ref_tokens, hyp_tokens)) /
         static_cast<real>(ref_tokens.size());
}

std::vector<std::string> SplitTokens(const std::string &transcript) {
  std::istringstream in(transcript);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

// ---------------------------------------------------------------------------
// attack protocols
// ---------------------------------------------------------------------------

namespace {

std::vector<Trial> ScoreClips(const SexClassifier &classifier,
                              const std::vector<EvalClip> &clips) {
  std::vector<Trial> trials;
  trials.reserve(clips.size());
  for (const EvalClip &e : clips) {
    RASO_CHECK(e.mel != nullptr, "eval clip has no spectrogram");
    RASO_CHECK(e.sex == 0 || e.sex == 1, "sex label must be 0 or 1");
    // p_male scores male-as-positive trials.
    trials.push_back({classifier.Classify(*e.mel), e.sex == 0 ? 1 : 0});
  }
  return trials;
}

}  // namespace

AttackReport IgnorantAttack(const SexClassifier &classifier,
                            const std::vector<EvalClip> &eval_clips) {
  AttackReport report;
  report.attack_mode = "ignorant";
  report.eer_percent = ComputeEer(ScoreClips(classifier, eval_clips));
  report.n_trials = static_cast<int64_t>(eval_clips.size());
  report.classifier_description = classifier.description();
  return report;
}

AttackReport SemiInformedAttack(const ProxyConvClassifier &base,
                                const std::vector<EvalClip> &obf_train,
                                const std::vector<EvalClip> &obf_eval,
                                int finetune_epochs, uint64_t seed) {
  std::set<std::string> train_ids;
  for (const EvalClip &e : obf_train) {
    RASO_CHECK(!e.id.empty(), "clip ids are required for the disjointness check");
    RASO_CHECK(train_ids.insert(e.id).second,
               "duplicate clip id in the fine-tuning pool: " + e.id);
  }
  std::set<std::string> eval_ids;
  for (const EvalClip &e : obf_eval) {
    RASO_CHECK(!e.id.empty(), "clip ids are required for the disjointness check");
    RASO_CHECK(eval_ids.insert(e.id).second,
               "duplicate clip id in the eval pool: " + e.id);
    RASO_CHECK(train_ids.count(e.id) == 0,
               "clip appears in both the fine-tuning and eval pools: " + e.id);
  }

  ProxyConvClassifier tuned = ProxyConvClassifier::Make(seed);
  tuned.param_set.CopyValuesFrom(base.param_set);
  std::vector<const MelSpectrogram *> mels;
  std::vector<int> labels;
  mels.reserve(obf_train.size());
  labels.reserve(obf_train.size());
  for (const EvalClip &e : obf_train) {
    RASO_CHECK(e.mel != nullptr, "eval clip has no spectrogram");
    mels.push_back(e.mel);
    labels.push_back(e.sex);
  }
  FineTuneProxyClassifier(tuned, mels, labels, finetune_epochs, seed);

  AttackReport report;
  report.attack_mode = "semi_informed";
  report.eer_percent = ComputeEer(ScoreClips(tuned, obf_eval));
  report.n_trials = static_cast<int64_t>(obf_eval.size());
  report.classifier_description =
      base.description() + ", fine-tuned on obfuscated clips";
  return report;
}

// ---------------------------------------------------------------------------
// acoustic neutrality
// ---------------------------------------------------------------------------

bool NeutralityReport::all_finite() const {
  bool ok = std::isfinite(mean_f0_hz) && std::isfinite(mu_neutral_hz) &&
            std::isfinite(f0_gap_hz) && std::isfinite(mean_ambiguity);
  for (int k = 0; k < 3; k++)
    ok = ok && std::isfinite(formant_mean_gap_hz[static_cast<size_t>(k)]) &&
         std::isfinite(formant_stddev_gap_hz[static_cast<size_t>(k)]);
  return ok && n_clips > 0;
}

NeutralityReport MeasureNeutrality(
    const std::vector<const MelSpectrogram *> &mels,
    const SexClassifier &classifier, const NeutralState &neutral,
    int invert_iterations) {
  RASO_CHECK(!mels.empty(), "neutrality report needs at least one clip");
  RASO_CHECK(invert_iterations > 0, "invert_iterations must be positive");

  std::vector<PitchTrack> pitches;
  std::vector<FormantTrack> formants;
  pitches.reserve(mels.size());
  formants.reserve(mels.size());
  real ambiguity = 0;
  for (const MelSpectrogram *mel : mels) {
    RASO_CHECK(mel != nullptr, "neutrality report: null spectrogram");
    const AudioClip audio = InvertMel(*mel, invert_iterations);
    pitches.push_back(EstimateF0(audio));
    formants.push_back(ExtractFormants(audio));
    ambiguity += std::fabs(classifier.Classify(*mel) - 0.5);
  }

  std::vector<const PitchTrack *> pitch_ptrs;
  pitch_ptrs.reserve(pitches.size());
  for (const PitchTrack &p : pitches) pitch_ptrs.push_back(&p);
  const real mean_f0 = BatchMeanF0(pitch_ptrs);
  RASO_CHECK(mean_f0 > 0, "no voiced frames in the evaluated clips");
  const FormantStats measured = FormantStatistics(formants);

  NeutralityReport report;
  report.mean_f0_hz = mean_f0;
  report.mu_neutral_hz = neutral.mu_neutral_hz;
  report.f0_gap_hz = std::fabs(mean_f0 - neutral.mu_neutral_hz);
  for (size_t k = 0; k < 3; k++) {
    report.formant_mean_gap_hz[k] =
        std::fabs(measured.mean[k] - neutral.formant_neutral.mean[k]);
    report.formant_stddev_gap_hz[k] =
        std::fabs(measured.stddev[k] - neutral.formant_neutral.stddev[k]);
  }
  report.mean_ambiguity = ambiguity / static_cast<real>(mels.size());
  report.n_clips = static_cast<int64_t>(mels.size());
  return report;
}

std::vector<MelSpectrogram> ConvertExamples(
    const TrainState &state, const std::vector<TrainExample> &clips,
    int batch_size) {
  RASO_CHECK(batch_size > 0, "batch_size must be positive");
  std::map<int64_t, std::vector<size_t>> by_len;
  for (size_t i = 0; i < clips.size(); i++)
    by_len[clips[i].mel.n_frames].push_back(i);

  std::vector<MelSpectrogram> out(clips.size());
  for (const auto &group : by_len) {
    const std::vector<size_t> &members = group.second;
    for (size_t start = 0; start < members.size();
         start += static_cast<size_t>(batch_size)) {
      const size_t stop =
          std::min(members.size(), start + static_cast<size_t>(batch_size));
      const std::vector<size_t> chunk(members.begin() + static_cast<int64_t>(start),
                                      members.begin() + static_cast<int64_t>(stop));
      std::vector<MelSpectrogram> converted =
          GenerateBatch(state.generator, ViewOf(clips, chunk),
                        state.neutral.mu_neutral_hz, StyleChoice::kNeutral);
      for (size_t i = 0; i < chunk.size(); i++)
        out[chunk[i]] = std::move(converted[i]);
    }
  }
  return out;
}

NeutralityReport ComputeNeutralityReport(
    const TrainState &state, const SexClassifier &classifier,
    const std::vector<TrainExample> &eval_clips, int invert_iterations) {
  RASO_CHECK(!eval_clips.empty(), "neutrality report needs at least one clip");
  const std::vector<MelSpectrogram> converted = ConvertExamples(state, eval_clips);
  std::vector<const MelSpectrogram *> ptrs;
  ptrs.reserve(converted.size());
  for (const MelSpectrogram &m : converted) ptrs.push_back(&m);
  return MeasureNeutrality(ptrs, classifier, state.neutral, invert_iterations);
}

// ---------------------------------------------------------------------------
// desk-scale recognizer
// ---------------------------------------------------------------------------

namespace {

// Frame range [begin, end) of segment `i` when T frames split into n pieces.
std::pair<int64_t, int64_t> SegmentSpan(int64_t t_frames, int64_t n, int64_t i) {
  return {t_frames * i / n, t_frames * (i + 1) / n};
}

std::vector<real> SegmentMean(const Tensor &feat, int64_t begin, int64_t end) {
  const int64_t dim = feat.dim(0);
  std::vector<real> mean(static_cast<size_t>(dim), 0.0);
  for (int64_t d = 0; d < dim; d++) {
    real sum = 0;
    for (int64_t t = begin; t < end; t++) sum += feat.at2(d, t);
    mean[static_cast<size_t>(d)] = sum / static_cast<real>(end - begin);
  }
  return mean;
}

}  // namespace

void VowelRecognizer::Fit(const std::vector<const MelSpectrogram *> &mels,
                          const std::vector<std::string> &transcripts) {
  RASO_CHECK(mels.size() == transcripts.size(), "one transcript per clip");
  RASO_CHECK(!mels.empty(), "recognizer fitting needs at least one clip");

  std::map<std::string, std::pair<std::vector<real>, int64_t>> sums;
  real frames_per_token_sum = 0;
  for (size_t c = 0; c < mels.size(); c++) {
    RASO_CHECK(mels[c] != nullptr, "recognizer fitting: null spectrogram");
    const std::vector<std::string> tokens = SplitTokens(transcripts[c]);
    RASO_CHECK(!tokens.empty(), "transcribed clip has an empty transcript");
    const Tensor feat = mfcc_.Extract(*mels[c]);
    const int64_t t_frames = feat.dim(1);
    const int64_t n = static_cast<int64_t>(tokens.size());
    RASO_CHECK(t_frames >= n, "clip shorter than its transcript");
    frames_per_token_sum += static_cast<real>(t_frames) / static_cast<real>(n);
    for (int64_t i = 0; i < n; i++) {
      const auto [begin, end] = SegmentSpan(t_frames, n, i);
      const std::vector<real> mean = SegmentMean(feat, begin, end);
      auto &slot = sums[tokens[static_cast<size_t>(i)]];
      if (slot.first.empty()) slot.first.assign(mean.size(), 0.0);
      for (size_t d = 0; d < mean.size(); d++) slot.first[d] += mean[d];
      slot.second++;
    }
  }

  tokens_.clear();
  templates_.clear();
  for (const auto &entry : sums) {
    tokens_.push_back(entry.first);
    std::vector<real> tmpl = entry.second.first;
    for (real &v : tmpl) v /= static_cast<real>(entry.second.second);
    templates_.push_back(std::move(tmpl));
  }
  frames_per_token_ = frames_per_token_sum / static_cast<real>(mels.size());
}

std::vector<std::string> VowelRecognizer::Recognize(
    const MelSpectrogram &mel) const {
  RASO_CHECK(fitted(), "recognizer must be fitted before use");
  const Tensor feat = mfcc_.Extract(mel);
  const int64_t t_frames = feat.dim(1);
  int64_t n = static_cast<int64_t>(
      std::llround(static_cast<real>(t_frames) / frames_per_token_));
  n = std::max<int64_t>(1, std::min(n, t_frames));

  std::vector<std::string> hyp;
  hyp.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; i++) {
    const auto [begin, end] = SegmentSpan(t_frames, n, i);
    const std::vector<real> mean = SegmentMean(feat, begin, end);
    size_t best = 0;
    real best_dist = 0;
    for (size_t k = 0; k < templates_.size(); k++) {
      real dist = 0;
      for (size_t d = 0; d < mean.size(); d++) {
        const real delta = mean[d] - templates_[k][d];
        dist += delta * delta;
      }
      if (k == 0 || dist < best_dist) {
        best = k;
        best_dist = dist;
      }
    }
    hyp.push_back(tokens_[best]);
  }
  return hyp;
}

real CorpusWer(const VowelRecognizer &recognizer,
               const std::vector<const MelSpectrogram *> &mels,
               const std::vector<std::string> &ref_transcripts) {
  RASO_CHECK(mels.size() == ref_transcripts.size(), "one transcript per clip");
  RASO_CHECK(!mels.empty(), "corpus WER needs at least one clip");
  int64_t errors = 0, ref_total = 0;
  for (size_t i = 0; i < mels.size(); i++) {
    RASO_CHECK(mels[i] != nullptr, "corpus WER: null spectrogram");
    const std::vector<std::string> ref = SplitTokens(ref_transcripts[i]);
    RASO_CHECK(!ref.empty(), "WER reference must be nonempty");
    errors += TokenEditDistance(ref, recognizer.Recognize(*mels[i]));
    ref_total += static_cast<int64_t>(ref.size());
  }
  return 100.0 * static_cast<real>(errors) / static_cast<real>(ref_total);
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

std::string ToJsonLine(const AttackReport &report) {
  nlohmann::json j;
  j["record"] = "attack_report";
  j["attack_mode"] = report.attack_mode;
  j["eer_percent"] = report.eer_percent;
  j["n_trials"] = report.n_trials;
  j["classifier"] = report.classifier_description;
  return j.dump();
}

std::string ToJsonLine(const NeutralityReport &report) {
  nlohmann::json j;
  j["record"] = "neutrality_report";
  j["mean_f0_hz"] = report.mean_f0_hz;
  j["mu_neutral_hz"] = report.mu_neutral_hz;
  j["f0_gap_hz"] = report.f0_gap_hz;
  j["formant_mean_gap_hz"] = report.formant_mean_gap_hz;
  j["formant_stddev_gap_hz"] = report.formant_stddev_gap_hz;
  j["mean_ambiguity"] = report.mean_ambiguity;
  j["n_clips"] = report.n_clips;
  return j.dump();
}

std::string SummaryTable(const std::string &model,
                         const AttackReport &ignorant, real wer_percent,
                         const AttackReport &semi_informed) {
  RASO_CHECK(ignorant.attack_mode == "ignorant" &&
                 semi_informed.attack_mode == "semi_informed",
             "summary row wants one report per attack mode");
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-20s %16s %8s %20s\n", "model",
                "ignorant EER %", "WER %", "semi-informed EER %");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-20s %16.2f %8.2f %20.2f\n", model.c_str(),
                ignorant.eer_percent, wer_percent, semi_informed.eer_percent);
  out += buf;
  return out;
}

}  // namespace raso
