// tests/test_evaluation.cpp

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
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace {

using namespace raso;

// 160 one-second clips, 80 per class; the first 120 train the attack
// classifier, the last 40 are the held-out eval pool.  Built once on first
// use and shared by the attack, neutrality and recognizer cases.
struct AttackBench {
  std::vector<SynthClip> corpus;
  std::vector<MelSpectrogram> mels;
  ProxyConvClassifier proxy;          // raw-trained, frozen
  std::vector<EvalClip> train_pool;   // ids clip0 .. clip119
  std::vector<EvalClip> eval_pool;    // ids clip120 .. clip159
};

const AttackBench &Bench() {
  static const AttackBench bench = [] {
    AttackBench b;
    SynthCorpusConfig cfg;
    cfg.n_clips = 160;
    cfg.seed = 61;
    b.corpus = SynthCorpus(cfg);
    b.mels.reserve(b.corpus.size());
    for (const SynthClip &c : b.corpus) b.mels.push_back(ComputeMel(c.clip));

    std::vector<const MelSpectrogram *> train;
    std::vector<int> labels;
    for (size_t i = 0; i < 120; i++) {
      train.push_back(&b.mels[i]);
      labels.push_back(b.corpus[i].sex);
    }
    b.proxy = TrainProxyClassifier(train, labels, 8, 9);

    for (size_t i = 0; i < b.corpus.size(); i++) {
      EvalClip e{&b.mels[i], b.corpus[i].sex, "clip" + std::to_string(i)};
      (i < 120 ? b.train_pool : b.eval_pool).push_back(e);
    }
    return b;
  }();
  return bench;
}

// Independent referee for the equal error rate: evaluates the error rates at
// every midpoint between adjacent distinct scores (plus the accept-everything
// and reject-everything extremes) and interpolates the crossing on the
// false-reject side.  Any threshold between two adjacent scores predicts the
// same labels, so this enumerates exactly the achievable operating points.
real MidpointOracleEer(const std::vector<Trial> &trials) {
  std::vector<real> scores;
  scores.reserve(trials.size());
  for (const Trial &t : trials) scores.push_back(t.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<real> cuts = {scores.front() - 1.0};
  for (size_t i = 0; i + 1 < scores.size(); i++)
    cuts.push_back(0.5 * (scores[i] + scores[i + 1]));
  cuts.push_back(scores.back());

  real n_pos = 0, n_neg = 0;
  for (const Trial &t : trials) (t.label == 1 ? n_pos : n_neg) += 1.0;

  real prev_far = 2.0, prev_frr = -1.0;
  for (real cut : cuts) {
    real fa = 0, fr = 0;
    for (const Trial &t : trials) {
      if (t.label == 0 && t.score > cut) fa += 1.0;
      if (t.label == 1 && t.score <= cut) fr += 1.0;
    }
    const real far = fa / n_neg;
    const real frr = fr / n_pos;
    if (frr >= far) {
      const real gap0 = prev_far - prev_frr;
      const real gap1 = far - frr;
      const real t = gap0 / (gap0 - gap1);
      return 100.0 * (prev_frr + t * (frr - prev_frr));
    }
    prev_far = far;
    prev_frr = frr;
  }
  return -1.0;  // unreachable: the last cut rejects everything
}

std::vector<std::string> Chars(const std::string &word) {
  std::vector<std::string> out;
  for (char c : word) out.emplace_back(1, c);
  return out;
}

}  // namespace

TEST_CASE("equal error rate follows the threshold-sweep convention") {
  // Perfect separation.
  CHECK(ComputeEer({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}) ==
        doctest::Approx(0.0).epsilon(1e-15));
  // A single trial per class still defines the sweep.
  CHECK(ComputeEer({{0.7, 1}, {0.3, 0}}) == doctest::Approx(0.0).epsilon(1e-15));

  // Fully inverted scores: every operating point is maximally wrong.
  CHECK(ComputeEer({{0.1, 1}, {0.2, 1}, {0.8, 0}, {0.9, 0}}) ==
        doctest::Approx(100.0).epsilon(1e-12));

  // A classifier with one output for everything is a coin flip.
  CHECK(ComputeEer({{0.5, 1}, {0.5, 0}, {0.5, 1}, {0.5, 0}}) ==
        doctest::Approx(50.0).epsilon(1e-12));

  // Worked example: one error on each side of the threshold at the crossing.
  const std::vector<Trial> worked = {{0.9, 1}, {0.6, 1}, {0.4, 1},
                                     {0.5, 0}, {0.2, 0}, {0.1, 0}};
  CHECK(ComputeEer(worked) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  CHECK(MidpointOracleEer(worked) ==
        doctest::Approx(100.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(ComputeEer({}), Error);
  CHECK_THROWS_AS(ComputeEer({{0.4, 1}, {0.6, 1}}), Error);  // one class only
  CHECK_THROWS_AS(ComputeEer({{0.4, 0}, {0.6, 0}}), Error);
  CHECK_THROWS_AS(
      ComputeEer({{std::numeric_limits<real>::quiet_NaN(), 1}, {0.5, 0}}),
      Error);
  CHECK_THROWS_AS(
      ComputeEer({{std::numeric_limits<real>::infinity(), 1}, {0.5, 0}}),
      Error);
  CHECK_THROWS_AS(ComputeEer({{0.4, 2}, {0.6, 0}}), Error);
  CHECK_THROWS_AS(ComputeEer({{0.4, -1}, {0.6, 1}}), Error);
}

TEST_CASE("equal error rate matches a brute-force midpoint oracle") {
  Rng rng(2024);
  std::uniform_int_distribution<int> size_dist(2, 100);
  std::uniform_real_distribution<real> unif(0.0, 1.0);

  for (int rep = 0; rep < 1000; rep++) {
    const int n = size_dist(rng);
    // Every third set is quantized to one decimal, which piles trials of
    // both labels onto shared scores — the tie-handling stress case.
    const bool quantized = rep % 3 == 0;
    std::vector<Trial> trials;
    trials.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; i++) {
      real s = unif(rng);
      if (quantized) s = std::round(s * 10.0) / 10.0;
      trials.push_back({s, i < n / 2 ? 1 : 0});
    }
    CHECK(std::abs(ComputeEer(trials) - MidpointOracleEer(trials)) < 1e-9);
  }
}

TEST_CASE("equal error rate is invariant under monotone score transforms") {
  Rng rng(77);
  std::uniform_int_distribution<int> size_dist(2, 60);
  std::uniform_real_distribution<real> unif(-4.0, 4.0);

  for (int rep = 0; rep < 50; rep++) {
    const int n = size_dist(rng);
    std::vector<Trial> base;
    base.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; i++)
      base.push_back({unif(rng), i < n / 2 ? 1 : 0});
    const real eer = ComputeEer(base);

    // Strictly increasing maps preserve every comparison, so the sweep
    // visits identical error rates and the result is identical bits.
    std::vector<Trial> affine = base, cubed = base, exped = base;
    for (int i = 0; i < n; i++) {
      const size_t s = static_cast<size_t>(i);
      affine[s].score = 2.0 * base[s].score + 3.0;
      cubed[s].score = base[s].score * base[s].score * base[s].score;
      exped[s].score = std::exp(base[s].score);
    }
    CHECK(ComputeEer(affine) == eer);
    CHECK(ComputeEer(cubed) == eer);
    CHECK(ComputeEer(exped) == eer);
  }
}

TEST_CASE("token edit distance and WER reproduce hand-worked tables") {
  // The classic character example: kitten -> sitting needs 3 edits.
  CHECK(TokenEditDistance(Chars("kitten"), Chars("sitting")) == 3);
  CHECK(TokenEditDistance({}, {}) == 0);
  CHECK(TokenEditDistance({}, {"a"}) == 1);
  CHECK(TokenEditDistance({"a", "b", "c"}, {"a", "b", "c"}) == 0);
  CHECK(TokenEditDistance({"a", "b", "c"}, {"a", "x", "c"}) == 1);

  // Unit costs make the distance symmetric.
  Rng rng(303);
  std::uniform_int_distribution<int> len_dist(0, 12);
  std::uniform_int_distribution<int> tok_dist(0, 3);
  const std::vector<std::string> alphabet = {"a", "e", "i", "o"};
  for (int rep = 0; rep < 200; rep++) {
    std::vector<std::string> r, h;
    for (int i = len_dist(rng); i > 0; i--)
      r.push_back(alphabet[static_cast<size_t>(tok_dist(rng))]);
    for (int i = len_dist(rng); i > 0; i--)
      h.push_back(alphabet[static_cast<size_t>(tok_dist(rng))]);
    CHECK(TokenEditDistance(r, h) == TokenEditDistance(h, r));
    CHECK(TokenEditDistance(r, r) == 0);
    if (!r.empty()) CHECK(ComputeWer(r, r) == doctest::Approx(0.0).epsilon(1e-15));
  }

  CHECK(ComputeWer({"a", "b", "c"}, {"a", "x", "c"}) ==
        doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  CHECK(ComputeWer({"a", "b", "c"}, {}) == doctest::Approx(100.0).epsilon(1e-12));
  // Insertions can push the rate past 100 percent.
  CHECK(ComputeWer({"a"}, {"a", "b", "c"}) ==
        doctest::Approx(200.0).epsilon(1e-12));
  CHECK_THROWS_AS(ComputeWer({}, {"a"}), Error);

  CHECK(SplitTokens("  a   bb c  ") == std::vector<std::string>{"a", "bb", "c"});
  CHECK(SplitTokens("\t x \n y ") == std::vector<std::string>{"x", "y"});
  CHECK(SplitTokens("").empty());
  CHECK(SplitTokens("   ").empty());
}

TEST_CASE("the ignorant attack scores a frozen classifier on the eval pool") {
  const AttackBench &bench = Bench();

  const AttackReport report = IgnorantAttack(bench.proxy, bench.eval_pool);
  CHECK(report.attack_mode == "ignorant");
  CHECK(report.n_trials == 40);
  CHECK(report.classifier_description == "four-layer convolutional proxy");
  // Raw speech is an easy target: the proxy separates the held-out pool
  // nearly perfectly.
  CHECK(report.eer_percent >= 0.0);
  CHECK(report.eer_percent <= 10.0);

  // Pure function of its inputs.
  const AttackReport again = IgnorantAttack(bench.proxy, bench.eval_pool);
  CHECK(again.eer_percent == report.eer_percent);

  // A classifier with no opinion cannot beat coin flipping.
  ConstClassifier coin(0.5);
  const AttackReport blind = IgnorantAttack(coin, bench.eval_pool);
  CHECK(blind.eer_percent == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(blind.n_trials == 40);
  CHECK(blind.classifier_description == "constant stub (p=0.5)");

  CHECK_THROWS_AS(IgnorantAttack(bench.proxy, {}), Error);

  std::vector<EvalClip> bad = bench.eval_pool;
  bad[0].mel = nullptr;
  CHECK_THROWS_AS(IgnorantAttack(bench.proxy, bad), Error);
  bad = bench.eval_pool;
  bad[0].sex = 2;
  CHECK_THROWS_AS(IgnorantAttack(bench.proxy, bad), Error);

  // A single-sex pool has no crossing to report.
  std::vector<EvalClip> lone;
  for (size_t i = 0; i < bench.corpus.size() && lone.size() < 2; i++)
    if (bench.corpus[i].sex == 0)
      lone.push_back({&bench.mels[i], 0, "m" + std::to_string(i)});
  CHECK_THROWS_AS(IgnorantAttack(bench.proxy, lone), Error);
}

TEST_CASE("the semi-informed attack adapts a copy and leaves the base frozen") {
  const AttackBench &bench = Bench();

  const uint64_t base_before = bench.proxy.param_set.Checksum();
  const AttackReport semi =
      SemiInformedAttack(bench.proxy, bench.train_pool, bench.eval_pool, 2, 5);
  CHECK(bench.proxy.param_set.Checksum() == base_before);

  CHECK(semi.attack_mode == "semi_informed");
  CHECK(semi.n_trials == 40);
  CHECK(semi.classifier_description ==
        "four-layer convolutional proxy, fine-tuned on obfuscated clips");

  // Fine-tuning on raw speech only sharpens an already-strong attacker: the
  // adapted copy stays within a couple of points of the frozen base.
  CHECK(semi.eer_percent <= 10.0);
  const AttackReport ignorant = IgnorantAttack(bench.proxy, bench.eval_pool);
  CHECK(semi.eer_percent <= ignorant.eer_percent + 2.0);

  // Deterministic under a fixed seed.
  const AttackReport again =
      SemiInformedAttack(bench.proxy, bench.train_pool, bench.eval_pool, 2, 5);
  CHECK(again.eer_percent == semi.eer_percent);

  // Pool hygiene: duplicate ids, shared ids and anonymous clips are refused
  // before any fine-tuning happens.
  const std::vector<EvalClip> tr = {{&bench.mels[0], bench.corpus[0].sex, "a"},
                                    {&bench.mels[1], bench.corpus[1].sex, "b"}};
  const std::vector<EvalClip> dup_train = {
      {&bench.mels[0], bench.corpus[0].sex, "x"},
      {&bench.mels[1], bench.corpus[1].sex, "x"}};
  CHECK_THROWS_AS(
      SemiInformedAttack(bench.proxy, dup_train, bench.eval_pool, 1, 1), Error);

  const std::vector<EvalClip> dup_eval = {
      {&bench.mels[2], bench.corpus[2].sex, "c"},
      {&bench.mels[3], bench.corpus[3].sex, "c"}};
  CHECK_THROWS_AS(SemiInformedAttack(bench.proxy, tr, dup_eval, 1, 1), Error);

  const std::vector<EvalClip> overlap = {
      {&bench.mels[2], bench.corpus[2].sex, "a"},
      {&bench.mels[3], bench.corpus[3].sex, "d"}};
  CHECK_THROWS_AS(SemiInformedAttack(bench.proxy, tr, overlap, 1, 1), Error);

  const std::vector<EvalClip> anonymous = {
      {&bench.mels[0], bench.corpus[0].sex, ""}};
  CHECK_THROWS_AS(
      SemiInformedAttack(bench.proxy, anonymous, bench.eval_pool, 1, 1), Error);
}

TEST_CASE("neutrality measurement reproduces a hand-assembled pipeline") {
  const AttackBench &bench = Bench();
  std::vector<const MelSpectrogram *> mels;
  for (size_t i = 154; i < 160; i++) mels.push_back(&bench.mels[i]);

  NeutralState neutral;
  neutral.formant_neutral.mean = {500.0, 1500.0, 2500.0};
  neutral.formant_neutral.stddev = {60.0, 120.0, 240.0};

  const NeutralityReport report =
      MeasureNeutrality(mels, bench.proxy, neutral, 25);

  // The same steps assembled by hand: invert, track, analyze, score.
  std::vector<PitchTrack> pitches;
  std::vector<FormantTrack> tracks;
  real ambiguity = 0;
  for (const MelSpectrogram *mel : mels) {
    const AudioClip audio = InvertMel(*mel, 25);
    pitches.push_back(EstimateF0(audio));
    tracks.push_back(ExtractFormants(audio));
    ambiguity += std::fabs(bench.proxy.Classify(*mel) - 0.5);
  }
  std::vector<const PitchTrack *> pitch_ptrs;
  for (const PitchTrack &p : pitches) pitch_ptrs.push_back(&p);
  const real mean_f0 = BatchMeanF0(pitch_ptrs);
  const FormantStats stats = FormantStatistics(tracks);

  CHECK(report.mean_f0_hz == doctest::Approx(mean_f0).epsilon(1e-12));
  CHECK(report.mu_neutral_hz == doctest::Approx(150.0).epsilon(1e-15));
  CHECK(report.f0_gap_hz ==
        doctest::Approx(std::fabs(mean_f0 - 150.0)).epsilon(1e-12));
  for (size_t k = 0; k < 3; k++) {
    CHECK(report.formant_mean_gap_hz[k] ==
          doctest::Approx(std::fabs(stats.mean[k] -
                                    neutral.formant_neutral.mean[k]))
              .epsilon(1e-12));
    CHECK(report.formant_stddev_gap_hz[k] ==
          doctest::Approx(std::fabs(stats.stddev[k] -
                                    neutral.formant_neutral.stddev[k]))
              .epsilon(1e-12));
  }
  CHECK(report.mean_ambiguity ==
        doctest::Approx(ambiguity / 6.0).epsilon(1e-12));
  CHECK(report.n_clips == 6);
  CHECK(report.all_finite());

  // Mixed-sex raw speech sits in the usual speaking range.
  CHECK(report.mean_f0_hz > 100.0);
  CHECK(report.mean_f0_hz < 260.0);

  // The coin-flip stub is maximally ambiguous about everything.
  ConstClassifier coin(0.5);
  const NeutralityReport flat = MeasureNeutrality(mels, coin, neutral, 5);
  CHECK(flat.mean_ambiguity < 1e-12);

  CHECK_THROWS_AS(MeasureNeutrality({}, coin, neutral, 25), Error);
  CHECK_THROWS_AS(MeasureNeutrality({nullptr}, coin, neutral, 25), Error);
  CHECK_THROWS_AS(MeasureNeutrality(mels, coin, neutral, 0), Error);

  // A silent spectrogram has no voiced frames to average.
  MelSpectrogram silent(kNumMelBands, 31);
  for (real &v : silent.values) v = std::log(1e-5);
  CHECK_THROWS_AS(MeasureNeutrality({&silent}, coin, neutral, 5), Error);
}

TEST_CASE("example conversion preserves order, length and batching") {
  // Two clip lengths interleaved, so the frame-count grouping has to undo
  // its own reordering.
  SynthCorpusConfig short_cfg;
  short_cfg.n_clips = 4;
  short_cfg.clip_seconds = 0.3;
  short_cfg.seed = 5;
  SynthCorpusConfig long_cfg = short_cfg;
  long_cfg.clip_seconds = 0.4;
  long_cfg.seed = 6;
  const std::vector<SynthClip> shorts = SynthCorpus(short_cfg);
  const std::vector<SynthClip> longs = SynthCorpus(long_cfg);
  std::vector<SynthClip> mixed;
  for (size_t i = 0; i < 4; i++) {
    mixed.push_back(shorts[i]);
    mixed.push_back(longs[i]);
  }
  const std::vector<TrainExample> examples = PrepareExamples(mixed);

  TrainingConfig cfg;
  cfg.seed = 11;
  const TrainState state = InitTrainState(cfg);

  const std::vector<MelSpectrogram> one = ConvertExamples(state, examples, 1);
  const std::vector<MelSpectrogram> three = ConvertExamples(state, examples, 3);
  const std::vector<MelSpectrogram> sixteen =
      ConvertExamples(state, examples, 16);

  REQUIRE(one.size() == examples.size());
  REQUIRE(three.size() == examples.size());
  REQUIRE(sixteen.size() == examples.size());
  for (size_t i = 0; i < examples.size(); i++) {
    CHECK(one[i].n_frames == examples[i].mel.n_frames);
    CHECK(one[i].n_mels == kNumMelBands);
    // Per-sample processing makes the result independent of batch makeup,
    // down to the last bit.
    CHECK(one[i].values == three[i].values);
    CHECK(one[i].values == sixteen[i].values);
  }

  // Converting a clip alone reproduces its batched row.
  for (size_t i : {size_t{0}, size_t{5}}) {
    const std::vector<MelSpectrogram> solo =
        ConvertExamples(state, {examples[i]});
    REQUIRE(solo.size() == 1);
    CHECK(solo[0].values == sixteen[i].values);
  }

  CHECK(ConvertExamples(state, {}, 4).empty());
  CHECK_THROWS_AS(ConvertExamples(state, examples, 0), Error);
}

TEST_CASE("the composite neutrality report is the conversion fed to the measurer") {
  SynthCorpusConfig cfg;
  cfg.n_clips = 6;
  cfg.clip_seconds = 0.3;
  cfg.seed = 29;
  const std::vector<TrainExample> clips = PrepareExamples(SynthCorpus(cfg));

  TrainingConfig tc;
  tc.seed = 3;
  const TrainState state = InitTrainState(tc);
  ConstClassifier coin(0.5);

  const NeutralityReport composed =
      ComputeNeutralityReport(state, coin, clips, 15);

  std::vector<MelSpectrogram> converted = ConvertExamples(state, clips);
  std::vector<const MelSpectrogram *> ptrs;
  for (const MelSpectrogram &m : converted) ptrs.push_back(&m);
  const NeutralityReport manual =
      MeasureNeutrality(ptrs, coin, state.neutral, 15);

  // Identical deterministic pipeline, identical bits.
  CHECK(composed.mean_f0_hz == manual.mean_f0_hz);
  CHECK(composed.mu_neutral_hz == manual.mu_neutral_hz);
  CHECK(composed.f0_gap_hz == manual.f0_gap_hz);
  for (size_t k = 0; k < 3; k++) {
    CHECK(composed.formant_mean_gap_hz[k] == manual.formant_mean_gap_hz[k]);
    CHECK(composed.formant_stddev_gap_hz[k] == manual.formant_stddev_gap_hz[k]);
  }
  CHECK(composed.mean_ambiguity == manual.mean_ambiguity);
  CHECK(composed.n_clips == manual.n_clips);

  CHECK_THROWS_AS(ComputeNeutralityReport(state, coin, {}, 15), Error);
}

TEST_CASE("the vowel recognizer is a deterministic template matcher") {
  const AttackBench &bench = Bench();

  std::vector<const MelSpectrogram *> train;
  std::vector<std::string> train_tx;
  for (size_t i = 0; i < 120; i++) {
    train.push_back(&bench.mels[i]);
    train_tx.push_back(bench.corpus[i].transcript);
  }

  VowelRecognizer rec;
  CHECK_FALSE(rec.fitted());
  CHECK_THROWS_AS(rec.Recognize(bench.mels[0]), Error);
  rec.Fit(train, train_tx);
  CHECK(rec.fitted());

  // Frames per token is the mean over clips of frames / transcript length.
  real expect_fpt = 0;
  for (size_t i = 0; i < 120; i++)
    expect_fpt += static_cast<real>(bench.mels[i].n_frames) /
                  static_cast<real>(SplitTokens(train_tx[i]).size());
  expect_fpt /= 120.0;
  CHECK(rec.frames_per_token() == doctest::Approx(expect_fpt).epsilon(1e-12));

  // The token inventory is the sorted set of transcript vowels.
  CHECK_FALSE(rec.tokens().empty());
  CHECK(std::is_sorted(rec.tokens().begin(), rec.tokens().end()));
  for (const std::string &tok : rec.tokens())
    CHECK(std::find(VowelInventory().begin(), VowelInventory().end(), tok) !=
          VowelInventory().end());

  // Hypotheses draw from the inventory and repeat exactly across calls.
  const std::vector<std::string> hyp = rec.Recognize(bench.mels[130]);
  CHECK_FALSE(hyp.empty());
  for (const std::string &tok : hyp)
    CHECK(std::find(rec.tokens().begin(), rec.tokens().end(), tok) !=
          rec.tokens().end());
  CHECK(rec.Recognize(bench.mels[130]) == hyp);

  // Refitting from the same data lands on the same recognizer.
  VowelRecognizer twin;
  twin.Fit(train, train_tx);
  CHECK(twin.frames_per_token() == rec.frames_per_token());
  CHECK(twin.Recognize(bench.mels[130]) == hyp);

  // Held-out raw speech: the templates transfer across speakers.
  std::vector<const MelSpectrogram *> eval_mels;
  std::vector<std::string> eval_tx;
  for (size_t i = 120; i < 160; i++) {
    eval_mels.push_back(&bench.mels[i]);
    eval_tx.push_back(bench.corpus[i].transcript);
  }
  const real wer = CorpusWer(rec, eval_mels, eval_tx);
  CHECK(wer >= 0.0);
  CHECK(wer < 25.0);

  // Pooled WER is total errors over total reference tokens.
  std::vector<const MelSpectrogram *> five(eval_mels.begin(),
                                           eval_mels.begin() + 5);
  std::vector<std::string> five_tx(eval_tx.begin(), eval_tx.begin() + 5);
  int64_t errors = 0, ref_total = 0;
  for (size_t i = 0; i < 5; i++) {
    const std::vector<std::string> ref = SplitTokens(five_tx[i]);
    errors += TokenEditDistance(ref, rec.Recognize(*five[i]));
    ref_total += static_cast<int64_t>(ref.size());
  }
  CHECK(CorpusWer(rec, five, five_tx) ==
        doctest::Approx(100.0 * static_cast<real>(errors) /
                        static_cast<real>(ref_total))
            .epsilon(1e-12));

  VowelRecognizer bad;
  CHECK_THROWS_AS(bad.Fit({&bench.mels[0]}, {}), Error);
  CHECK_THROWS_AS(bad.Fit({}, {}), Error);
  CHECK_THROWS_AS(bad.Fit({&bench.mels[0]}, {"   "}), Error);
  CHECK_THROWS_AS(bad.Fit({nullptr}, {"a"}), Error);
  MelSpectrogram tiny(kNumMelBands, 5);
  CHECK_THROWS_AS(bad.Fit({&tiny}, {"a a a a a a a a a"}), Error);

  const std::vector<std::string> lone_tx = {"a"};
  CHECK_THROWS_AS(CorpusWer(rec, five, lone_tx), Error);
  CHECK_THROWS_AS(CorpusWer(rec, {}, {}), Error);
  CHECK_THROWS_AS(CorpusWer(rec, {nullptr}, {"a"}), Error);
  CHECK_THROWS_AS(CorpusWer(rec, {&bench.mels[0]}, {"  "}), Error);
}

TEST_CASE("reports serialize to parseable single-line JSON") {
  AttackReport attack;
  attack.attack_mode = "ignorant";
  attack.eer_percent = 12.5;
  attack.n_trials = 40;
  attack.classifier_description = "four-layer convolutional proxy";

  const std::string line = ToJsonLine(attack);
  CHECK(line.find('\n') == std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(line);
  CHECK(j.at("record") == "attack_report");
  CHECK(j.at("attack_mode") == "ignorant");
  CHECK(j.at("eer_percent").get<real>() == doctest::Approx(12.5));
  CHECK(j.at("n_trials").get<int64_t>() == 40);
  CHECK(j.at("classifier") == "four-layer convolutional proxy");

  NeutralityReport neutrality;
  neutrality.mean_f0_hz = 151.25;
  neutrality.mu_neutral_hz = 150.0;
  neutrality.f0_gap_hz = 1.25;
  neutrality.formant_mean_gap_hz = {10.0, 20.0, 30.0};
  neutrality.formant_stddev_gap_hz = {1.0, 2.0, 3.0};
  neutrality.mean_ambiguity = 0.05;
  neutrality.n_clips = 12;

  const std::string nline = ToJsonLine(neutrality);
  CHECK(nline.find('\n') == std::string::npos);
  const nlohmann::json nj = nlohmann::json::parse(nline);
  CHECK(nj.at("record") == "neutrality_report");
  CHECK(nj.at("mean_f0_hz").get<real>() == doctest::Approx(151.25));
  CHECK(nj.at("mu_neutral_hz").get<real>() == doctest::Approx(150.0));
  CHECK(nj.at("f0_gap_hz").get<real>() == doctest::Approx(1.25));
  CHECK(nj.at("formant_mean_gap_hz")[1].get<real>() == doctest::Approx(20.0));
  CHECK(nj.at("formant_stddev_gap_hz")[2].get<real>() == doctest::Approx(3.0));
  CHECK(nj.at("mean_ambiguity").get<real>() == doctest::Approx(0.05));
  CHECK(nj.at("n_clips").get<int64_t>() == 12);
}

TEST_CASE("the summary table lays out one comparison row per model") {
  AttackReport ignorant;
  ignorant.attack_mode = "ignorant";
  ignorant.eer_percent = 45.67;
  AttackReport semi;
  semi.attack_mode = "semi_informed";
  semi.eer_percent = 28.9;

  const std::string table = SummaryTable("raso-desk", ignorant, 12.3, semi);
  CHECK(table.find("model") != std::string::npos);
  CHECK(table.find("ignorant EER %") != std::string::npos);
  CHECK(table.find("WER %") != std::string::npos);
  CHECK(table.find("semi-informed EER %") != std::string::npos);
  CHECK(table.find("raso-desk") != std::string::npos);
  CHECK(table.find("45.67") != std::string::npos);
  CHECK(table.find("12.30") != std::string::npos);
  CHECK(table.find("28.90") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 2);

  // One report per attack mode, in the right slots.
  CHECK_THROWS_AS(SummaryTable("x", semi, 0.0, semi), Error);
  CHECK_THROWS_AS(SummaryTable("x", ignorant, 0.0, ignorant), Error);
}
