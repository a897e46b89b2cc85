// raso/evaluation.hpp

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

#ifndef RASO_EVALUATION_HPP_
#define RASO_EVALUATION_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "raso/adversary.hpp"
#include "raso/signal.hpp"
#include "raso/training.hpp"

namespace raso {

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

// One scored trial.  `label` is 1 for the positive class (male, so p_male is
// the natural score) and the decision rule is score > threshold => positive.
struct Trial {
  real score = 0;
  int label = 0;
};

// Equal error rate in percent.  The threshold sweeps every distinct score
// plus an accept-everything endpoint below them all; the crossing of the
// false-accept and false-reject rates is located by linear interpolation
// between adjacent operating points.  Errors unless both labels appear and
// all scores are finite.
real ComputeEer(const std::vector<Trial> &trials);

// Minimum number of substitutions, deletions and insertions (unit costs)
// turning `ref` into `hyp`.
int64_t TokenEditDistance(const std::vector<std::string> &ref,
                          const std::vector<std::string> &hyp);

// Word error rate in percent: 100 * edit distance / |ref|.  Can exceed 100
// for hypotheses much longer than the reference.  Errors on an empty
// reference.
real ComputeWer(const std::vector<std::string> &ref_tokens,
                const std::vector<std::string> &hyp_tokens);

// Whitespace tokenizer for transcript strings.
std::vector<std::string> SplitTokens(const std::string &transcript);

// ---------------------------------------------------------------------------
// attack protocols
// ---------------------------------------------------------------------------

// Labeled spectrogram for scoring.  `id` names the source clip so the
// semi-informed protocol can prove its fine-tuning and eval pools disjoint.
struct EvalClip {
  const MelSpectrogram *mel = nullptr;
  int sex = 0;  // 0 = male, 1 = female
  std::string id;
};

struct AttackReport {
  std::string attack_mode;  // "ignorant" or "semi_informed"
  real eer_percent = 0;
  int64_t n_trials = 0;
  std::string classifier_description;
};

// Weakest attacker: scores every clip with a classifier that has never seen
// obfuscated speech and reports the EER of p_male against the true labels.
AttackReport IgnorantAttack(const SexClassifier &classifier,
                            const std::vector<EvalClip> &eval_clips);

// Stronger attacker: fine-tunes a copy of `base` on labeled obfuscated clips
// before scoring the obfuscated eval pool.  `base` itself is untouched.
// Errors if any clip id appears in both pools (or twice in either).
AttackReport SemiInformedAttack(const ProxyConvClassifier &base,
                                const std::vector<EvalClip> &obf_train,
                                const std::vector<EvalClip> &obf_eval,
                                int finetune_epochs, uint64_t seed);

// ---------------------------------------------------------------------------
// acoustic neutrality
// ---------------------------------------------------------------------------

struct NeutralityReport {
  real mean_f0_hz = 0;  // voiced-frame mean over the reconstructed audio
  real mu_neutral_hz = 0;
  real f0_gap_hz = 0;  // |mean_f0_hz - mu_neutral_hz|
  std::array<real, 3> formant_mean_gap_hz{};    // vs. the neutral reference
  std::array<real, 3> formant_stddev_gap_hz{};  // moments, per formant
  real mean_ambiguity = 0;                      // mean |p_male - 0.5|
  int64_t n_clips = 0;

  bool all_finite() const;
};

// Statistics of already-realized spectrograms against a neutral reference:
// every mel is inverted to audio, pitch-tracked and formant-analyzed, and
// scored by the classifier.  Feeding raw corpus mels here is the baseline
// path.  Errors on an empty list, when nothing is voiced, or when no frame
// yields confident formants.
NeutralityReport MeasureNeutrality(
    const std::vector<const MelSpectrogram *> &mels,
    const SexClassifier &classifier, const NeutralState &neutral,
    int invert_iterations = 60);

// Neutral-style conversion of prepared examples with the trained generator;
// one output mel per clip, in input order.  Clips are batched by frame count
// for speed; results do not depend on the batching.
std::vector<MelSpectrogram> ConvertExamples(
    const TrainState &state, const std::vector<TrainExample> &clips,
    int batch_size = 16);

// ConvertExamples + MeasureNeutrality against the checkpoint's own neutral
// statistics.
NeutralityReport ComputeNeutralityReport(
    const TrainState &state, const SexClassifier &classifier,
    const std::vector<TrainExample> &eval_clips, int invert_iterations = 60);

// ---------------------------------------------------------------------------
// desk-scale recognizer
// ---------------------------------------------------------------------------

// Template matcher standing in for an ASR system.  Fitting averages MFCC
// frames per token over uniform segmentations of transcribed clips and
// records the mean frames-per-token; recognition re-segments an input
// uniformly and emits the nearest template's token per segment.  It is a
// harness for WER deltas on the vowel-sequence corpus, not a speech
// recognizer.
class VowelRecognizer {
 public:
  void Fit(const std::vector<const MelSpectrogram *> &mels,
           const std::vector<std::string> &transcripts);
  std::vector<std::string> Recognize(const MelSpectrogram &mel) const;

  bool fitted() const { return !tokens_.empty(); }
  const std::vector<std::string> &tokens() const { return tokens_; }
  real frames_per_token() const { return frames_per_token_; }

 private:
  MfccFeatureExtractor mfcc_;
  std::vector<std::string> tokens_;            // sorted; fixes template order
  std::vector<std::vector<real>> templates_;   // one mean-MFCC row per token
  real frames_per_token_ = 0;
};

// Pooled WER over a corpus: 100 * total edit errors / total reference
// tokens, with hypotheses produced by the recognizer.
real CorpusWer(const VowelRecognizer &recognizer,
               const std::vector<const MelSpectrogram *> &mels,
               const std::vector<std::string> &ref_transcripts);

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

// Single-line JSON records, one per report, for machine consumption.
std::string ToJsonLine(const AttackReport &report);
std::string ToJsonLine(const NeutralityReport &report);

// Human-readable two-line summary in the usual comparison-row layout:
// model, ignorant EER, WER, semi-informed EER.
std::string SummaryTable(const std::string &model,
                         const AttackReport &ignorant, real wer_percent,
                         const AttackReport &semi_informed);

}  // namespace raso

#endif  // RASO_EVALUATION_HPP_
