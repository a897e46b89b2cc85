// raso/training.hpp

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

#ifndef RASO_TRAINING_HPP_
#define RASO_TRAINING_HPP_

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "raso/adversary.hpp"
#include "raso/generator.hpp"
#include "raso/losses.hpp"
#include "raso/nn.hpp"
#include "raso/signal.hpp"

namespace raso {

// ---------------------------------------------------------------------------
// neutral target state
// ---------------------------------------------------------------------------

// The moving pitch target plus the fixed formant moments of mixed-sex
// training speech.  150 Hz is the median F0 of mixed-sex data and serves as
// the starting point before any batch statistics arrive.
struct NeutralState {
  real mu_neutral_hz = 150.0;
  real gamma = 0.99;
  FormantStats formant_neutral;
};

// One exponential-moving-average update toward a batch's voiced-frame mean:
// mu' = gamma * mu + (1 - gamma) * batch_mean_f0.  A batch without voiced
// frames (signalled by a non-positive or non-finite mean) leaves the state
// untouched and notes the skip on `log`.
NeutralState UpdateMuNeutral(const NeutralState &state, real batch_mean_f0,
                             std::ostream *log = nullptr);

// Frame-weighted mean F0 over the voiced frames of a batch of tracks; zero
// when nothing is voiced.
real BatchMeanF0(const std::vector<const PitchTrack *> &pitches);

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct TrainingConfig {
  real lr_generator = 1e-5;
  real lr_discriminator = 1e-4;
  int batch_size = 16;  // desk default; the reference setting is 64
  int max_epochs = 150;
  int early_stop_patience = 10;
  real weight_decay = 0.01;
  uint64_t seed = 1;
  // Formant moments of generated speech come from re-synthesized audio,
  // which is far too slow (and not differentiable) to run every step; they
  // are refreshed every `formant_refresh_every` generator steps from
  // `formant_probe_clips` clips and held constant in between.
  int formant_refresh_every = 10;
  int formant_probe_clips = 2;
  int formant_invert_iterations = 30;
  LossWeights weights;

  void Validate() const;
};

// Flat "key = value" text with '#' comments, one key per line.  Unknown keys
// and malformed lines are errors; omitted keys keep their defaults.
std::string FormatTrainingConfig(const TrainingConfig &cfg);
TrainingConfig ParseTrainingConfig(const std::string &text);
TrainingConfig LoadTrainingConfig(const std::string &path);
void SaveTrainingConfig(const std::string &path, const TrainingConfig &cfg);

// ---------------------------------------------------------------------------
// training state
// ---------------------------------------------------------------------------

struct TrainState {
  TrainingConfig config;
  GeneratorNet generator;
  DiscriminatorNet discriminator;
  NeutralState neutral;
  // Formant moments of the current generator's speech, refreshed every K
  // steps (see TrainingConfig) and treated as constants in between.
  FormantStats formant_cache;
  nn::AdamW opt_g;
  nn::AdamW opt_d;
  int64_t step = 0;
  int epoch = 0;
  real best_validation = std::numeric_limits<real>::infinity();
  Rng rng{1};
};

// Fresh state with both networks initialized from the config seed.  Formant
// moments start unset; Fit pools them from the training corpus, and direct
// step callers must fill them first.
TrainState InitTrainState(const TrainingConfig &cfg);

// ---------------------------------------------------------------------------
// data plumbing
// ---------------------------------------------------------------------------

struct TrainExample {
  MelSpectrogram mel;
  PitchTrack pitch;
  FormantTrack formants;
  int label = 0;  // 0 = male, 1 = female
  std::string transcript;
};

// Mel, pitch and formant analysis for every clip, in corpus order.
std::vector<TrainExample> PrepareExamples(const std::vector<SynthClip> &clips);

// Non-owning view of one batch; all clips must share a frame count.
struct BatchView {
  std::vector<const MelSpectrogram *> mels;
  std::vector<int> labels;
  std::vector<const PitchTrack *> pitches;
};

BatchView ViewOf(const std::vector<TrainExample> &examples,
                 const std::vector<size_t> &indices);

// Plain batched forward pass (no gradients kept); one output mel per input.
std::vector<MelSpectrogram> GenerateBatch(const GeneratorNet &net,
                                          const BatchView &batch,
                                          real mu_neutral_hz,
                                          StyleChoice style);

// ---------------------------------------------------------------------------
// optimization steps
// ---------------------------------------------------------------------------

// One least-squares critic update on real versus already-generated mels.
// The fake batch is plain data, so no gradient can reach the generator; only
// adversary parameters and their optimizer buffers change.  Non-finite
// losses or gradients abort before any mutation.
LossReport DiscriminatorStep(
    TrainState &state, const std::vector<const MelSpectrogram *> &real_batch,
    const std::vector<const MelSpectrogram *> &fake_batch);

// One generator update: builds the obfuscation pass, scores it with the
// critic, the frozen classifier and the content extractor, reconstructs
// through the cycle pass, aligns the pitch surrogate against the detached
// structural base, adds the cached formant term, applies one optimizer step
// to generator parameters only and finally advances the neutral pitch EMA.
// Writes one loss log line per call when `log` is given.
LossReport GeneratorStep(TrainState &state, const BatchView &batch,
                         const SexClassifier &classifier,
                         const ContentFeatureExtractor &extractor,
                         std::ostream *log = nullptr);

// The same objective evaluated without touching any state; used for
// validation totals.
LossReport EvaluateGeneratorLosses(const TrainState &state,
                                   const BatchView &batch,
                                   const SexClassifier &classifier,
                                   const ContentFeatureExtractor &extractor);

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

// Single container holding the config text and its hash, both parameter
// sets with optimizer moments, the spectral-norm buffers, the neutral state
// and the bookkeeping counters.  The file variant writes to a temporary
// sibling and renames, so a crash never leaves a half-written checkpoint.
void SaveCheckpoint(std::ostream &os, const TrainState &state);
void SaveCheckpoint(const std::string &path, const TrainState &state);
TrainState LoadCheckpoint(std::istream &is);
TrainState LoadCheckpoint(const std::string &path);

// ---------------------------------------------------------------------------
// the training loop
// ---------------------------------------------------------------------------

// Stops after `patience` consecutive non-improving observations.
struct EarlyStopper {
  real best = std::numeric_limits<real>::infinity();
  int since_best = 0;
  int patience = 10;

  // Returns true when training should stop.  Improvement is strict.
  bool Update(real validation_total);
};

// Alternates one critic step and one generator step per batch, evaluates the
// validation total each epoch and returns the best-validation state (exactly
// restored through the checkpoint codec).  The corpus is split internally:
// the first ceil(validation_fraction * n) clips of a seeded shuffle validate,
// the rest train.  Errors when either side of the split is single-sex.
TrainState Fit(const TrainingConfig &cfg,
               const std::vector<TrainExample> &corpus,
               real validation_fraction, const SexClassifier &classifier,
               const ContentFeatureExtractor &extractor,
               std::ostream *log = nullptr);

}  // namespace raso

#endif  // RASO_TRAINING_HPP_
