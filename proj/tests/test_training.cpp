// tests/test_training.cpp

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

#include "raso/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"

namespace {

using namespace raso;

// Short clips keep the per-step cost tiny; 0.3 s is 31 mel frames.
const std::vector<TrainExample> &SmallCorpus() {
  static const std::vector<TrainExample> corpus = [] {
    SynthCorpusConfig cc;
    cc.n_clips = 12;
    cc.clip_seconds = 0.3;
    cc.seed = 21;
    return PrepareExamples(SynthCorpus(cc));
  }();
  return corpus;
}

FormantStats PoolMoments(const std::vector<TrainExample> &examples) {
  std::vector<FormantTrack> tracks;
  tracks.reserve(examples.size());
  for (const TrainExample &e : examples) tracks.push_back(e.formants);
  return FormantStatistics(tracks);
}

TrainingConfig SmallConfig() {
  TrainingConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 2;
  cfg.early_stop_patience = 2;
  cfg.seed = 33;
  cfg.formant_refresh_every = 10;
  cfg.formant_probe_clips = 1;
  cfg.formant_invert_iterations = 5;
  return cfg;
}

TrainState FreshState() {
  TrainState state = InitTrainState(SmallConfig());
  state.neutral.formant_neutral = PoolMoments(SmallCorpus());
  state.formant_cache = state.neutral.formant_neutral;
  return state;
}

std::vector<size_t> FirstIndices(size_t n) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; i++) idx[i] = i;
  return idx;
}

MelSpectrogram ConstantMel(int64_t frames, real value) {
  MelSpectrogram mel(kNumMelBands, frames);
  for (real &v : mel.values) v = value;
  return mel;
}

}  // namespace

TEST_CASE("neutral pitch mean follows its exponential moving average") {
  NeutralState state;
  CHECK(state.mu_neutral_hz == doctest::Approx(150.0));

  // Fixed point: feeding the current mean back changes nothing.
  CHECK(UpdateMuNeutral(state, 150.0).mu_neutral_hz ==
        doctest::Approx(150.0).epsilon(1e-12));

  // One step toward 200: 0.99 * 150 + 0.01 * 200 = 150.5.
  CHECK(UpdateMuNeutral(state, 200.0).mu_neutral_hz ==
        doctest::Approx(150.5).epsilon(1e-12));

  // The gap contracts by 0.99 per update, so 500 repeats of a 170 Hz batch
  // close the initial 20 Hz gap to under one hertz.
  NeutralState walker;
  for (int i = 0; i < 500; i++) walker = UpdateMuNeutral(walker, 170.0);
  CHECK(std::abs(walker.mu_neutral_hz - 170.0) < 1.0);
  CHECK(walker.mu_neutral_hz < 170.0);  // approaches from below

  // Unvoiced batches leave the state alone and say so.
  std::ostringstream log;
  NeutralState same = UpdateMuNeutral(state, 0.0, &log);
  CHECK(same.mu_neutral_hz == doctest::Approx(150.0).epsilon(1e-15));
  CHECK(log.str().find("no voiced frames") != std::string::npos);
  CHECK(UpdateMuNeutral(state, std::numeric_limits<real>::quiet_NaN())
            .mu_neutral_hz == doctest::Approx(150.0).epsilon(1e-15));

  // A custom smoothing factor is honored.
  NeutralState fast;
  fast.gamma = 0.5;
  CHECK(UpdateMuNeutral(fast, 200.0).mu_neutral_hz ==
        doctest::Approx(175.0).epsilon(1e-12));
}

TEST_CASE("batch mean F0 weights voiced frames, not clips") {
  PitchTrack a;
  a.f0_hz = {100.0, 100.0, 100.0, 0.0};
  a.voiced = {1, 1, 1, 0};
  PitchTrack b;
  b.f0_hz = {200.0, 0.0, 0.0, 0.0};
  b.voiced = {1, 0, 0, 0};
  // Four voiced frames total: (3 * 100 + 200) / 4 = 125.
  CHECK(BatchMeanF0({&a, &b}) == doctest::Approx(125.0).epsilon(1e-12));

  PitchTrack silent;
  silent.f0_hz.assign(3, 0.0);
  silent.voiced.assign(3, 0);
  CHECK(BatchMeanF0({&silent}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("training configs round-trip through their text form") {
  TrainingConfig cfg;
  cfg.lr_generator = 3e-5;
  cfg.lr_discriminator = 2.5e-4;
  cfg.batch_size = 7;
  cfg.max_epochs = 42;
  cfg.early_stop_patience = 3;
  cfg.weight_decay = 0.005;
  cfg.seed = 987654321;
  cfg.formant_refresh_every = 17;
  cfg.formant_probe_clips = 5;
  cfg.formant_invert_iterations = 12;
  cfg.weights.alpha3 = 12.5;
  cfg.weights.lambda_rel = 0.65;

  const TrainingConfig back = ParseTrainingConfig(FormatTrainingConfig(cfg));
  CHECK(back.lr_generator == doctest::Approx(cfg.lr_generator).epsilon(1e-15));
  CHECK(back.lr_discriminator ==
        doctest::Approx(cfg.lr_discriminator).epsilon(1e-15));
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.max_epochs == cfg.max_epochs);
  CHECK(back.early_stop_patience == cfg.early_stop_patience);
  CHECK(back.weight_decay == doctest::Approx(cfg.weight_decay).epsilon(1e-15));
  CHECK(back.seed == cfg.seed);
  CHECK(back.formant_refresh_every == cfg.formant_refresh_every);
  CHECK(back.formant_probe_clips == cfg.formant_probe_clips);
  CHECK(back.formant_invert_iterations == cfg.formant_invert_iterations);
  CHECK(back.weights.alpha3 == doctest::Approx(12.5).epsilon(1e-15));
  CHECK(back.weights.lambda_rel == doctest::Approx(0.65).epsilon(1e-15));

  // Comments, blank lines and spacing are tolerated; partial files keep
  // defaults for everything they omit.
  const TrainingConfig sparse = ParseTrainingConfig(
      "# tuned down for a quick run\n\n  batch_size =  8 # inline note\n");
  CHECK(sparse.batch_size == 8);
  CHECK(sparse.max_epochs == 150);
  CHECK(sparse.lr_generator == doctest::Approx(1e-5).epsilon(1e-15));

  CHECK_THROWS_AS(ParseTrainingConfig("mystery_knob = 3\n"), Error);
  CHECK_THROWS_AS(ParseTrainingConfig("batch_size\n"), Error);
  CHECK_THROWS_AS(ParseTrainingConfig("batch_size = soon\n"), Error);

  TrainingConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.Validate(), Error);
  bad = cfg;
  bad.lr_generator = -1e-5;
  CHECK_THROWS_AS(bad.Validate(), Error);
  bad = cfg;
  bad.early_stop_patience = 0;
  CHECK_THROWS_AS(bad.Validate(), Error);

  const std::string path = "/tmp/raso_test_config.txt";
  SaveTrainingConfig(path, cfg);
  const TrainingConfig from_file = LoadTrainingConfig(path);
  CHECK(from_file.seed == cfg.seed);
  CHECK(from_file.batch_size == cfg.batch_size);
  CHECK_THROWS_AS(LoadTrainingConfig("/tmp/raso_no_such_config.txt"), Error);
  std::remove(path.c_str());
}

TEST_CASE("critic steps touch only critic parameters and learn") {
  TrainingConfig cfg = SmallConfig();
  TrainState state = InitTrainState(cfg);

  // Separable toy data: bright maps are real, dark maps are fake.
  std::vector<MelSpectrogram> real_store, fake_store;
  for (int i = 0; i < 6; i++) {
    real_store.push_back(ConstantMel(16, 0.5 + 0.01 * i));
    fake_store.push_back(ConstantMel(16, -0.5 - 0.01 * i));
  }
  std::vector<const MelSpectrogram *> real_batch, fake_batch;
  for (const auto &m : real_store) real_batch.push_back(&m);
  for (const auto &m : fake_store) fake_batch.push_back(&m);

  const uint64_t gen_before = state.generator.params.Checksum();
  const uint64_t disc_before = state.discriminator.params.Checksum();

  const LossReport first = DiscriminatorStep(state, real_batch, fake_batch);
  CHECK(std::isfinite(first.adv));
  CHECK(first.total == doctest::Approx(first.adv).epsilon(1e-15));

  // Isolation: the generator is untouched, the critic is not.
  CHECK(state.generator.params.Checksum() == gen_before);
  CHECK(state.discriminator.params.Checksum() != disc_before);

  LossReport last = first;
  for (int i = 0; i < 49; i++)
    last = DiscriminatorStep(state, real_batch, fake_batch);
  CHECK(last.adv < first.adv);

  // Determinism: a twin state fed the same batches lands on the same bits.
  TrainState twin = InitTrainState(cfg);
  for (int i = 0; i < 50; i++) DiscriminatorStep(twin, real_batch, fake_batch);
  CHECK(twin.discriminator.params.Checksum() ==
        state.discriminator.params.Checksum());

  // A poisoned batch aborts before anything mutates.
  const uint64_t disc_now = state.discriminator.params.Checksum();
  MelSpectrogram poison = ConstantMel(16, 0.5);
  poison.values[7] = std::numeric_limits<real>::quiet_NaN();
  std::vector<const MelSpectrogram *> poisoned = fake_batch;
  poisoned[0] = &poison;
  CHECK_THROWS_AS(DiscriminatorStep(state, real_batch, poisoned), Error);
  CHECK(state.discriminator.params.Checksum() == disc_now);

  CHECK_THROWS_AS(DiscriminatorStep(state, {}, fake_batch), Error);
}

TEST_CASE("generator steps compute all six terms and stay isolated") {
  const auto &corpus = SmallCorpus();
  TrainState state = FreshState();
  const BatchView batch = ViewOf(corpus, FirstIndices(4));

  ProxyConvClassifier classifier = ProxyConvClassifier::Make(7);
  MfccFeatureExtractor extractor;

  const uint64_t disc_before = state.discriminator.params.Checksum();
  const uint64_t cls_before = classifier.param_set.Checksum();
  const uint64_t gen_before = state.generator.params.Checksum();
  const real mu_before = state.neutral.mu_neutral_hz;

  std::ostringstream log;
  const LossReport report =
      GeneratorStep(state, batch, classifier, extractor, &log);

  // Exactly seven finite scalars, and the total is their weighted sum.
  CHECK(std::isfinite(report.adv));
  CHECK(std::isfinite(report.sex));
  CHECK(std::isfinite(report.content));
  CHECK(std::isfinite(report.f0));
  CHECK(std::isfinite(report.formant));
  CHECK(std::isfinite(report.cycle));
  CHECK(std::isfinite(report.total));
  CHECK(report.total ==
        doctest::Approx(TotalGeneratorLoss(report, state.config.weights))
            .epsilon(1e-6));

  // Isolation: only generator values move.
  CHECK(state.discriminator.params.Checksum() == disc_before);
  CHECK(classifier.param_set.Checksum() == cls_before);
  CHECK(state.generator.params.Checksum() != gen_before);
  CHECK(state.step == 1);

  // The neutral mean advanced by one EMA step toward the batch mean.
  const real batch_mean = BatchMeanF0(batch.pitches);
  CHECK(state.neutral.mu_neutral_hz ==
        doctest::Approx(0.99 * mu_before + 0.01 * batch_mean).epsilon(1e-9));

  // The first step refreshed the formant cache from re-synthesized audio.
  CHECK(state.formant_cache.mean[0] > 0.0);

  // The log line parses back to the reported values.
  std::istringstream lines(log.str());
  std::string line;
  bool parsed = false;
  while (std::getline(lines, line)) {
    int64_t step = 0;
    LossReport back;
    if (ParseLossLogLine(line, &step, &back)) {
      parsed = true;
      CHECK(step == 1);
      CHECK(back.total == doctest::Approx(report.total).epsilon(1e-6));
    }
  }
  CHECK(parsed);

  // Determinism: a twin state reaches the same bits.
  TrainState twin = FreshState();
  GeneratorStep(twin, batch, classifier, extractor);
  CHECK(twin.generator.params.Checksum() ==
        state.generator.params.Checksum());
}

TEST_CASE("generator step aborts cleanly on poisoned input") {
  const auto &corpus = SmallCorpus();
  TrainState state = FreshState();
  ProxyConvClassifier classifier = ProxyConvClassifier::Make(7);
  MfccFeatureExtractor extractor;

  MelSpectrogram poison = corpus[0].mel;
  poison.values[3] = std::numeric_limits<real>::quiet_NaN();
  BatchView batch;
  batch.mels = {&poison, &corpus[1].mel};
  batch.labels = {corpus[0].label, corpus[1].label};
  batch.pitches = {&corpus[0].pitch, &corpus[1].pitch};

  const uint64_t gen_before = state.generator.params.Checksum();
  CHECK_THROWS_AS(GeneratorStep(state, batch, classifier, extractor), Error);
  CHECK(state.generator.params.Checksum() == gen_before);

  // Unset formant moments are flagged before any work happens.
  TrainState bare = InitTrainState(SmallConfig());
  const BatchView ok = ViewOf(corpus, FirstIndices(2));
  CHECK_THROWS_AS(GeneratorStep(bare, ok, classifier, extractor), Error);
}

TEST_CASE("evaluation of the objective leaves the state untouched") {
  const auto &corpus = SmallCorpus();
  TrainState state = FreshState();
  // Push the refresh far away so the step and the evaluation share a cache.
  state.config.formant_refresh_every = 1000000;
  state.step = 1;  // skip the step-zero refresh

  ProxyConvClassifier classifier = ProxyConvClassifier::Make(7);
  MfccFeatureExtractor extractor;
  const BatchView batch = ViewOf(corpus, FirstIndices(4));

  const uint64_t gen_before = state.generator.params.Checksum();
  const uint64_t disc_before = state.discriminator.params.Checksum();
  const real mu_before = state.neutral.mu_neutral_hz;

  const LossReport eval =
      EvaluateGeneratorLosses(state, batch, classifier, extractor);
  CHECK(state.generator.params.Checksum() == gen_before);
  CHECK(state.discriminator.params.Checksum() == disc_before);
  CHECK(state.neutral.mu_neutral_hz == mu_before);
  CHECK(state.step == 1);

  // The step optimizes exactly the objective the evaluation reports.
  const LossReport stepped = GeneratorStep(state, batch, classifier, extractor);
  CHECK(stepped.total == doctest::Approx(eval.total).epsilon(1e-12));
}

TEST_CASE("checkpoints restore training bit for bit") {
  const auto &corpus = SmallCorpus();
  TrainState state = FreshState();
  ProxyConvClassifier classifier = ProxyConvClassifier::Make(7);
  MfccFeatureExtractor extractor;
  const BatchView batch = ViewOf(corpus, FirstIndices(4));

  // Advance past the fresh state so moments, sigmas and counters are all
  // nontrivial.
  std::vector<MelSpectrogram> fakes = GenerateBatch(
      state.generator, batch, state.neutral.mu_neutral_hz,
      StyleChoice::kNeutral);
  std::vector<const MelSpectrogram *> fake_ptrs;
  for (const auto &m : fakes) fake_ptrs.push_back(&m);
  DiscriminatorStep(state, batch.mels, fake_ptrs);
  GeneratorStep(state, batch, classifier, extractor);

  std::ostringstream blob;
  SaveCheckpoint(blob, state);
  std::istringstream in(blob.str());
  TrainState restored = LoadCheckpoint(in);

  CHECK(restored.generator.params.Checksum() ==
        state.generator.params.Checksum());
  CHECK(restored.discriminator.params.Checksum() ==
        state.discriminator.params.Checksum());
  CHECK(restored.neutral.mu_neutral_hz == state.neutral.mu_neutral_hz);
  CHECK(restored.formant_cache.mean[1] == state.formant_cache.mean[1]);
  CHECK(restored.step == state.step);
  CHECK(restored.epoch == state.epoch);
  CHECK(restored.opt_g.t == state.opt_g.t);
  CHECK(restored.opt_d.t == state.opt_d.t);
  CHECK(restored.discriminator.s0_c1.sigma == state.discriminator.s0_c1.sigma);
  CHECK(restored.discriminator.s1_head.u == state.discriminator.s1_head.u);

  // One more identical step on each side stays bit-identical, so resuming
  // from disk is indistinguishable from never stopping.
  fakes = GenerateBatch(state.generator, batch, state.neutral.mu_neutral_hz,
                        StyleChoice::kNeutral);
  fake_ptrs.clear();
  for (const auto &m : fakes) fake_ptrs.push_back(&m);
  DiscriminatorStep(state, batch.mels, fake_ptrs);
  GeneratorStep(state, batch, classifier, extractor);

  std::vector<MelSpectrogram> fakes2 = GenerateBatch(
      restored.generator, batch, restored.neutral.mu_neutral_hz,
      StyleChoice::kNeutral);
  std::vector<const MelSpectrogram *> fake_ptrs2;
  for (const auto &m : fakes2) fake_ptrs2.push_back(&m);
  DiscriminatorStep(restored, batch.mels, fake_ptrs2);
  GeneratorStep(restored, batch, classifier, extractor);

  CHECK(restored.generator.params.Checksum() ==
        state.generator.params.Checksum());
  CHECK(restored.discriminator.params.Checksum() ==
        state.discriminator.params.Checksum());
  CHECK(restored.neutral.mu_neutral_hz == state.neutral.mu_neutral_hz);

  // File round trip is atomic (no .tmp left behind) and identical.
  const std::string path = "/tmp/raso_test_checkpoint.bin";
  SaveCheckpoint(path, state);
  std::ifstream probe(path + ".tmp");
  CHECK_FALSE(probe.good());
  TrainState from_file = LoadCheckpoint(path);
  CHECK(from_file.generator.params.Checksum() ==
        state.generator.params.Checksum());
  std::remove(path.c_str());

  // Corruption is caught: a flipped config byte breaks the stored hash.
  std::string bytes = blob.str();
  bytes[14] ^= 0x01;
  std::istringstream corrupt(bytes);
  CHECK_THROWS_AS(LoadCheckpoint(corrupt), Error);

  std::istringstream not_ckpt("definitely not a checkpoint");
  CHECK_THROWS_AS(LoadCheckpoint(not_ckpt), Error);
  CHECK_THROWS_AS(LoadCheckpoint("/tmp/raso_no_such_checkpoint.bin"), Error);
}

TEST_CASE("the early stopper stops after patience bad epochs") {
  // Strictly worsening validation with patience one stops at the second
  // observation.
  EarlyStopper one;
  one.patience = 1;
  CHECK_FALSE(one.Update(1.0));
  CHECK(one.Update(1.1));

  // A plateau is not an improvement.
  EarlyStopper two;
  two.patience = 2;
  CHECK_FALSE(two.Update(1.0));
  CHECK_FALSE(two.Update(1.0));
  CHECK(two.Update(1.0));

  // Any improvement resets the countdown.
  EarlyStopper reset;
  reset.patience = 2;
  CHECK_FALSE(reset.Update(1.0));
  CHECK_FALSE(reset.Update(1.1));
  CHECK_FALSE(reset.Update(0.9));
  CHECK_FALSE(reset.Update(1.2));
  CHECK(reset.Update(1.3));
  CHECK(reset.best == doctest::Approx(0.9));
}

TEST_CASE("fit runs the alternating loop deterministically") {
  const auto &corpus = SmallCorpus();
  TrainingConfig cfg = SmallConfig();
  ConstClassifier classifier(0.6);
  MfccFeatureExtractor extractor;

  std::ostringstream log;
  TrainState fitted = Fit(cfg, corpus, 0.25, classifier, extractor, &log);

  CHECK(fitted.epoch >= 1);
  CHECK(fitted.epoch <= cfg.max_epochs);
  CHECK(std::isfinite(fitted.best_validation));
  CHECK(fitted.step > 0);
  CHECK(fitted.neutral.formant_neutral.mean[0] > 0.0);

  // The log carries one parseable loss line per generator step plus one
  // validation line per epoch; the returned state is the best epoch.
  std::istringstream lines(log.str());
  std::string line;
  int loss_lines = 0;
  real best_seen = std::numeric_limits<real>::infinity();
  while (std::getline(lines, line)) {
    int64_t step = 0;
    LossReport r;
    if (ParseLossLogLine(line, &step, &r)) loss_lines++;
    real v = 0.0;
    int epoch = 0;
    if (std::sscanf(line.c_str(), "epoch=%d validation_total=%lf", &epoch,
                    &v) == 2)
      best_seen = std::min(best_seen, v);
  }
  CHECK(loss_lines >= fitted.step);
  CHECK(fitted.best_validation == doctest::Approx(best_seen).epsilon(1e-9));

  // Same seed, same corpus, same bits.
  TrainState again = Fit(cfg, corpus, 0.25, classifier, extractor);
  CHECK(again.generator.params.Checksum() ==
        fitted.generator.params.Checksum());
  CHECK(again.discriminator.params.Checksum() ==
        fitted.discriminator.params.Checksum());
  CHECK(again.best_validation ==
        doctest::Approx(fitted.best_validation).epsilon(1e-15));

  // A corpus with one sex only cannot train an obfuscator.
  std::vector<TrainExample> males;
  for (const TrainExample &e : corpus)
    if (e.label == 0) males.push_back(e);
  males.insert(males.end(), males.begin(), males.end());
  CHECK_THROWS_AS(Fit(cfg, males, 0.25, classifier, extractor), Error);

  CHECK_THROWS_AS(Fit(cfg, corpus, 0.0, classifier, extractor), Error);
  CHECK_THROWS_AS(Fit(cfg, corpus, 1.0, classifier, extractor), Error);
}
