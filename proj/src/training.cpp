// src/training.cpp

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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace raso {

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'A', 'S', 'O', 'C', 'K', 'P', '1'};
constexpr uint64_t kDiscSeedSalt = 0x0d15c000ull;
constexpr uint64_t kSplitSalt = 0x5b117000ull;
constexpr uint64_t kLoopSeedSalt = 0x100b0000ull;

bool AllFinite(const std::vector<real> &xs) {
  for (real x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

template <class T>
void WritePod(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
void ReadPod(std::istream &is, T *v) {
  is.read(reinterpret_cast<char *>(v), sizeof(T));
  RASO_CHECK(is.good(), "truncated checkpoint");
}

void WriteString(std::ostream &os, const std::string &s) {
  WritePod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string ReadString(std::istream &is) {
  uint32_t len = 0;
  ReadPod(is, &len);
  std::string s(len, '\0');
  is.read(s.data(), len);
  RASO_CHECK(is.good(), "truncated checkpoint");
  return s;
}

std::vector<nn::Conv2d *> SpectralLayers(DiscriminatorNet &net) {
  return {&net.s0_c0, &net.s0_c1, &net.s0_c2, &net.s0_head,
          &net.s1_c0, &net.s1_c1, &net.s1_c2, &net.s1_head};
}

std::string FormatReal(real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Trim(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// neutral target state
// ---------------------------------------------------------------------------

NeutralState UpdateMuNeutral(const NeutralState &state, real batch_mean_f0,
                             std::ostream *log) {
  if (!std::isfinite(batch_mean_f0) || batch_mean_f0 <= 0.0) {
    if (log)
      *log << "mu_neutral update skipped: batch has no voiced frames\n";
    return state;
  }
  NeutralState next = state;
  next.mu_neutral_hz =
      state.gamma * state.mu_neutral_hz + (1.0 - state.gamma) * batch_mean_f0;
  return next;
}

real BatchMeanF0(const std::vector<const PitchTrack *> &pitches) {
  real acc = 0.0;
  int64_t count = 0;
  for (const PitchTrack *p : pitches)
    for (size_t t = 0; t < p->size(); t++)
      if (p->voiced[t]) {
        acc += p->f0_hz[t];
        count++;
      }
  return count > 0 ? acc / static_cast<real>(count) : 0.0;
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

void TrainingConfig::Validate() const {
  RASO_CHECK(std::isfinite(lr_generator) && lr_generator > 0.0,
             "generator learning rate must be positive");
  RASO_CHECK(std::isfinite(lr_discriminator) && lr_discriminator > 0.0,
             "discriminator learning rate must be positive");
  RASO_CHECK(batch_size >= 1, "batch size must be at least one");
  RASO_CHECK(max_epochs >= 1, "epoch budget must be at least one");
  RASO_CHECK(early_stop_patience >= 1, "patience must be at least one");
  RASO_CHECK(std::isfinite(weight_decay) && weight_decay >= 0.0,
             "weight decay must be non-negative");
  RASO_CHECK(formant_refresh_every >= 1 && formant_probe_clips >= 1 &&
                 formant_invert_iterations >= 1,
             "formant refresh settings must be positive");
  weights.Validate();
}

std::string FormatTrainingConfig(const TrainingConfig &cfg) {
  std::ostringstream os;
  os << "lr_generator = " << FormatReal(cfg.lr_generator) << "\n"
     << "lr_discriminator = " << FormatReal(cfg.lr_discriminator) << "\n"
     << "batch_size = " << cfg.batch_size << "\n"
     << "max_epochs = " << cfg.max_epochs << "\n"
     << "early_stop_patience = " << cfg.early_stop_patience << "\n"
     << "weight_decay = " << FormatReal(cfg.weight_decay) << "\n"
     << "seed = " << cfg.seed << "\n"
     << "formant_refresh_every = " << cfg.formant_refresh_every << "\n"
     << "formant_probe_clips = " << cfg.formant_probe_clips << "\n"
     << "formant_invert_iterations = " << cfg.formant_invert_iterations
     << "\n"
     << "alpha1 = " << FormatReal(cfg.weights.alpha1) << "\n"
     << "alpha2 = " << FormatReal(cfg.weights.alpha2) << "\n"
     << "alpha3 = " << FormatReal(cfg.weights.alpha3) << "\n"
     << "alpha4 = " << FormatReal(cfg.weights.alpha4) << "\n"
     << "alpha5 = " << FormatReal(cfg.weights.alpha5) << "\n"
     << "alpha6 = " << FormatReal(cfg.weights.alpha6) << "\n"
     << "lambda_rel = " << FormatReal(cfg.weights.lambda_rel) << "\n"
     << "beta = " << FormatReal(cfg.weights.beta) << "\n"
     << "soft_real = " << FormatReal(cfg.weights.soft_real) << "\n"
     << "soft_fake = " << FormatReal(cfg.weights.soft_fake) << "\n";
  return os.str();
}

TrainingConfig ParseTrainingConfig(const std::string &text) {
  TrainingConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    RASO_CHECK(eq != std::string::npos,
               "config line " + std::to_string(line_no) + " has no '='");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    RASO_CHECK(!key.empty() && !value.empty(),
               "config line " + std::to_string(line_no) + " is incomplete");
    try {
      if (key == "lr_generator") cfg.lr_generator = std::stod(value);
      else if (key == "lr_discriminator") cfg.lr_discriminator = std::stod(value);
      else if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "max_epochs") cfg.max_epochs = std::stoi(value);
      else if (key == "early_stop_patience") cfg.early_stop_patience = std::stoi(value);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "formant_refresh_every") cfg.formant_refresh_every = std::stoi(value);
      else if (key == "formant_probe_clips") cfg.formant_probe_clips = std::stoi(value);
      else if (key == "formant_invert_iterations") cfg.formant_invert_iterations = std::stoi(value);
      else if (key == "alpha1") cfg.weights.alpha1 = std::stod(value);
      else if (key == "alpha2") cfg.weights.alpha2 = std::stod(value);
      else if (key == "alpha3") cfg.weights.alpha3 = std::stod(value);
      else if (key == "alpha4") cfg.weights.alpha4 = std::stod(value);
      else if (key == "alpha5") cfg.weights.alpha5 = std::stod(value);
      else if (key == "alpha6") cfg.weights.alpha6 = std::stod(value);
      else if (key == "lambda_rel") cfg.weights.lambda_rel = std::stod(value);
      else if (key == "beta") cfg.weights.beta = std::stod(value);
      else if (key == "soft_real") cfg.weights.soft_real = std::stod(value);
      else if (key == "soft_fake") cfg.weights.soft_fake = std::stod(value);
      else
        throw Error("unknown config key: " + key);
    } catch (const std::invalid_argument &) {
      throw Error("config line " + std::to_string(line_no) +
                  ": cannot parse value for " + key);
    } catch (const std::out_of_range &) {
      throw Error("config line " + std::to_string(line_no) +
                  ": value out of range for " + key);
    }
  }
  return cfg;
}

TrainingConfig LoadTrainingConfig(const std::string &path) {
  std::ifstream is(path);
  RASO_CHECK(is.good(), "cannot open config file: " + path);
  std::ostringstream text;
  text << is.rdbuf();
  return ParseTrainingConfig(text.str());
}

void SaveTrainingConfig(const std::string &path, const TrainingConfig &cfg) {
  std::ofstream os(path);
  RASO_CHECK(os.good(), "cannot write config file: " + path);
  os << FormatTrainingConfig(cfg);
  RASO_CHECK(os.good(), "failed writing config file: " + path);
}

// ---------------------------------------------------------------------------
// training state
// ---------------------------------------------------------------------------

TrainState InitTrainState(const TrainingConfig &cfg) {
  cfg.Validate();
  TrainState state;
  state.config = cfg;
  state.generator = GeneratorNet::Make(cfg.seed);
  state.discriminator = DiscriminatorNet::Make(cfg.seed ^ kDiscSeedSalt);
  state.discriminator.RefreshSpectralNorms(30);
  state.opt_g.lr = cfg.lr_generator;
  state.opt_g.weight_decay = cfg.weight_decay;
  state.opt_d.lr = cfg.lr_discriminator;
  state.opt_d.weight_decay = cfg.weight_decay;
  state.rng = Rng(cfg.seed ^ kLoopSeedSalt);
  return state;
}

// ---------------------------------------------------------------------------
// data plumbing
// ---------------------------------------------------------------------------

std::vector<TrainExample> PrepareExamples(const std::vector<SynthClip> &clips) {
  std::vector<TrainExample> out;
  out.reserve(clips.size());
  for (const SynthClip &c : clips) {
    TrainExample e;
    e.mel = ComputeMel(c.clip);
    e.pitch = EstimateF0(c.clip);
    e.formants = ExtractFormants(c.clip);
    e.label = c.sex;
    e.transcript = c.transcript;
    out.push_back(std::move(e));
  }
  return out;
}

BatchView ViewOf(const std::vector<TrainExample> &examples,
                 const std::vector<size_t> &indices) {
  BatchView view;
  view.mels.reserve(indices.size());
  view.labels.reserve(indices.size());
  view.pitches.reserve(indices.size());
  for (size_t i : indices) {
    RASO_CHECK(i < examples.size(), "batch index out of range");
    view.mels.push_back(&examples[i].mel);
    view.labels.push_back(examples[i].label);
    view.pitches.push_back(&examples[i].pitch);
  }
  return view;
}

std::vector<MelSpectrogram> GenerateBatch(const GeneratorNet &net,
                                          const BatchView &batch,
                                          real mu_neutral_hz,
                                          StyleChoice style) {
  RASO_CHECK(!batch.mels.empty(), "cannot generate an empty batch");
  std::vector<PitchTrack> pitches;
  pitches.reserve(batch.pitches.size());
  for (const PitchTrack *p : batch.pitches) pitches.push_back(*p);
  Graph g;
  Var x = g.Leaf(MelBatchTensor(batch.mels));
  GeneratorBuild made = BuildGenerate(
      g, net, x, batch.labels, pitches,
      std::vector<real>(batch.mels.size(), mu_neutral_hz), style);
  std::vector<MelSpectrogram> out;
  out.reserve(batch.mels.size());
  for (size_t b = 0; b < batch.mels.size(); b++)
    out.push_back(TensorToMel(g.val(made.out), static_cast<int64_t>(b)));
  return out;
}

// ---------------------------------------------------------------------------
// optimization steps
// ---------------------------------------------------------------------------

LossReport DiscriminatorStep(
    TrainState &state, const std::vector<const MelSpectrogram *> &real_batch,
    const std::vector<const MelSpectrogram *> &fake_batch) {
  RASO_CHECK(!real_batch.empty() && !fake_batch.empty(),
             "critic step needs nonempty batches");
  nn::ParamSet &dp = state.discriminator.params;
  dp.ZeroGrad();

  Graph g;
  Var xr = g.Leaf(MelBatchTensor(real_batch));
  Var xf = g.Leaf(MelBatchTensor(fake_batch));
  Var sr = BuildDiscriminate(g, state.discriminator, xr);
  Var sf = BuildDiscriminate(g, state.discriminator, xf);
  Var loss = BuildAdvLossD(g, sr, sf, state.config.weights);
  const real value = g.scalar(loss);
  RASO_CHECK(std::isfinite(value),
             "non-finite critic loss; step aborted with parameters untouched");
  g.Backward(loss);
  for (const auto &p : dp.params())
    if (!AllFinite(p->grad.data)) {
      dp.ZeroGrad();
      throw Error("non-finite critic gradient for " + p->name +
                  "; step aborted with parameters untouched");
    }
  state.opt_d.Step(dp);
  state.discriminator.RefreshSpectralNorms(3);

  LossReport report;
  report.adv = value;
  report.total = value;
  return report;
}

namespace {

struct Objective {
  Var total = -1;
  LossReport report;
};

// Assembles the full six-term generator objective on one graph.  The
// formant term enters as a constant (its moments are only refreshed every K
// steps), so it shifts the total without steering this step's gradient.
Objective BuildObjective(Graph &g, const GeneratorNet &gen,
                         const DiscriminatorNet &disc,
                         const NeutralState &neutral,
                         const FormantStats &formant_cache,
                         const LossWeights &w, const BatchView &batch,
                         const SexClassifier &classifier,
                         const ContentFeatureExtractor &extractor) {
  const size_t bsz = batch.mels.size();
  RASO_CHECK(bsz > 0, "generator step needs a nonempty batch");
  RASO_CHECK(batch.labels.size() == bsz && batch.pitches.size() == bsz,
             "batch fields must align");
  for (size_t k = 0; k < 3; k++)
    RASO_CHECK(neutral.formant_neutral.mean[k] > 0.0,
               "neutral formant moments are unset");

  std::vector<PitchTrack> pitches;
  pitches.reserve(bsz);
  for (const PitchTrack *p : batch.pitches) pitches.push_back(*p);

  Var x = g.Leaf(MelBatchTensor(batch.mels));
  GeneratorBuild fwd = BuildGenerate(
      g, gen, x, batch.labels, pitches,
      std::vector<real>(bsz, neutral.mu_neutral_hz), StyleChoice::kNeutral);

  Var adv = BuildAdvLossG(g, BuildDiscriminate(g, disc, fwd.out), w);
  Var sex = BuildSexAmbiguityLoss(g, classifier.BuildClassify(g, fwd.out));
  Var content = BuildL1Loss(g, extractor.BuildExtract(g, x),
                            extractor.BuildExtract(g, fwd.out));

  // Reconstruction: run the output back through with the source style and
  // each clip's own mean as the pitch target.
  std::vector<real> mu_source(bsz);
  for (size_t i = 0; i < bsz; i++)
    mu_source[i] = pitches[i].num_voiced() > 0 ? pitches[i].MeanVoicedF0()
                                               : neutral.mu_neutral_hz;
  GeneratorBuild back =
      BuildGenerate(g, gen, fwd.out, batch.labels, fwd.shifted, mu_source,
                    StyleChoice::kSource);
  Var cycle = BuildL1Loss(g, back.out, x);

  // The anchor is a detached copy of the structural base, whose low bands
  // already carry the neutral-mean pattern; matching surrogate readings
  // between output and anchor cancels the surrogate's own bias.
  Tensor anchor_value = g.val(fwd.base);
  Var anchor = g.Leaf(std::move(anchor_value));
  Var f0 =
      BuildF0SurrogateLoss(g, fwd.out, anchor, fwd.shifted, w.lambda_rel);

  const real formant_value =
      FormantLoss(formant_cache, neutral.formant_neutral, w.beta);
  Tensor ft({1});
  ft.data[0] = formant_value;
  Var formant = g.Leaf(std::move(ft));

  Objective obj;
  obj.total = BuildWeightedTotal(g, adv, sex, content, f0, formant, cycle, w);
  obj.report.adv = g.scalar(adv);
  obj.report.sex = g.scalar(sex);
  obj.report.content = g.scalar(content);
  obj.report.f0 = g.scalar(f0);
  obj.report.formant = formant_value;
  obj.report.cycle = g.scalar(cycle);
  obj.report.total = g.scalar(obj.total);
  return obj;
}

// Re-synthesizes a few clips of the current batch and re-pools formant
// moments; keeps the old cache (with a note) when analysis finds nothing.
void RefreshFormantCache(TrainState &state, const BatchView &batch,
                         std::ostream *log) {
  const size_t probes =
      std::min(batch.mels.size(),
               static_cast<size_t>(state.config.formant_probe_clips));
  BatchView probe;
  probe.mels.assign(batch.mels.begin(),
                    batch.mels.begin() + static_cast<ptrdiff_t>(probes));
  probe.labels.assign(batch.labels.begin(),
                      batch.labels.begin() + static_cast<ptrdiff_t>(probes));
  probe.pitches.assign(batch.pitches.begin(),
                       batch.pitches.begin() + static_cast<ptrdiff_t>(probes));
  std::vector<MelSpectrogram> gen =
      GenerateBatch(state.generator, probe, state.neutral.mu_neutral_hz,
                    StyleChoice::kNeutral);
  std::vector<FormantTrack> tracks;
  tracks.reserve(gen.size());
  for (const MelSpectrogram &m : gen)
    tracks.push_back(
        ExtractFormants(InvertMel(m, state.config.formant_invert_iterations)));
  try {
    state.formant_cache = FormantStatistics(tracks);
  } catch (const Error &e) {
    if (log) *log << "formant refresh skipped: " << e.what() << "\n";
  }
}

}  // namespace

LossReport GeneratorStep(TrainState &state, const BatchView &batch,
                         const SexClassifier &classifier,
                         const ContentFeatureExtractor &extractor,
                         std::ostream *log) {
  if (state.step % state.config.formant_refresh_every == 0)
    RefreshFormantCache(state, batch, log);

  nn::ParamSet &gp = state.generator.params;
  gp.ZeroGrad();
  Graph g;
  Objective obj = BuildObjective(g, state.generator, state.discriminator,
                                 state.neutral, state.formant_cache,
                                 state.config.weights, batch, classifier,
                                 extractor);
  if (!obj.report.all_finite())
    throw Error("non-finite generator loss; step aborted: " +
                LossLogLine(state.step, obj.report));
  g.Backward(obj.total);
  for (const auto &p : gp.params())
    if (!AllFinite(p->grad.data)) {
      gp.ZeroGrad();
      throw Error("non-finite generator gradient for " + p->name +
                  "; step aborted with parameters untouched");
    }
  state.opt_g.Step(gp);
  state.step++;
  state.neutral =
      UpdateMuNeutral(state.neutral, BatchMeanF0(batch.pitches), log);
  if (log) *log << LossLogLine(state.step, obj.report) << "\n";
  return obj.report;
}

LossReport EvaluateGeneratorLosses(const TrainState &state,
                                   const BatchView &batch,
                                   const SexClassifier &classifier,
                                   const ContentFeatureExtractor &extractor) {
  Graph g;
  return BuildObjective(g, state.generator, state.discriminator,
                        state.neutral, state.formant_cache,
                        state.config.weights, batch, classifier, extractor)
      .report;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

void SaveCheckpoint(std::ostream &os, const TrainState &state) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string cfg_text = FormatTrainingConfig(state.config);
  WriteString(os, cfg_text);
  WritePod<uint64_t>(os, Fnv1a(cfg_text.data(), cfg_text.size()));

  WritePod<real>(os, state.neutral.mu_neutral_hz);
  WritePod<real>(os, state.neutral.gamma);
  for (size_t k = 0; k < 3; k++) WritePod<real>(os, state.neutral.formant_neutral.mean[k]);
  for (size_t k = 0; k < 3; k++) WritePod<real>(os, state.neutral.formant_neutral.stddev[k]);
  for (size_t k = 0; k < 3; k++) WritePod<real>(os, state.formant_cache.mean[k]);
  for (size_t k = 0; k < 3; k++) WritePod<real>(os, state.formant_cache.stddev[k]);

  WritePod<int64_t>(os, state.step);
  WritePod<int32_t>(os, state.epoch);
  WritePod<real>(os, state.best_validation);

  std::ostringstream rng_text;
  rng_text << state.rng;
  WriteString(os, rng_text.str());
  WritePod<int64_t>(os, state.opt_g.t);
  WritePod<int64_t>(os, state.opt_d.t);

  state.generator.params.Save(os, /*with_opt_state=*/true);
  state.discriminator.params.Save(os, /*with_opt_state=*/true);
  // The spectral buffers are live state: restoring them exactly keeps the
  // next forward pass bit-identical to the unsaved run.
  for (nn::Conv2d *c :
       SpectralLayers(const_cast<DiscriminatorNet &>(state.discriminator))) {
    WritePod<real>(os, c->sigma);
    WritePod<uint64_t>(os, static_cast<uint64_t>(c->u.size()));
    for (real v : c->u) WritePod<real>(os, v);
  }
  RASO_CHECK(os.good(), "failed writing checkpoint stream");
}

void SaveCheckpoint(const std::string &path, const TrainState &state) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    RASO_CHECK(os.good(), "cannot write checkpoint: " + tmp);
    SaveCheckpoint(os, state);
  }
  RASO_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0,
             "cannot move checkpoint into place: " + path);
}

TrainState LoadCheckpoint(std::istream &is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  RASO_CHECK(is.good() &&
                 std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
             "not a checkpoint file");
  const std::string cfg_text = ReadString(is);
  uint64_t stored_hash = 0;
  ReadPod(is, &stored_hash);
  RASO_CHECK(stored_hash == Fnv1a(cfg_text.data(), cfg_text.size()),
             "checkpoint config hash mismatch");

  TrainState state = InitTrainState(ParseTrainingConfig(cfg_text));
  ReadPod(is, &state.neutral.mu_neutral_hz);
  ReadPod(is, &state.neutral.gamma);
  for (size_t k = 0; k < 3; k++) ReadPod(is, &state.neutral.formant_neutral.mean[k]);
  for (size_t k = 0; k < 3; k++) ReadPod(is, &state.neutral.formant_neutral.stddev[k]);
  for (size_t k = 0; k < 3; k++) ReadPod(is, &state.formant_cache.mean[k]);
  for (size_t k = 0; k < 3; k++) ReadPod(is, &state.formant_cache.stddev[k]);

  ReadPod(is, &state.step);
  int32_t epoch = 0;
  ReadPod(is, &epoch);
  state.epoch = epoch;
  ReadPod(is, &state.best_validation);

  std::istringstream rng_text(ReadString(is));
  rng_text >> state.rng;
  RASO_CHECK(!rng_text.fail(), "corrupt RNG state in checkpoint");
  ReadPod(is, &state.opt_g.t);
  ReadPod(is, &state.opt_d.t);

  state.generator.params.Load(is);
  state.discriminator.params.Load(is);
  for (nn::Conv2d *c : SpectralLayers(state.discriminator)) {
    ReadPod(is, &c->sigma);
    uint64_t len = 0;
    ReadPod(is, &len);
    c->u.resize(len);
    for (real &v : c->u) ReadPod(is, &v);
  }
  return state;
}

TrainState LoadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  RASO_CHECK(is.good(), "cannot open checkpoint: " + path);
  return LoadCheckpoint(is);
}

// ---------------------------------------------------------------------------
// the training loop
// ---------------------------------------------------------------------------

bool EarlyStopper::Update(real validation_total) {
  if (validation_total < best) {
    best = validation_total;
    since_best = 0;
    return false;
  }
  since_best++;
  return since_best >= patience;
}

namespace {

bool HasBothClasses(const std::vector<TrainExample> &corpus,
                    const std::vector<size_t> &indices) {
  bool male = false, female = false;
  for (size_t i : indices) (corpus[i].label == 0 ? male : female) = true;
  return male && female;
}

// Length-grouped batches of at most `batch_size`, preserving the incoming
// order inside each group so a shuffled epoch stays shuffled.
std::vector<std::vector<size_t>> BatchesOf(
    const std::vector<TrainExample> &corpus, const std::vector<size_t> &order,
    int batch_size) {
  std::map<int64_t, std::vector<size_t>> by_len;
  for (size_t i : order) by_len[corpus[i].mel.n_frames].push_back(i);
  std::vector<std::vector<size_t>> batches;
  for (const auto &[frames, group] : by_len)
    for (size_t at = 0; at < group.size();
         at += static_cast<size_t>(batch_size)) {
      const size_t end =
          std::min(group.size(), at + static_cast<size_t>(batch_size));
      batches.emplace_back(group.begin() + static_cast<ptrdiff_t>(at),
                           group.begin() + static_cast<ptrdiff_t>(end));
    }
  return batches;
}

}  // namespace

TrainState Fit(const TrainingConfig &cfg,
               const std::vector<TrainExample> &corpus,
               real validation_fraction, const SexClassifier &classifier,
               const ContentFeatureExtractor &extractor, std::ostream *log) {
  cfg.Validate();
  RASO_CHECK(corpus.size() >= 4, "corpus too small to split");
  RASO_CHECK(validation_fraction > 0.0 && validation_fraction < 1.0,
             "validation fraction must lie inside (0, 1)");

  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng split_rng(cfg.seed ^ kSplitSalt);
  Shuffle(order, split_rng);
  const size_t n_val = std::max<size_t>(
      1, static_cast<size_t>(
             std::llround(validation_fraction *
                          static_cast<real>(corpus.size()))));
  RASO_CHECK(n_val < corpus.size(), "validation split swallows the corpus");
  const std::vector<size_t> val_idx(order.begin(),
                                    order.begin() + static_cast<ptrdiff_t>(n_val));
  const std::vector<size_t> train_idx(
      order.begin() + static_cast<ptrdiff_t>(n_val), order.end());
  RASO_CHECK(HasBothClasses(corpus, train_idx) &&
                 HasBothClasses(corpus, val_idx),
             "both sexes must appear on each side of the split");

  TrainState state = InitTrainState(cfg);
  {
    std::vector<FormantTrack> tracks;
    tracks.reserve(train_idx.size());
    for (size_t i : train_idx) tracks.push_back(corpus[i].formants);
    state.neutral.formant_neutral = FormantStatistics(tracks);
    state.formant_cache = state.neutral.formant_neutral;
  }

  const auto val_batches = BatchesOf(corpus, val_idx, cfg.batch_size);
  EarlyStopper stopper;
  stopper.patience = cfg.early_stop_patience;
  std::string best_blob;

  for (int epoch = 1; epoch <= cfg.max_epochs; epoch++) {
    std::vector<size_t> shuffled = train_idx;
    Shuffle(shuffled, state.rng);
    for (const auto &indices : BatchesOf(corpus, shuffled, cfg.batch_size)) {
      const BatchView batch = ViewOf(corpus, indices);
      const std::vector<MelSpectrogram> fakes =
          GenerateBatch(state.generator, batch, state.neutral.mu_neutral_hz,
                        StyleChoice::kNeutral);
      std::vector<const MelSpectrogram *> fake_ptrs;
      fake_ptrs.reserve(fakes.size());
      for (const MelSpectrogram &m : fakes) fake_ptrs.push_back(&m);
      DiscriminatorStep(state, batch.mels, fake_ptrs);
      GeneratorStep(state, batch, classifier, extractor, log);
    }
    state.epoch = epoch;

    real val_total = 0.0;
    size_t val_clips = 0;
    for (const auto &indices : val_batches) {
      const LossReport r = EvaluateGeneratorLosses(
          state, ViewOf(corpus, indices), classifier, extractor);
      val_total += r.total * static_cast<real>(indices.size());
      val_clips += indices.size();
    }
    val_total /= static_cast<real>(val_clips);
    if (log) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "epoch=%d validation_total=%.9g\n",
                    epoch, val_total);
      *log << buf;
    }

    if (val_total < stopper.best) {
      state.best_validation = val_total;
      std::ostringstream blob;
      SaveCheckpoint(blob, state);
      best_blob = blob.str();
    }
    if (stopper.Update(val_total)) break;
  }
  RASO_CHECK(!best_blob.empty(), "training never produced a checkpoint");
  std::istringstream best(best_blob);
  return LoadCheckpoint(best);
}

}  // namespace raso
