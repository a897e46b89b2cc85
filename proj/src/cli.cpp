// src/cli.cpp

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

#include "raso/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "raso/evaluation.hpp"
#include "raso/manifest.hpp"
#include "raso/training.hpp"

namespace raso {

namespace fs = std::filesystem;

namespace {

constexpr int kProxyEpochs = 8;
constexpr uint64_t kBalanceSalt = 0x62616c616e636564ull;
constexpr uint64_t kClassifierSalt = 0x70726f7879ull;
constexpr uint64_t kSemiSalt = 0x73656d69ull;

const char *kCheckpointFile = "model.ckpt";
const char *kClassifierFile = "classifier.bin";
const char *kReportFile = "reports.jsonl";

void WriteFileAtomic(const std::string &path, const std::string &bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    RASO_CHECK(f.good(), "cannot write file: " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    RASO_CHECK(f.good(), "failed writing file: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  RASO_CHECK(!ec, "cannot replace file: " + path + " (" + ec.message() + ")");
}

void WriteWavAtomic(const std::string &path, const AudioClip &clip) {
  const std::string tmp = path + ".wav.tmp";
  WriteWav(tmp, clip);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  RASO_CHECK(!ec, "cannot replace file: " + path + " (" + ec.message() + ")");
}

void EnsureDir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  RASO_CHECK(!ec, "cannot create directory: " + dir + " (" + ec.message() + ")");
}

// RASO_SEED pins every stochastic choice of a run from the outside, which is
// what scripted determinism checks want.
void ApplySeedOverride(RunConfig &cfg) {
  const char *text = std::getenv("RASO_SEED");
  if (text == nullptr) return;
  uint64_t seed = 0;
  size_t used = 0;
  try {
    seed = std::stoull(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  RASO_CHECK(used == std::strlen(text) && used > 0,
             std::string("RASO_SEED must be an unsigned integer, got \"") +
                 text + "\"");
  cfg.training.seed = seed;
  cfg.synth.seed = seed;
}

RunConfig LoadConfigWithOverride(const std::string &path) {
  RunConfig cfg = LoadRunConfig(path);
  ApplySeedOverride(cfg);
  return cfg;
}

std::vector<ManifestEntry> SplitOf(const std::vector<ManifestEntry> &entries,
                                   const std::string &split) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry &e : entries)
    if (e.split == split) out.push_back(e);
  RASO_CHECK(!out.empty(), "manifest has no clips in the " + split + " split");
  return out;
}

// Reads and analyzes every listed clip, in manifest order.
std::vector<TrainExample> ExamplesOf(const std::vector<ManifestEntry> &entries) {
  std::vector<SynthClip> clips;
  clips.reserve(entries.size());
  for (const ManifestEntry &e : entries) {
    SynthClip c;
    c.clip = ReadWav(e.clip_path);
    c.sex = e.sex;
    c.transcript = e.transcript;
    clips.push_back(std::move(c));
  }
  return PrepareExamples(clips);
}

ProxyConvClassifier LoadClassifierFile(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  RASO_CHECK(f.good(), "cannot open classifier file: " + path);
  ProxyConvClassifier net = ProxyConvClassifier::Make(1);
  net.param_set.Load(f);
  RASO_CHECK(f.good(), "truncated classifier file: " + path);
  net.trainable = false;
  return net;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void CmdPrepareSynth(const std::string &config_path, std::string out_dir,
                     std::ostream &out) {
  const RunConfig cfg = LoadConfigWithOverride(config_path);
  const fs::path manifest_dir = fs::path(cfg.manifest_path).parent_path();
  if (out_dir.empty()) out_dir = (manifest_dir / "wavs").string();
  EnsureDir(out_dir);
  if (!manifest_dir.empty()) EnsureDir(manifest_dir.string());

  const std::vector<SynthClip> clips = SynthCorpus(cfg.synth);

  // Deterministic splits, balanced per class: each class contributes about
  // 20% eval and 10% valid, with at least one clip apiece.
  int counted[2] = {0, 0};
  for (const SynthClip &c : clips) counted[c.sex]++;
  const auto split_for = [&](int sex, int index_in_class) {
    const int n = counted[sex];
    const int n_eval = std::max(1, static_cast<int>(std::llround(0.2 * n)));
    const int n_valid = std::max(1, static_cast<int>(std::llround(0.1 * n)));
    RASO_CHECK(n - n_eval - n_valid >= 1,
               "synth corpus too small to split three ways");
    if (index_in_class < n_eval) return "eval";
    if (index_in_class < n_eval + n_valid) return "valid";
    return "train";
  };

  std::vector<ManifestEntry> entries;
  entries.reserve(clips.size());
  int seen[2] = {0, 0};
  for (size_t i = 0; i < clips.size(); i++) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%05zu.wav", i);
    WriteWavAtomic((fs::path(out_dir) / name).string(), clips[i].clip);

    ManifestEntry e;
    // Stored relative to the manifest, so the corpus directory can move.
    e.clip_path =
        fs::relative(fs::path(out_dir) / name, manifest_dir.empty()
                                                   ? fs::path(".")
                                                   : manifest_dir)
            .string();
    e.speaker_id = "spk" + std::to_string(i);
    e.sex = clips[i].sex;
    e.split = split_for(clips[i].sex, seen[clips[i].sex]++);
    e.transcript = clips[i].transcript;
    entries.push_back(std::move(e));
  }
  SaveManifest(cfg.manifest_path, entries);

  out << "wrote " << clips.size() << " clips to " << out_dir << "\n";
  LoadManifest(cfg.manifest_path, true, &out);
}

void CmdTrain(const std::string &config_path, std::ostream &out) {
  const RunConfig cfg = LoadConfigWithOverride(config_path);
  const std::vector<ManifestEntry> manifest =
      LoadManifest(cfg.manifest_path, true, &out);
  const std::vector<ManifestEntry> train_entries = SplitOf(manifest, "train");
  const std::vector<ManifestEntry> valid_entries = SplitOf(manifest, "valid");

  out << "analyzing " << train_entries.size() + valid_entries.size()
      << " clips\n";
  const std::vector<TrainExample> train_ex = ExamplesOf(train_entries);
  const std::vector<TrainExample> valid_ex = ExamplesOf(valid_entries);

  // The frozen attribute oracle the generator trains against: a proxy
  // classifier fitted to the raw train split.
  std::vector<const MelSpectrogram *> mels;
  std::vector<int> labels;
  for (const TrainExample &e : train_ex) {
    mels.push_back(&e.mel);
    labels.push_back(e.label);
  }
  out << "fitting the proxy sex classifier (" << kProxyEpochs << " epochs)\n";
  const ProxyConvClassifier classifier = TrainProxyClassifier(
      mels, labels, kProxyEpochs, cfg.training.seed ^ kClassifierSalt);

  // Sex-balance the train split by minority oversampling, then let the
  // fitting loop shuffle the expanded corpus; the validation share is sized
  // to the manifest's valid split.
  std::vector<int> sexes;
  for (const TrainExample &e : train_ex) sexes.push_back(e.label);
  const auto plan = BalancedBatches(sexes, cfg.training.batch_size,
                                    cfg.training.seed ^ kBalanceSalt);
  std::vector<TrainExample> corpus;
  for (const auto &batch : plan)
    for (size_t idx : batch) corpus.push_back(train_ex[idx]);
  const size_t n_balanced = corpus.size();
  corpus.insert(corpus.end(), valid_ex.begin(), valid_ex.end());
  const real valid_fraction =
      static_cast<real>(valid_ex.size()) / static_cast<real>(corpus.size());
  out << "training on " << n_balanced << " balanced clips ("
      << train_ex.size() << " unique), validating on " << valid_ex.size()
      << "\n";

  MfccFeatureExtractor extractor;
  const TrainState fitted =
      Fit(cfg.training, corpus, valid_fraction, classifier, extractor, &out);

  EnsureDir(cfg.checkpoint_dir);
  const std::string ckpt_path =
      (fs::path(cfg.checkpoint_dir) / kCheckpointFile).string();
  SaveCheckpoint(ckpt_path, fitted);
  std::ostringstream blob;
  classifier.param_set.Save(blob, false);
  WriteFileAtomic((fs::path(cfg.checkpoint_dir) / kClassifierFile).string(),
                  blob.str());
  out << "checkpoint: " << ckpt_path << "\n";
}

void CmdConvert(const std::string &ckpt_path, const std::string &in_path,
                const std::string &out_path, const std::string &sex_flag,
                int invert_iterations, std::ostream &out) {
  const TrainState state = LoadCheckpoint(ckpt_path);
  const AudioClip input = ReadWav(in_path);
  const MelSpectrogram mel = ComputeMel(input);
  const PitchTrack pitch = EstimateF0(input);

  // The modulation branch is conditioned on the source sex.  Without a label
  // we fall back to a pitch threshold at the checkpoint's neutral mean.
  int label = 0;
  if (sex_flag == "M") {
    label = 0;
  } else if (sex_flag == "F") {
    label = 1;
  } else {
    std::vector<const PitchTrack *> one = {&pitch};
    const real mean_f0 = BatchMeanF0(one);
    RASO_CHECK(mean_f0 > 0.0,
               "no voiced frames in " + in_path +
                   "; pass --sex M or --sex F explicitly");
    label = mean_f0 >= state.neutral.mu_neutral_hz ? 1 : 0;
  }

  BatchView batch;
  batch.mels = {&mel};
  batch.labels = {label};
  batch.pitches = {&pitch};
  const std::vector<MelSpectrogram> converted =
      GenerateBatch(state.generator, batch, state.neutral.mu_neutral_hz,
                    StyleChoice::kNeutral);
  const AudioClip obfuscated = InvertMel(converted[0], invert_iterations);
  WriteWavAtomic(out_path, obfuscated);

  out << "wrote " << out_path << " ("
      << static_cast<real>(obfuscated.samples.size()) / kSampleRateHz
      << " s, source sex " << (label == 0 ? "M" : "F")
      << (sex_flag == "auto" ? " by pitch)" : ")") << "\n";
}

void CmdEvaluate(const std::string &config_path, std::string ckpt_path,
                 int finetune_epochs, int invert_iterations,
                 std::ostream &out) {
  const RunConfig cfg = LoadConfigWithOverride(config_path);
  if (ckpt_path.empty())
    ckpt_path = (fs::path(cfg.checkpoint_dir) / kCheckpointFile).string();
  const TrainState state = LoadCheckpoint(ckpt_path);
  const ProxyConvClassifier classifier = LoadClassifierFile(
      (fs::path(cfg.checkpoint_dir) / kClassifierFile).string());

  const std::vector<ManifestEntry> manifest =
      LoadManifest(cfg.manifest_path, true, &out);
  const std::vector<ManifestEntry> train_entries = SplitOf(manifest, "train");
  const std::vector<ManifestEntry> eval_entries = SplitOf(manifest, "eval");
  for (const ManifestEntry &e : train_entries)
    RASO_CHECK(!e.transcript.empty(),
               "evaluation needs transcripts; none on " + e.clip_path);
  for (const ManifestEntry &e : eval_entries)
    RASO_CHECK(!e.transcript.empty(),
               "evaluation needs transcripts; none on " + e.clip_path);

  out << "analyzing " << train_entries.size() + eval_entries.size()
      << " clips\n";
  const std::vector<TrainExample> train_ex = ExamplesOf(train_entries);
  const std::vector<TrainExample> eval_ex = ExamplesOf(eval_entries);
  out << "converting with " << ckpt_path << "\n";
  const std::vector<MelSpectrogram> obf_train =
      ConvertExamples(state, train_ex, cfg.training.batch_size);
  const std::vector<MelSpectrogram> obf_eval =
      ConvertExamples(state, eval_ex, cfg.training.batch_size);

  const auto pool_of = [](const std::vector<ManifestEntry> &entries,
                          const std::vector<const MelSpectrogram *> &mels) {
    std::vector<EvalClip> pool;
    for (size_t i = 0; i < entries.size(); i++)
      pool.push_back({mels[i], entries[i].sex, entries[i].clip_path});
    return pool;
  };
  std::vector<const MelSpectrogram *> raw_eval_mels, obf_eval_mels,
      obf_train_mels, raw_train_mels;
  for (const TrainExample &e : eval_ex) raw_eval_mels.push_back(&e.mel);
  for (const MelSpectrogram &m : obf_eval) obf_eval_mels.push_back(&m);
  for (const MelSpectrogram &m : obf_train) obf_train_mels.push_back(&m);
  for (const TrainExample &e : train_ex) raw_train_mels.push_back(&e.mel);

  // Attacks on the obfuscated eval pool, with the raw-pool EER as the
  // reference point the defense is measured against.
  const AttackReport ignorant =
      IgnorantAttack(classifier, pool_of(eval_entries, obf_eval_mels));
  const AttackReport ignorant_raw =
      IgnorantAttack(classifier, pool_of(eval_entries, raw_eval_mels));
  const AttackReport semi = SemiInformedAttack(
      classifier, pool_of(train_entries, obf_train_mels),
      pool_of(eval_entries, obf_eval_mels), finetune_epochs,
      cfg.training.seed ^ kSemiSalt);

  const NeutralityReport neutrality =
      ComputeNeutralityReport(state, classifier, eval_ex, invert_iterations);

  // Utility: the template matcher fitted on raw training speech reads both
  // versions of the eval split.
  VowelRecognizer recognizer;
  std::vector<std::string> train_tx, eval_tx;
  for (const ManifestEntry &e : train_entries) train_tx.push_back(e.transcript);
  for (const ManifestEntry &e : eval_entries) eval_tx.push_back(e.transcript);
  recognizer.Fit(raw_train_mels, train_tx);
  const real wer_raw = CorpusWer(recognizer, raw_eval_mels, eval_tx);
  const real wer_obf = CorpusWer(recognizer, obf_eval_mels, eval_tx);

  nlohmann::json wer_line;
  wer_line["record"] = "wer_report";
  wer_line["wer_raw_percent"] = wer_raw;
  wer_line["wer_obfuscated_percent"] = wer_obf;
  nlohmann::json baseline_line;
  baseline_line["record"] = "baseline";
  baseline_line["ignorant_eer_raw_percent"] = ignorant_raw.eer_percent;

  std::string report_text;
  report_text += ToJsonLine(ignorant) + "\n";
  report_text += ToJsonLine(semi) + "\n";
  report_text += ToJsonLine(neutrality) + "\n";
  report_text += wer_line.dump() + "\n";
  report_text += baseline_line.dump() + "\n";

  EnsureDir(cfg.report_dir);
  const std::string report_path =
      (fs::path(cfg.report_dir) / kReportFile).string();
  WriteFileAtomic(report_path, report_text);

  out << report_text;
  out << SummaryTable(fs::path(ckpt_path).stem().string(), ignorant, wer_obf,
                      semi);
  out << "reports: " << report_path << "\n";
}

void CmdReport(const std::string &config_path, const std::string &model,
               std::ostream &out) {
  const RunConfig cfg = LoadConfigWithOverride(config_path);
  const std::string report_path =
      (fs::path(cfg.report_dir) / kReportFile).string();
  std::ifstream f(report_path);
  RASO_CHECK(f.good(), "cannot open report file: " + report_path);

  AttackReport ignorant, semi;
  bool have_ignorant = false, have_semi = false, have_wer = false;
  real wer_obf = 0;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw Error("report file " + report_path + ": " + e.what());
    }
    const std::string record = j.value("record", "");
    if (record == "attack_report") {
      AttackReport r;
      r.attack_mode = j.at("attack_mode").get<std::string>();
      r.eer_percent = j.at("eer_percent").get<real>();
      r.n_trials = j.at("n_trials").get<int64_t>();
      r.classifier_description = j.at("classifier").get<std::string>();
      if (r.attack_mode == "ignorant") {
        ignorant = r;
        have_ignorant = true;
      } else {
        semi = r;
        have_semi = true;
      }
    } else if (record == "wer_report") {
      wer_obf = j.at("wer_obfuscated_percent").get<real>();
      have_wer = true;
    }
  }
  RASO_CHECK(have_ignorant && have_semi && have_wer,
             "report file is missing attack or WER records: " + report_path);
  out << SummaryTable(model, ignorant, wer_obf, semi);
}

}  // namespace

int RunCommand(const std::vector<std::string> &args, std::ostream &out,
               std::ostream &err) {
  CLI::App app{"reference-free sex obfuscation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt_path, in_path, out_path;
  std::string sex_flag = "auto";
  std::string model = "raso";
  int invert_iterations = 60;
  int neutrality_iterations = 30;
  int finetune_epochs = 3;

  CLI::App *prepare =
      app.add_subcommand("prepare-synth", "write a synthetic corpus + manifest");
  prepare->add_option("--config", config_path, "run config (JSON)")->required();
  prepare->add_option("--out-dir", out_dir,
                      "WAV directory (default: <manifest dir>/wavs)");

  CLI::App *train =
      app.add_subcommand("train", "fit the obfuscator and write checkpoints");
  train->add_option("--config", config_path, "run config (JSON)")->required();

  CLI::App *convert = app.add_subcommand("convert", "obfuscate one WAV file");
  convert->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  convert->add_option("--in", in_path, "input WAV")->required();
  convert->add_option("--out", out_path, "output WAV")->required();
  convert->add_option("--sex", sex_flag, "source sex: M, F or auto")
      ->check(CLI::IsMember({"M", "F", "auto"}));
  convert->add_option("--iters", invert_iterations,
                      "phase reconstruction iterations");

  CLI::App *evaluate = app.add_subcommand(
      "evaluate", "run both attack modes, neutrality and WER");
  evaluate->add_option("--config", config_path, "run config (JSON)")->required();
  evaluate->add_option("--ckpt", ckpt_path,
                       "checkpoint file (default: <checkpoint_dir>/model.ckpt)");
  evaluate->add_option("--finetune-epochs", finetune_epochs,
                       "semi-informed fine-tuning epochs");
  evaluate->add_option("--invert-iters", neutrality_iterations,
                       "phase reconstruction iterations for the neutrality "
                       "report");

  CLI::App *report =
      app.add_subcommand("report", "render the summary comparison row");
  report->add_option("--config", config_path, "run config (JSON)")->required();
  report->add_option("--model", model, "row label");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError &e) {
    // --help lands here with code 0; anything else is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed()) {
      CmdPrepareSynth(config_path, out_dir, out);
    } else if (train->parsed()) {
      CmdTrain(config_path, out);
    } else if (convert->parsed()) {
      CmdConvert(ckpt_path, in_path, out_path, sex_flag, invert_iterations,
                 out);
    } else if (evaluate->parsed()) {
      CmdEvaluate(config_path, ckpt_path, finetune_epochs,
                  neutrality_iterations, out);
    } else {
      CmdReport(config_path, model, out);
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace raso
