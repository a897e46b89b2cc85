// src/manifest.cpp

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

#include "raso/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace raso {

namespace fs = std::filesystem;

namespace {

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

std::string LinePrefix(const std::string &path, int line_no) {
  return "manifest " + path + " line " + std::to_string(line_no) + ": ";
}

}  // namespace

std::vector<ManifestEntry> LoadManifest(const std::string &path,
                                        bool check_clip_paths,
                                        std::ostream *log) {
  std::ifstream f(path);
  RASO_CHECK(f.good(), "cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    line_no++;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw Error(LinePrefix(path, line_no) + e.what());
    }
    RASO_CHECK(j.is_object(), LinePrefix(path, line_no) + "not a JSON object");
    for (const auto &item : j.items()) {
      const std::string &key = item.key();
      RASO_CHECK(key == "clip_path" || key == "speaker_id" || key == "sex" ||
                     key == "split" || key == "transcript",
                 LinePrefix(path, line_no) + "unknown field \"" + key + "\"");
    }

    ManifestEntry entry;
    const auto want_string = [&](const char *key) {
      RASO_CHECK(j.contains(key) && j.at(key).is_string(),
                 LinePrefix(path, line_no) + "field \"" + key +
                     "\" must be a string");
      return j.at(key).get<std::string>();
    };
    entry.clip_path = want_string("clip_path");
    RASO_CHECK(!entry.clip_path.empty(),
               LinePrefix(path, line_no) + "clip_path is empty");
    entry.speaker_id = want_string("speaker_id");

    const std::string sex = want_string("sex");
    RASO_CHECK(sex == "M" || sex == "F",
               LinePrefix(path, line_no) + "sex must be \"M\" or \"F\", got \"" +
                   sex + "\"");
    entry.sex = sex == "M" ? 0 : 1;

    entry.split = want_string("split");
    RASO_CHECK(
        entry.split == "train" || entry.split == "valid" ||
            entry.split == "eval",
        LinePrefix(path, line_no) + "split must be train, valid or eval");

    if (j.contains("transcript")) entry.transcript = want_string("transcript");

    fs::path clip(entry.clip_path);
    if (clip.is_relative()) clip = base / clip;
    entry.clip_path = clip.lexically_normal().string();

    RASO_CHECK(seen.insert(entry.clip_path).second,
               LinePrefix(path, line_no) + "duplicate clip: " + entry.clip_path);
    if (check_clip_paths)
      RASO_CHECK(fs::exists(entry.clip_path),
                 LinePrefix(path, line_no) +
                     "missing clip file: " + entry.clip_path);
    entries.push_back(std::move(entry));
  }
  RASO_CHECK(!entries.empty(), "manifest is empty: " + path);

  if (log) {
    const char *splits[] = {"train", "valid", "eval"};
    *log << "manifest " << path << ":";
    for (const char *split : splits) {
      int64_t m = 0, w = 0;
      for (const ManifestEntry &e : entries)
        if (e.split == split) (e.sex == 0 ? m : w)++;
      *log << " " << split << " M=" << m << " F=" << w;
    }
    *log << "\n";
  }
  return entries;
}

void SaveManifest(const std::string &path,
                  const std::vector<ManifestEntry> &entries) {
  std::string out;
  for (const ManifestEntry &e : entries) {
    RASO_CHECK(!e.clip_path.empty(), "manifest entry has an empty clip_path");
    RASO_CHECK(e.sex == 0 || e.sex == 1, "manifest entry sex must be 0 or 1");
    RASO_CHECK(e.split == "train" || e.split == "valid" || e.split == "eval",
               "manifest entry split must be train, valid or eval");
    nlohmann::json j;
    j["clip_path"] = e.clip_path;
    j["speaker_id"] = e.speaker_id;
    j["sex"] = e.sex == 0 ? "M" : "F";
    j["split"] = e.split;
    if (!e.transcript.empty()) j["transcript"] = e.transcript;
    out += j.dump();
    out += '\n';
  }
  WriteFileAtomic(path, out);
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

void RunConfig::Validate() const {
  training.Validate();
  RASO_CHECK(synth.n_clips > 0 && synth.n_clips % 2 == 0,
             "synth n_clips must be positive and even");
  RASO_CHECK(synth.clip_seconds > 0.0, "synth clip_seconds must be positive");
  for (int c = 0; c < 2; c++) {
    RASO_CHECK(synth.class_f0_mean_hz[static_cast<size_t>(c)] > 0.0,
               "synth class F0 means must be positive");
    RASO_CHECK(synth.class_f0_std_hz[static_cast<size_t>(c)] >= 0.0,
               "synth class F0 spreads must be non-negative");
  }
  RASO_CHECK(!manifest_path.empty(), "manifest path is empty");
  RASO_CHECK(!checkpoint_dir.empty(), "checkpoint directory is empty");
  RASO_CHECK(!report_dir.empty(), "report directory is empty");
}

namespace {

// The "training" block reuses the flat key=value codec of TrainingConfig, so
// both file formats accept exactly the same keys.
TrainingConfig TrainingFromJson(const nlohmann::json &j) {
  RASO_CHECK(j.is_object(), "run config: \"training\" must be an object");
  std::string text;
  for (const auto &item : j.items()) {
    text += item.key();
    text += " = ";
    text += item.value().is_string() ? item.value().get<std::string>()
                                     : item.value().dump();
    text += '\n';
  }
  return ParseTrainingConfig(text);
}

nlohmann::json TrainingToJson(const TrainingConfig &cfg) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream lines(FormatTrainingConfig(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string &s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    j[key] = std::stod(value);
  }
  return j;
}

SynthCorpusConfig SynthFromJson(const nlohmann::json &j) {
  RASO_CHECK(j.is_object(), "run config: \"synth\" must be an object");
  SynthCorpusConfig cfg;
  const auto pair_of = [](const nlohmann::json &v, std::array<real, 2> &out,
                          const char *key) {
    RASO_CHECK(v.is_array() && v.size() == 2,
               std::string("run config: synth ") + key +
                   " must be a two-element array");
    out = {v[0].get<real>(), v[1].get<real>()};
  };
  for (const auto &item : j.items()) {
    const std::string &key = item.key();
    const nlohmann::json &v = item.value();
    if (key == "n_clips") {
      cfg.n_clips = v.get<int>();
    } else if (key == "clip_seconds") {
      cfg.clip_seconds = v.get<real>();
    } else if (key == "seed") {
      cfg.seed = v.get<uint64_t>();
    } else if (key == "class_f0_mean_hz") {
      pair_of(v, cfg.class_f0_mean_hz, key.c_str());
    } else if (key == "class_f0_std_hz") {
      pair_of(v, cfg.class_f0_std_hz, key.c_str());
    } else if (key == "class_formant_offsets_hz") {
      RASO_CHECK(v.is_array() && v.size() == 2 && v[0].is_array() &&
                     v[1].is_array() && v[0].size() == 3 && v[1].size() == 3,
                 "run config: synth class_formant_offsets_hz must be two "
                 "three-element arrays");
      for (size_t c = 0; c < 2; c++)
        for (size_t k = 0; k < 3; k++)
          cfg.class_formant_offsets_hz[c][k] = v[c][k].get<real>();
    } else {
      throw Error("run config: unknown synth key \"" + key + "\"");
    }
  }
  return cfg;
}

nlohmann::json SynthToJson(const SynthCorpusConfig &cfg) {
  nlohmann::json j;
  j["n_clips"] = cfg.n_clips;
  j["clip_seconds"] = cfg.clip_seconds;
  j["seed"] = cfg.seed;
  j["class_f0_mean_hz"] = cfg.class_f0_mean_hz;
  j["class_f0_std_hz"] = cfg.class_f0_std_hz;
  j["class_formant_offsets_hz"] = cfg.class_formant_offsets_hz;
  return j;
}

}  // namespace

RunConfig ParseRunConfig(const std::string &json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception &e) {
    throw Error(std::string("run config: ") + e.what());
  }
  RASO_CHECK(j.is_object(), "run config: top level must be a JSON object");

  RunConfig cfg;
  for (const auto &item : j.items()) {
    const std::string &key = item.key();
    const nlohmann::json &v = item.value();
    if (key == "manifest") {
      cfg.manifest_path = v.get<std::string>();
    } else if (key == "checkpoint_dir") {
      cfg.checkpoint_dir = v.get<std::string>();
    } else if (key == "report_dir") {
      cfg.report_dir = v.get<std::string>();
    } else if (key == "training") {
      cfg.training = TrainingFromJson(v);
    } else if (key == "synth") {
      cfg.synth = SynthFromJson(v);
    } else {
      throw Error("run config: unknown key \"" + key + "\"");
    }
  }
  cfg.Validate();
  return cfg;
}

std::string FormatRunConfig(const RunConfig &cfg) {
  nlohmann::json j;
  j["manifest"] = cfg.manifest_path;
  j["checkpoint_dir"] = cfg.checkpoint_dir;
  j["report_dir"] = cfg.report_dir;
  j["training"] = TrainingToJson(cfg.training);
  j["synth"] = SynthToJson(cfg.synth);
  return j.dump(2) + "\n";
}

RunConfig LoadRunConfig(const std::string &path) {
  std::ifstream f(path);
  RASO_CHECK(f.good(), "cannot open run config: " + path);
  std::ostringstream text;
  text << f.rdbuf();
  RunConfig cfg = ParseRunConfig(text.str());

  // Paths travel with their config file.
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](std::string &p) {
    fs::path fp(p);
    if (fp.is_relative()) p = (base / fp).lexically_normal().string();
  };
  resolve(cfg.manifest_path);
  resolve(cfg.checkpoint_dir);
  resolve(cfg.report_dir);
  return cfg;
}

void SaveRunConfig(const std::string &path, const RunConfig &cfg) {
  cfg.Validate();
  WriteFileAtomic(path, FormatRunConfig(cfg));
}

// ---------------------------------------------------------------------------
// balanced batching
// ---------------------------------------------------------------------------

std::vector<std::vector<size_t>> BalancedBatches(const std::vector<int> &sexes,
                                                 int batch_size,
                                                 uint64_t seed) {
  RASO_CHECK(batch_size >= 2, "balanced batches need a batch size of at least two");
  std::vector<size_t> pools[2];
  for (size_t i = 0; i < sexes.size(); i++) {
    RASO_CHECK(sexes[i] == 0 || sexes[i] == 1, "sex label must be 0 or 1");
    pools[sexes[i]].push_back(i);
  }
  RASO_CHECK(!pools[0].empty() && !pools[1].empty(),
             "balanced batches need both sexes present");

  Rng rng(seed);
  Shuffle(pools[0], rng);
  Shuffle(pools[1], rng);

  // Enough half-batches to walk through the larger class once; the smaller
  // class cycles (minority oversampling).
  const size_t majority = std::max(pools[0].size(), pools[1].size());
  const size_t half = static_cast<size_t>(batch_size) / 2;
  const size_t n_batches = (majority + half - 1) / half;
  const bool odd = batch_size % 2 != 0;

  size_t cursor[2] = {0, 0};
  const auto take = [&](int sex, size_t n, std::vector<size_t> &batch) {
    for (size_t i = 0; i < n; i++) {
      batch.push_back(pools[sex][cursor[sex]]);
      cursor[sex] = (cursor[sex] + 1) % pools[sex].size();
    }
  };

  std::vector<std::vector<size_t>> batches;
  batches.reserve(n_batches);
  for (size_t b = 0; b < n_batches; b++) {
    std::vector<size_t> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    // For odd sizes the unpaired slot alternates between the classes.
    const size_t extra_sex = b % 2;
    take(0, half + (odd && extra_sex == 0 ? 1 : 0), batch);
    take(1, half + (odd && extra_sex == 1 ? 1 : 0), batch);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace raso
