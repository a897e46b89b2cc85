// raso/manifest.hpp

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

#ifndef RASO_MANIFEST_HPP_
#define RASO_MANIFEST_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "raso/signal.hpp"
#include "raso/training.hpp"

namespace raso {

// One corpus clip as declared in a JSON-lines manifest.  A manifest line is a
// single object with fields clip_path, speaker_id, sex ("M"/"F"), split
// ("train"/"valid"/"eval") and an optional transcript.
struct ManifestEntry {
  std::string clip_path;
  std::string speaker_id;
  int sex = 0;             // 0 = male ("M"), 1 = female ("F")
  std::string split;
  std::string transcript;  // empty when the manifest omits it
};

// Parses and validates a manifest.  Relative clip paths are resolved against
// the manifest's own directory, so a corpus directory can move as a unit.
// Malformed lines are reported with their 1-based line number; a clip path
// appearing twice anywhere is refused (splits must be disjoint).  When
// `check_clip_paths` is set, every resolved path must exist.  Per-(sex,
// split) counts are written to `log` when given.
std::vector<ManifestEntry> LoadManifest(const std::string &path,
                                        bool check_clip_paths = true,
                                        std::ostream *log = nullptr);

// One JSON object per line, fields as above; paths are written exactly as
// stored.  The file is replaced atomically (temporary sibling + rename).
void SaveManifest(const std::string &path,
                  const std::vector<ManifestEntry> &entries);

// Everything one run needs: the training hyperparameters, the synthetic
// corpus recipe, and where the manifest, checkpoints and reports live.  The
// on-disk form is a single JSON object with keys "manifest",
// "checkpoint_dir", "report_dir", "training" and "synth"; omitted keys keep
// their defaults and unknown keys are errors.
struct RunConfig {
  TrainingConfig training;
  SynthCorpusConfig synth;
  std::string manifest_path = "manifest.jsonl";
  std::string checkpoint_dir = "checkpoints";
  std::string report_dir = "reports";

  void Validate() const;
};

RunConfig ParseRunConfig(const std::string &json_text);
std::string FormatRunConfig(const RunConfig &cfg);
// The file variants resolve relative paths against the config's directory
// (load) and write atomically (save).
RunConfig LoadRunConfig(const std::string &path);
void SaveRunConfig(const std::string &path, const RunConfig &cfg);

// Sex-balanced batch plan over a labeled corpus: every batch holds an equal
// count per sex (off by at most one when batch_size is odd, the extra slot
// alternating between classes), batches are full-sized, and enough batches
// are emitted for every majority-class index to appear at least once; the
// minority class is oversampled by cycling its shuffled order.  Same seed,
// same plan.  Errors when batch_size < 2, a label is not 0/1, or either sex
// is absent.
std::vector<std::vector<size_t>> BalancedBatches(const std::vector<int> &sexes,
                                                 int batch_size,
                                                 uint64_t seed);

}  // namespace raso

#endif  // RASO_MANIFEST_HPP_
