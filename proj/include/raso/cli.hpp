// raso/cli.hpp

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

#ifndef RASO_CLI_HPP_
#define RASO_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace raso {

// Command dispatcher behind the `raso` binary.  `args` is argv without the
// program name.  Subcommands:
//
//   prepare-synth  --config C [--out-dir D]   write a synthetic corpus + manifest
//   train          --config C                 fit the obfuscator, write checkpoints
//   convert        --ckpt K --in A --out B    obfuscate one WAV file
//   evaluate       --config C [--ckpt K]      run both attacks, neutrality and WER
//   report         --config C [--model NAME]  render the summary comparison row
//
// The environment variable RASO_SEED, when set, overrides the training and
// synthesis seeds of any loaded run config.  Outputs are written atomically,
// so re-running a successful command just replaces its results; inputs are
// never modified.  Returns 0 on success, 1 on a usage error (with help text
// on `err`) and 2 on a runtime failure (with a diagnostic on `err`).
int RunCommand(const std::vector<std::string> &args, std::ostream &out,
               std::ostream &err);

}  // namespace raso

#endif  // RASO_CLI_HPP_
