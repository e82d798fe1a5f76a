// Copyright 2026 The segbank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "segbank/bankbuild.h"
#include "segbank/inference.h"
#include "segbank/synth.h"

namespace segbank::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

struct BuildBankArgs {
  std::filesystem::path manifest;
  std::filesystem::path bank_out;
  std::filesystem::path log_out;    // default: <bank>.log
  std::filesystem::path index_out;  // default: <bank>.idx
  bankbuild::BuildConfig build;
  retrieval::RetrievalConfig retrieval;
};

struct InferArgs {
  std::filesystem::path manifest;
  std::filesystem::path bank;
  std::filesystem::path out_dir;
  std::filesystem::path index_file;  // optional; built from flags otherwise
  std::filesystem::path debug_log;   // optional
  inference::PipelineConfig pipeline;
  unsigned threads = 1;
};

struct EvalArgs {
  std::filesystem::path pred_dir;
  std::filesystem::path manifest;
  std::filesystem::path report_out;
};

DatasetManifest cmd_synth(const synth::SynthConfig& cfg, const std::filesystem::path& out_dir);
bankbuild::BuildResult cmd_build_bank(const BuildBankArgs& args);
void cmd_infer(const InferArgs& args);
// Returns the mean IoU; the report is written to args.report_out.
double cmd_eval(const EvalArgs& args);
std::string cmd_inspect(const std::filesystem::path& path);

// Full command-line entry point. Failures print one line
//   error: <ErrorKind>: <message>
// to `err` and return a non-zero exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace segbank::cli
