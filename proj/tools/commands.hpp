// Copyright 2026 The vqphone Authors
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
#include <optional>
#include <string>
#include <vector>

#include "vqphone/config.hpp"

namespace vqphone::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kInternalError = 2 };

// Flags shared by every subcommand.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // "section.key=value"
};

// File values first, then --set overrides, then --seed / --out.
Config effective_config(const CommonOptions& common);

struct FeaturizeOptions {
  std::vector<std::string> inputs;
  std::string speaker;
};
int cmd_featurize(const CommonOptions& common, const FeaturizeOptions& opts);

struct TrainOptions {
  std::string manifest;
  std::string resume;
};
int cmd_train(const CommonOptions& common, const TrainOptions& opts);

struct TokenizeOptions {
  std::string checkpoint;
  std::vector<std::string> inputs;
};
int cmd_tokenize(const CommonOptions& common, const TokenizeOptions& opts);

struct ReconstructOptions {
  std::string checkpoint;
  std::string input;
  std::string speaker;
  bool write_wav = false;
  int griffin_lim_iterations = 32;
};
int cmd_reconstruct(const CommonOptions& common, const ReconstructOptions& opts);

struct StatsOptions {
  std::vector<std::string> inputs;
};
int cmd_stats(const CommonOptions& common, const StatsOptions& opts);

struct IpaOptions {
  std::string input;  // "-" or empty reads stdin
  std::string table;
};
int cmd_ipa(const CommonOptions& common, const IpaOptions& opts);

}  // namespace vqphone::cli
