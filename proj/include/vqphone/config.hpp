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

// Run configuration: one human-editable file with [frontend], [network],
// [train] and [paths] sections of key = value lines. Every key has a default;
// unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqphone/frontend.hpp"
#include "vqphone/networks.hpp"
#include "vqphone/vq.hpp"

namespace vqphone {

enum class ReconLoss { L1, L2 };

struct TrainConfig {
  int codebook_size = 256;
  CodebookInit codebook_init = CodebookInit::Uniform;
  double lambda_gp = 10.0;
  int n_critic = 5;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  ReconLoss recon_loss = ReconLoss::L1;
  double w_codebook = 1.0;
  double w_commit = 1.0;
  double w_adv = 0.01;
  int batch_size = 8;
  int crop_frames = 64;
  int max_steps = 10000;
  std::uint64_t seed = 1;
  double fd_epsilon = 1e-3;
  int fd_directions = 4;
  int checkpoint_every = 1000;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Config {
  FrameParams frontend;
  NetworkConfig network;
  TrainConfig train;
  std::string manifest;
  std::string output_dir;

  void validate() const;
};

// "section.key" -> value text, in a fixed order.
std::vector<std::pair<std::string, std::string>> flatten_config(const Config& cfg);
// Sets one "section.key"; throws ConfigError for unknown keys or bad values.
void set_config_value(Config& cfg, const std::string& dotted_key, const std::string& value);

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
std::string format_config(const Config& cfg);
void save_config(const std::filesystem::path& path, const Config& cfg);

// "key: a=<x> b=<y>" lines for every differing key whose section is listed.
std::vector<std::string> config_diff(const Config& a, const Config& b,
                                     const std::vector<std::string>& sections);

}  // namespace vqphone
