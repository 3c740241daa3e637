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

// "VQCK" checkpoints. Layout (little-endian):
//   magic "VQCK" | version u32
//   config echo: length u32 + text (format_config output)
//   step u64 | rng state: length u32 + text
//   speakers: count u32, then length-prefixed ids
//   parameters: count u32, then per tensor: name, rank u32, dims u64..., f64 payload
//   optimizer x2 (generator, discriminator): lr, beta1, beta2, epsilon f64,
//     step u64, buffer count u32, then per buffer: length u64, m f64..., v f64...

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vqphone/adam.hpp"
#include "vqphone/config.hpp"
#include "vqphone/networks.hpp"

namespace vqphone {

struct Models;

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  VectorXd values;
};

struct CheckpointData {
  std::string config_text;
  std::int64_t step = 0;
  std::string rng_state;
  std::vector<std::string> speakers;
  std::vector<StoredTensor> parameters;
  AdamState generator_optimizer;
  AdamState discriminator_optimizer;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

std::vector<StoredTensor> snapshot_parameters(const ParameterList& params);
// Copies stored values into `params`; names, order and shapes must match.
void assign_parameters(const ParameterList& params, const std::vector<StoredTensor>& stored);

// Inference view of a checkpoint: models rebuilt from the echoed config.
struct LoadedModel {
  Config config;
  std::int64_t step = 0;
  std::unique_ptr<Models> models;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace vqphone
