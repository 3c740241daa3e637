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

#include "vqphone/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "vqphone/trainer.hpp"

namespace vqphone {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'C', 'K'};

void write_adam(std::ostream& out, const AdamState& s) {
  binary::write_f64(out, s.options.lr);
  binary::write_f64(out, s.options.beta1);
  binary::write_f64(out, s.options.beta2);
  binary::write_f64(out, s.options.epsilon);
  binary::write_u64(out, static_cast<std::uint64_t>(s.step));
  binary::write_u32(out, static_cast<std::uint32_t>(s.first_moment.size()));
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    binary::write_u64(out, static_cast<std::uint64_t>(s.first_moment[i].size()));
    for (Index j = 0; j < s.first_moment[i].size(); ++j) binary::write_f64(out, s.first_moment[i][j]);
    for (Index j = 0; j < s.second_moment[i].size(); ++j) binary::write_f64(out, s.second_moment[i][j]);
  }
}

AdamState read_adam(std::istream& in) {
  AdamState s;
  s.options.lr = binary::read_f64(in, "optimizer");
  s.options.beta1 = binary::read_f64(in, "optimizer");
  s.options.beta2 = binary::read_f64(in, "optimizer");
  s.options.epsilon = binary::read_f64(in, "optimizer");
  s.step = static_cast<std::int64_t>(binary::read_u64(in, "optimizer"));
  const std::uint32_t count = binary::read_u32(in, "optimizer");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto n = static_cast<Index>(binary::read_u64(in, "optimizer"));
    if (n < 0 || n > (Index{1} << 32)) throw FormatError("implausible optimizer buffer size");
    VectorXd m(n), v(n);
    for (Index j = 0; j < n; ++j) m[j] = binary::read_f64(in, "optimizer");
    for (Index j = 0; j < n; ++j) v[j] = binary::read_f64(in, "optimizer");
    s.first_moment.push_back(std::move(m));
    s.second_moment.push_back(std::move(v));
  }
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kMagic, 4);
  binary::write_u32(out, kCheckpointVersion);
  binary::write_string(out, data.config_text);
  binary::write_u64(out, static_cast<std::uint64_t>(data.step));
  binary::write_string(out, data.rng_state);
  binary::write_u32(out, static_cast<std::uint32_t>(data.speakers.size()));
  for (const auto& s : data.speakers) binary::write_string(out, s);
  binary::write_u32(out, static_cast<std::uint32_t>(data.parameters.size()));
  for (const auto& p : data.parameters) {
    binary::write_string(out, p.name);
    binary::write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (Index d : p.shape) binary::write_u64(out, static_cast<std::uint64_t>(d));
    for (Index j = 0; j < p.values.size(); ++j) binary::write_f64(out, p.values[j]);
  }
  write_adam(out, data.generator_optimizer);
  write_adam(out, data.discriminator_optimizer);
  if (!out) throw FormatError("failed writing " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[4];
  binary::read_exact(in, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(path.string() + ": bad magic, not a VQCK checkpoint");
  }
  const std::uint32_t version = binary::read_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  data.config_text = binary::read_string(in, "config");
  data.step = static_cast<std::int64_t>(binary::read_u64(in, "step"));
  data.rng_state = binary::read_string(in, "rng state");
  const std::uint32_t speakers = binary::read_u32(in, "speakers");
  for (std::uint32_t i = 0; i < speakers; ++i) data.speakers.push_back(binary::read_string(in, "speaker"));
  const std::uint32_t count = binary::read_u32(in, "parameters");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = binary::read_string(in, "parameter name");
    const std::uint32_t rank = binary::read_u32(in, "parameter rank");
    if (rank > 8) throw FormatError("implausible parameter rank for " + t.name);
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<Index>(binary::read_u64(in, "parameter shape")));
    }
    const Index n = shape_numel(t.shape);
    if (n < 0 || n > (Index{1} << 32)) throw FormatError("implausible parameter size for " + t.name);
    t.values.resize(n);
    for (Index j = 0; j < n; ++j) t.values[j] = binary::read_f64(in, "parameter values");
    data.parameters.push_back(std::move(t));
  }
  data.generator_optimizer = read_adam(in);
  data.discriminator_optimizer = read_adam(in);
  return data;
}

std::vector<StoredTensor> snapshot_parameters(const ParameterList& params) {
  std::vector<StoredTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.tensor.shape(), p.tensor.data()});
  return out;
}

void assign_parameters(const ParameterList& params, const std::vector<StoredTensor>& stored) {
  if (params.size() != stored.size()) {
    throw FormatError("checkpoint holds " + std::to_string(stored.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != stored[i].name || params[i].tensor.shape() != stored[i].shape) {
      throw FormatError("checkpoint parameter " + std::to_string(i) + " is " + stored[i].name + " " +
                        shape_to_string(stored[i].shape) + ", model expects " + params[i].name +
                        " " + shape_to_string(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    t.data() = stored[i].values;
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  LoadedModel loaded;
  loaded.config = parse_config(data.config_text);
  loaded.config.validate();
  loaded.step = data.step;
  loaded.models = std::make_unique<Models>(loaded.config.network, data.speakers,
                                           loaded.config.train.codebook_size, loaded.config.train.seed);
  assign_parameters(loaded.models->all_parameters(), data.parameters);
  return loaded;
}

}  // namespace vqphone
