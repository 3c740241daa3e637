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

#include "vqphone/features.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace vqphone {

namespace {
constexpr char kMagic[4] = {'V', 'Q', 'P', 'H'};
}

void save_features(const std::filesystem::path& path, const MelSpectrogram& mel) {
  const FrameParams& p = mel.params;
  if (mel.frames.cols() != p.mel_bins && mel.frames.rows() != 0) {
    throw DimensionError("save_features", 1, p.mel_bins, mel.frames.cols());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kMagic, 4);
  binary::write_u32(out, kFeatureVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(mel.frames.rows()));
  binary::write_u32(out, static_cast<std::uint32_t>(p.mel_bins));
  binary::write_u32(out, static_cast<std::uint32_t>(p.sample_rate));
  binary::write_u32(out, static_cast<std::uint32_t>(p.fft_size));
  binary::write_u32(out, static_cast<std::uint32_t>(p.hop));
  binary::write_u32(out, static_cast<std::uint32_t>(p.window));
  binary::write_u32(out, static_cast<std::uint32_t>(p.mel_bins));
  binary::write_f64(out, p.fmin);
  binary::write_f64(out, p.fmax);
  binary::write_f64(out, p.log_floor);
  binary::write_string(out, mel.utterance_id);
  for (Index i = 0; i < mel.frames.size(); ++i) binary::write_f64(out, mel.frames.data()[i]);
  if (!out) throw FormatError("failed writing " + path.string());
}

MelSpectrogram load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  binary::read_exact(in, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(path.string() + ": bad magic, not a VQPH feature file");
  }
  const std::uint32_t version = binary::read_u32(in, "version");
  if (version != kFeatureVersion) {
    throw FormatError(path.string() + ": unsupported feature version " + std::to_string(version) +
                      " (expected " + std::to_string(kFeatureVersion) + ")");
  }
  const std::uint32_t frames = binary::read_u32(in, "frame count");
  const std::uint32_t bins = binary::read_u32(in, "bin count");
  MelSpectrogram mel;
  FrameParams& p = mel.params;
  p.sample_rate = static_cast<int>(binary::read_u32(in, "params"));
  p.fft_size = static_cast<int>(binary::read_u32(in, "params"));
  p.hop = static_cast<int>(binary::read_u32(in, "params"));
  p.window = static_cast<int>(binary::read_u32(in, "params"));
  p.mel_bins = static_cast<int>(binary::read_u32(in, "params"));
  p.fmin = binary::read_f64(in, "params");
  p.fmax = binary::read_f64(in, "params");
  p.log_floor = binary::read_f64(in, "params");
  if (static_cast<std::uint32_t>(p.mel_bins) != bins) {
    throw FormatError(path.string() + ": bin count disagrees with params block");
  }
  mel.utterance_id = binary::read_string(in, "utterance id");
  mel.frames.resize(frames, bins);
  for (Index i = 0; i < mel.frames.size(); ++i) mel.frames.data()[i] = binary::read_f64(in, "frames");
  return mel;
}

bool is_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::equal(magic, magic + 4, kMagic);
}

}  // namespace vqphone
