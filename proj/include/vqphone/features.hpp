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

// "VQPH" feature files. Layout (little-endian):
//   magic "VQPH" | version u32 | frames u32 | bins u32
//   params: sample_rate u32, fft_size u32, hop u32, window u32, mel_bins u32,
//           fmin f64, fmax f64, log_floor f64
//   utterance id: length u32 + UTF-8 bytes
//   frames * bins f64, row-major

#include <cstdint>
#include <filesystem>

#include "vqphone/frontend.hpp"

namespace vqphone {

inline constexpr std::uint32_t kFeatureVersion = 1;

void save_features(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram load_features(const std::filesystem::path& path);

// True when the file starts with the VQPH magic.
bool is_feature_file(const std::filesystem::path& path);

}  // namespace vqphone
