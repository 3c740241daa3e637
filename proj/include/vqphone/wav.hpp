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
#include <string>
#include <vector>

#include "vqphone/errors.hpp"

namespace vqphone {

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 24000;
};

class WavError : public Error {
 public:
  enum class Kind { Io, MalformedHeader, UnsupportedEncoding, MultiChannel };
  WavError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class WavEncoding { Pcm16, Float32 };

// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
// PCM values are scaled by 1/32768.
AudioBuffer load_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(const std::vector<char>& bytes);

// PCM16 output rounds x * 32768 to the nearest integer and clamps to the
// int16 range.
void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
               WavEncoding encoding = WavEncoding::Pcm16);
std::vector<char> encode_wav(const AudioBuffer& buffer, WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace vqphone
