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

// ResNet encoder, decoder and discriminator over B x C x T mel tensors, plus
// the trainable speaker-code table that conditions the decoder.
//
// Residual block: conv(k) -> layer norm -> activation -> conv(k) -> layer norm,
// added to a shortcut (1x1 projection when the channel count changes). With
// GLU activation the first conv produces twice the block's output channels.
// Each res-layer is `blocks_per_layer` blocks; its first block carries the
// channel change.

#include <string>
#include <utility>
#include <vector>

#include "vqphone/errors.hpp"
#include "vqphone/random.hpp"
#include "vqphone/tensor.hpp"

namespace vqphone {

struct NetworkConfig {
  int mel_bins = 80;
  std::vector<int> encoder_channels{256, 128, 128, 128};
  int latent_dim = 128;
  std::vector<int> decoder_channels{128, 128, 256, 80};
  std::vector<int> discriminator_channels{256, 128, 64, 32};
  int speaker_dim = 128;
  int blocks_per_layer = 3;
  int kernel_size = 3;
  int encoder_out_kernel = 1;
  int decoder_post_kernel = 3;
  int decoder_out_kernel = 1;
  int discriminator_out_kernel = 1;
  double leaky_slope = 0.2;
  // Zero every residual-block conv so each block reduces to its shortcut.
  bool zero_init_residual = false;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;

  // Width-reduced variant (8/4/4/4 res-layers, 4-dim latent and speaker code)
  // for gradient checks.
  static NetworkConfig shrunken(int mel_bins);
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;
using ParameterManifest = std::vector<std::pair<std::string, Shape>>;
// Shapes of intermediate outputs, recorded in evaluation order.
using LayerTrace = std::vector<std::pair<std::string, Shape>>;

ParameterManifest parameter_manifest(const ParameterList& params);
Index parameter_count(const ParameterList& params);
std::vector<Tensor> tensors_of(const ParameterList& params);

class UnknownSpeakerError : public Error {
 public:
  using Error::Error;
};

enum class Activation { LeakyRelu, Glu };

class Conv1dLayer {
 public:
  Conv1dLayer(int in_channels, int out_channels, int kernel, Rng& rng, bool zero_weight = false,
              double slope = 0.2);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  Tensor bias;
};

class LayerNormLayer {
 public:
  explicit LayerNormLayer(int channels);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor gamma;
  Tensor beta;
};

class ResidualBlock {
 public:
  ResidualBlock(int in_channels, int out_channels, int kernel, Activation activation, double slope,
                Rng& rng, bool zero_init);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Activation activation_;
  double slope_;
  Conv1dLayer conv1_;
  LayerNormLayer norm1_;
  Conv1dLayer conv2_;
  LayerNormLayer norm2_;
  std::vector<Conv1dLayer> shortcut_;  // empty or one projection
};

class ResLayer {
 public:
  ResLayer(int in_channels, int out_channels, const NetworkConfig& cfg, Activation activation,
           Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t num_blocks() const { return blocks_.size(); }

 private:
  std::vector<ResidualBlock> blocks_;
};

// B x mel_bins x T -> B x latent_dim x T. No activation or normalization after
// the final conv.
class Encoder {
 public:
  Encoder(const NetworkConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& mel, LayerTrace* trace = nullptr) const;
  ParameterList parameters() const;

 private:
  NetworkConfig cfg_;
  std::vector<ResLayer> layers_;
  Conv1dLayer out_;
};

// (B x latent_dim x T, B x speaker_dim) -> B x mel_bins x T.
// The speaker code is repeated along time, concatenated on the channel axis
// and projected back to latent_dim by a 1x1 conv. Every res-layer emits a
// 1x1-projected mel_bins skip feature; their sum feeds conv -> norm -> GLU and
// a final conv with no activation.
class Decoder {
 public:
  Decoder(const NetworkConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& z_q, const Tensor& speaker_codes,
                    LayerTrace* trace = nullptr) const;
  ParameterList parameters() const;

 private:
  NetworkConfig cfg_;
  Conv1dLayer input_proj_;
  std::vector<ResLayer> layers_;
  std::vector<Conv1dLayer> skips_;
  Conv1dLayer post_conv_;
  LayerNormLayer post_norm_;
  Conv1dLayer out_;
};

class Discriminator {
 public:
  Discriminator(const NetworkConfig& cfg, Rng& rng);
  // Per-frame critic scores, B x 1 x T.
  Tensor frame_scores(const Tensor& mel, LayerTrace* trace = nullptr) const;
  // Time-mean of frame_scores, one value per batch element (shape {B}).
  Tensor operator()(const Tensor& mel) const;
  ParameterList parameters() const;

 private:
  NetworkConfig cfg_;
  std::vector<ResLayer> layers_;
  Conv1dLayer out_;
};

// Learned speaker codes, one row per registered speaker id.
class SpeakerTable {
 public:
  SpeakerTable(std::vector<std::string> ids, int dim, Rng& rng);

  Index index_of(const std::string& id) const;  // throws UnknownSpeakerError
  // 1 x dim row for one speaker.
  Tensor embed(const std::string& id) const;
  // rows.size() x dim.
  Tensor lookup(const std::vector<Index>& rows) const;

  const std::vector<std::string>& ids() const { return ids_; }
  const Tensor& table() const { return table_; }
  int dim() const { return dim_; }
  ParameterList parameters() const;

 private:
  std::vector<std::string> ids_;
  int dim_;
  Tensor table_;
};

}  // namespace vqphone
