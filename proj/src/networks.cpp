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

#include "vqphone/networks.hpp"

#include <algorithm>
#include <cmath>

#include "vqphone/ops.hpp"

namespace vqphone {

void NetworkConfig::validate() const {
  auto positive = [](int v) { return v > 0; };
  if (mel_bins <= 0 || latent_dim <= 0 || speaker_dim <= 0) {
    throw ConfigError("network: mel_bins, latent_dim and speaker_dim must be positive");
  }
  if (encoder_channels.empty() || decoder_channels.empty() || discriminator_channels.empty()) {
    throw ConfigError("network: every channel plan needs at least one res-layer");
  }
  for (const auto* plan : {&encoder_channels, &decoder_channels, &discriminator_channels}) {
    if (!std::all_of(plan->begin(), plan->end(), positive)) {
      throw ConfigError("network: channel counts must be positive");
    }
  }
  if (blocks_per_layer < 1) throw ConfigError("network: blocks_per_layer must be >= 1");
  for (int k : {kernel_size, encoder_out_kernel, decoder_post_kernel, decoder_out_kernel,
                discriminator_out_kernel}) {
    if (k < 1 || k % 2 == 0) throw ConfigError("network: kernel sizes must be odd and positive");
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ConfigError("network: leaky_slope must lie in (0, 1)");
  }
}

NetworkConfig NetworkConfig::shrunken(int mel_bins) {
  NetworkConfig cfg;
  cfg.mel_bins = mel_bins;
  cfg.encoder_channels = {8, 4, 4, 4};
  cfg.latent_dim = 4;
  cfg.decoder_channels = {4, 4, 8, 4};
  cfg.discriminator_channels = {8, 4, 4, 4};
  cfg.speaker_dim = 4;
  return cfg;
}

ParameterManifest parameter_manifest(const ParameterList& params) {
  ParameterManifest manifest;
  manifest.reserve(params.size());
  for (const auto& p : params) manifest.emplace_back(p.name, p.tensor.shape());
  return manifest;
}

Index parameter_count(const ParameterList& params) {
  Index n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Conv1dLayer::Conv1dLayer(int in_channels, int out_channels, int kernel, Rng& rng, bool zero_weight,
                         double slope) {
  const Index n = static_cast<Index>(out_channels) * in_channels * kernel;
  VectorXd w = VectorXd::Zero(n);
  if (!zero_weight) {
    // Kaiming-uniform for a leaky-ReLU fan-in.
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * in_channels * kernel));
    w = uniform_vector(rng, n, -bound, bound);
  }
  weight = Tensor::from({out_channels, in_channels, kernel}, std::move(w), true);
  bias = Tensor::zeros({out_channels}, true);
}

Tensor Conv1dLayer::operator()(const Tensor& x) const { return conv1d(x, weight, bias); }

void Conv1dLayer::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNormLayer::LayerNormLayer(int channels)
    : gamma(Tensor::constant({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)) {}

Tensor LayerNormLayer::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

void LayerNormLayer::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

namespace {
int expansion(Activation a) { return a == Activation::Glu ? 2 : 1; }
}  // namespace

ResidualBlock::ResidualBlock(int in_channels, int out_channels, int kernel, Activation activation,
                             double slope, Rng& rng, bool zero_init)
    : activation_(activation),
      slope_(slope),
      conv1_(in_channels, out_channels * expansion(activation), kernel, rng, zero_init, slope),
      norm1_(out_channels * expansion(activation)),
      conv2_(out_channels, out_channels, kernel, rng, zero_init, slope),
      norm2_(out_channels) {
  if (in_channels != out_channels) shortcut_.emplace_back(in_channels, out_channels, 1, rng, false, slope);
}

Tensor ResidualBlock::operator()(const Tensor& x) const {
  Tensor h = norm1_(conv1_(x));
  h = activation_ == Activation::Glu ? glu(h) : leaky_relu(h, slope_);
  h = norm2_(conv2_(h));
  return add(h, shortcut_.empty() ? x : shortcut_.front()(x));
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) const {
  conv1_.collect(prefix + ".conv1", out);
  norm1_.collect(prefix + ".norm1", out);
  conv2_.collect(prefix + ".conv2", out);
  norm2_.collect(prefix + ".norm2", out);
  if (!shortcut_.empty()) shortcut_.front().collect(prefix + ".shortcut", out);
}

ResLayer::ResLayer(int in_channels, int out_channels, const NetworkConfig& cfg,
                   Activation activation, Rng& rng) {
  for (int b = 0; b < cfg.blocks_per_layer; ++b) {
    blocks_.emplace_back(b == 0 ? in_channels : out_channels, out_channels, cfg.kernel_size,
                         activation, cfg.leaky_slope, rng, cfg.zero_init_residual);
  }
}

Tensor ResLayer::operator()(const Tensor& x) const {
  Tensor h = x;
  for (const auto& block : blocks_) h = block(h);
  return h;
}

void ResLayer::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect(prefix + ".block" + std::to_string(b + 1), out);
  }
}

namespace {

std::vector<ResLayer> build_layers(int in_channels, const std::vector<int>& plan,
                                   const NetworkConfig& cfg, Activation activation, Rng& rng) {
  std::vector<ResLayer> layers;
  int channels = in_channels;
  for (int out : plan) {
    layers.emplace_back(channels, out, cfg, activation, rng);
    channels = out;
  }
  return layers;
}

void check_channels(const char* who, const Tensor& x, int channels) {
  if (x.rank() != 3) {
    throw DimensionError(who, "expected B x C x T input, got " + shape_to_string(x.shape()));
  }
  if (x.dim(1) != channels) throw DimensionError(who, 1, channels, x.dim(1));
}

void note(LayerTrace* trace, const char* name, const Tensor& t) {
  if (trace) trace->emplace_back(name, t.shape());
}

const char* res_name(std::size_t i) {
  static const char* names[] = {"res1", "res2", "res3", "res4", "res5", "res6", "res7", "res8"};
  return i < 8 ? names[i] : "res";
}

}  // namespace

Encoder::Encoder(const NetworkConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      layers_(build_layers(cfg.mel_bins, cfg.encoder_channels, cfg, Activation::LeakyRelu, rng)),
      out_(cfg.encoder_channels.back(), cfg.latent_dim, cfg.encoder_out_kernel, rng, false,
           cfg.leaky_slope) {}

Tensor Encoder::operator()(const Tensor& mel, LayerTrace* trace) const {
  check_channels("encode", mel, cfg_.mel_bins);
  note(trace, "input", mel);
  Tensor h = mel;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    note(trace, res_name(i), h);
  }
  h = out_(h);
  note(trace, "conv1d", h);
  return h;
}

ParameterList Encoder::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(std::string("encoder.") + res_name(i), out);
  }
  out_.collect("encoder.out", out);
  return out;
}

Decoder::Decoder(const NetworkConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      input_proj_(cfg.latent_dim + cfg.speaker_dim, cfg.latent_dim, 1, rng, false, cfg.leaky_slope),
      layers_(build_layers(cfg.latent_dim, cfg.decoder_channels, cfg, Activation::Glu, rng)),
      post_conv_(cfg.mel_bins, 2 * cfg.mel_bins, cfg.decoder_post_kernel, rng, false,
                 cfg.leaky_slope),
      post_norm_(2 * cfg.mel_bins),
      out_(cfg.mel_bins, cfg.mel_bins, cfg.decoder_out_kernel, rng, false, cfg.leaky_slope) {
  for (int channels : cfg.decoder_channels) {
    skips_.emplace_back(channels, cfg.mel_bins, 1, rng, false, cfg.leaky_slope);
  }
}

Tensor Decoder::operator()(const Tensor& z_q, const Tensor& speaker_codes, LayerTrace* trace) const {
  check_channels("decode", z_q, cfg_.latent_dim);
  if (speaker_codes.rank() != 2 || speaker_codes.dim(1) != cfg_.speaker_dim) {
    throw DimensionError("decode", "speaker codes must be B x " + std::to_string(cfg_.speaker_dim) +
                                       ", got " + shape_to_string(speaker_codes.shape()));
  }
  if (speaker_codes.dim(0) != z_q.dim(0)) throw DimensionError("decode", 0, z_q.dim(0), speaker_codes.dim(0));
  note(trace, "input", z_q);
  Tensor h = concat_channels(z_q, broadcast_time(speaker_codes, z_q.dim(2)));
  h = input_proj_(h);
  Tensor skip_sum;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    note(trace, res_name(i), h);
    Tensor skip = skips_[i](h);
    skip_sum = skip_sum.defined() ? add(skip_sum, skip) : skip;
  }
  note(trace, "skip-sum", skip_sum);
  h = glu(post_norm_(post_conv_(skip_sum)));
  note(trace, "conv1d-glu", h);
  h = out_(h);
  note(trace, "conv1d", h);
  return h;
}

ParameterList Decoder::parameters() const {
  ParameterList out;
  input_proj_.collect("decoder.input_proj", out);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(std::string("decoder.") + res_name(i), out);
    skips_[i].collect(std::string("decoder.") + res_name(i) + ".skip", out);
  }
  post_conv_.collect("decoder.post_conv", out);
  post_norm_.collect("decoder.post_norm", out);
  out_.collect("decoder.out", out);
  return out;
}

Discriminator::Discriminator(const NetworkConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      layers_(build_layers(cfg.mel_bins, cfg.discriminator_channels, cfg, Activation::LeakyRelu, rng)),
      out_(cfg.discriminator_channels.back(), 1, cfg.discriminator_out_kernel, rng, false,
           cfg.leaky_slope) {}

Tensor Discriminator::frame_scores(const Tensor& mel, LayerTrace* trace) const {
  check_channels("discriminate", mel, cfg_.mel_bins);
  note(trace, "input", mel);
  Tensor h = mel;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    note(trace, res_name(i), h);
  }
  h = out_(h);
  note(trace, "conv1d", h);
  return h;
}

Tensor Discriminator::operator()(const Tensor& mel) const {
  const Tensor scores = mean_over_time(frame_scores(mel));
  return scores.reshape({scores.dim(0)});
}

ParameterList Discriminator::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(std::string("discriminator.") + res_name(i), out);
  }
  out_.collect("discriminator.out", out);
  return out;
}

SpeakerTable::SpeakerTable(std::vector<std::string> ids, int dim, Rng& rng)
    : ids_(std::move(ids)), dim_(dim) {
  if (ids_.empty()) throw ConfigError("speaker table needs at least one speaker");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ids_[i] == ids_[j]) throw ConfigError("duplicate speaker id '" + ids_[i] + "'");
    }
  }
  const Index n = static_cast<Index>(ids_.size());
  table_ = Tensor::from({n, dim}, normal_vector(rng, n * dim), true);
}

Index SpeakerTable::index_of(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) {
    std::string known;
    for (const auto& s : ids_) known += (known.empty() ? "" : ", ") + s;
    throw UnknownSpeakerError("unknown speaker '" + id + "'; known speakers: " + known);
  }
  return static_cast<Index>(it - ids_.begin());
}

Tensor SpeakerTable::embed(const std::string& id) const { return gather_rows(table_, {index_of(id)}); }

Tensor SpeakerTable::lookup(const std::vector<Index>& rows) const { return gather_rows(table_, rows); }

ParameterList SpeakerTable::parameters() const { return {{"speakers.table", table_}}; }

}  // namespace vqphone
