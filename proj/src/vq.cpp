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

#include "vqphone/vq.hpp"

#include <cmath>
#include <sstream>

#include "vqphone/networks.hpp"
#include "vqphone/ops.hpp"
#include "vqphone/random.hpp"

namespace vqphone {

namespace {

bool has_duplicate_rows(const RowMatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < i; ++j) {
      if (m.row(i) == m.row(j)) return true;
    }
  }
  return false;
}

RowMatrixXd kmeans(const RowMatrixXd& samples, Index k, Rng& rng, int max_iterations = 100) {
  const Index n = samples.rows();
  RowMatrixXd centers(k, samples.cols());

  // k-means++ seeding.
  centers.row(0) = samples.row(uniform_index(rng, n));
  VectorXd nearest2 = (samples.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = nearest2.sum();
    Index pick = 0;
    if (total > 0) {
      double target = uniform(rng, 0.0, total);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= nearest2[pick];
        if (target < 0) break;
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centers.row(c) = samples.row(pick);
    nearest2 = nearest2.cwiseMin((samples.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    VectorXd dist2(n);
    for (Index i = 0; i < n; ++i) {
      const NearestCodeword best = nearest_codeword(samples.row(i).transpose(), centers);
      dist2[i] = best.distance2;
      if (assignment[static_cast<std::size_t>(i)] != best.index) {
        assignment[static_cast<std::size_t>(i)] = best.index;
        changed = true;
      }
    }
    RowMatrixXd sums = RowMatrixXd::Zero(k, samples.cols());
    VectorXd counts = VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += samples.row(i);
      counts[assignment[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
      } else {
        // Re-seed an empty cluster at the worst-served sample.
        Index far = 0;
        dist2.maxCoeff(&far);
        centers.row(c) = samples.row(far);
        dist2[far] = 0.0;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return centers;
}

}  // namespace

Codebook::Codebook(RowMatrixXd codewords) {
  const Index k = codewords.rows(), d = codewords.cols();
  codewords_ = Tensor::from({k, d}, Eigen::Map<const VectorXd>(codewords.data(), k * d), true);
}

void Codebook::assign(const RowMatrixXd& words) {
  if (words.rows() != size()) throw DimensionError("Codebook::assign", 0, size(), words.rows());
  if (words.cols() != dim()) throw DimensionError("Codebook::assign", 1, dim(), words.cols());
  codewords_.data() = Eigen::Map<const VectorXd>(words.data(), words.size());
}

Codebook init_codebook(Index size, Index dim, CodebookInit strategy, std::uint64_t seed,
                       const RowMatrixXd& samples) {
  if (size < 2) throw ConfigError("codebook size must be at least 2, got " + std::to_string(size));
  if (dim < 1) throw ConfigError("codebook dimension must be positive");
  Rng rng(seed);
  RowMatrixXd words(size, dim);
  if (strategy == CodebookInit::Uniform) {
    const double bound = 1.0 / static_cast<double>(size);
    for (Index i = 0; i < words.size(); ++i) words.data()[i] = uniform(rng, -bound, bound);
  } else {
    if (samples.cols() != dim) throw DimensionError("init_codebook", 1, dim, samples.cols());
    if (samples.rows() < size) {
      throw ConfigError("k-means initialization needs at least " + std::to_string(size) +
                        " samples, got " + std::to_string(samples.rows()));
    }
    words = kmeans(samples, size, rng);
  }
  // Keep codewords pairwise distinct.
  while (has_duplicate_rows(words)) {
    for (Index i = 0; i < words.size(); ++i) words.data()[i] += uniform(rng, -1e-6, 1e-6);
  }
  return Codebook(std::move(words));
}

LatentSequence quantize_straight_through(const Tensor& z_e, const Codebook& codebook) {
  if (z_e.rank() != 3) {
    throw DimensionError("quantize", "expected B x D x T latents, got " + shape_to_string(z_e.shape()));
  }
  if (z_e.dim(1) != codebook.dim()) throw DimensionError("quantize", 1, codebook.dim(), z_e.dim(1));
  const Index batch = z_e.dim(0), d = z_e.dim(1), frames = z_e.dim(2);
  LatentSequence out;
  out.z_e = z_e;
  out.indices.resize(static_cast<std::size_t>(batch * frames));
  const ConstRowMatrixMap book = codebook.matrix();
  for (Index b = 0; b < batch; ++b) {
    ConstRowMatrixMap latent(z_e.data().data() + b * d * frames, d, frames);
    for (Index t = 0; t < frames; ++t) {
      out.indices[static_cast<std::size_t>(b * frames + t)] = nearest_codeword(latent.col(t), book).index;
    }
  }
  out.e = select_codewords(codebook.codewords(), out.indices, batch, frames);
  out.z_q = straight_through(z_e, stop_gradient(out.e));
  return out;
}

VqLossTerms vq_loss_terms(const Tensor& z_e, const Tensor& e) {
  return {mse(stop_gradient(z_e), e), mse(z_e, stop_gradient(e))};
}

TokenSequence extract_tokens(const MelSpectrogram& mel, const Encoder& encoder,
                             const Codebook& codebook) {
  TokenSequence tokens;
  tokens.utterance_id = mel.utterance_id;
  const Index frames = mel.frames.rows();
  if (frames == 0) return tokens;
  NoGradGuard no_grad;
  const Index bins = mel.frames.cols();
  RowMatrixXd channel_major = mel.frames.transpose();
  const Tensor x = Tensor::from({1, bins, frames}, Eigen::Map<const VectorXd>(channel_major.data(), bins * frames));
  const LatentSequence latent = quantize_straight_through(encoder(x), codebook);
  tokens.indices = latent.indices;
  return tokens;
}

UsageStats codebook_usage_stats(const std::vector<Index>& indices, Index codebook_size) {
  if (indices.empty()) throw Error("codebook usage: no tokens");
  Index size = codebook_size;
  for (Index i : indices) {
    if (i < 0) throw Error("codebook usage: negative token index");
    if (codebook_size == 0) size = std::max(size, i + 1);
    else if (i >= codebook_size) throw Error("codebook usage: token " + std::to_string(i) + " outside codebook");
  }
  UsageStats stats;
  stats.counts.assign(static_cast<std::size_t>(size), 0);
  for (Index i : indices) ++stats.counts[static_cast<std::size_t>(i)];
  stats.total = indices.size();
  double h = 0.0;
  for (std::size_t c : stats.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(stats.total);
    h -= p * std::log(p);
  }
  stats.entropy = h;
  stats.perplexity = std::exp(h);
  return stats;
}

UsageStats codebook_usage_stats(const std::vector<TokenSequence>& sequences, Index codebook_size) {
  std::vector<Index> all;
  for (const auto& s : sequences) all.insert(all.end(), s.indices.begin(), s.indices.end());
  return codebook_usage_stats(all, codebook_size);
}

void write_token_dump(std::ostream& out, const std::vector<TokenSequence>& sequences) {
  for (const auto& s : sequences) {
    out << s.utterance_id;
    for (Index i : s.indices) out << ' ' << i;
    out << '\n';
  }
}

std::vector<TokenSequence> read_token_dump(std::istream& in) {
  std::vector<TokenSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    TokenSequence s;
    fields >> s.utterance_id;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      long long v = -1;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || v < 0) {
        throw FormatError("token dump line " + std::to_string(line_no) + ": bad token '" + tok + "'");
      }
      s.indices.push_back(static_cast<Index>(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vqphone
