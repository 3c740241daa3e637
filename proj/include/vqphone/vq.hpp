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

// Vector quantizer: codebook, nearest-codeword search, straight-through
// quantization, the codebook and commitment losses, and token extraction.

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "vqphone/eigen_types.hpp"
#include "vqphone/errors.hpp"
#include "vqphone/frontend.hpp"
#include "vqphone/tensor.hpp"

namespace vqphone {

class Encoder;

struct NearestCodeword {
  Index index = -1;
  double distance2 = std::numeric_limits<double>::infinity();
};

// Exhaustive argmin of squared Euclidean distance over the rows of
// `codewords`; the lowest index wins ties.
template <typename VecDerived, typename BookDerived>
NearestCodeword nearest_codeword(const Eigen::MatrixBase<VecDerived>& vector,
                                 const Eigen::MatrixBase<BookDerived>& codewords) {
  if (vector.size() != codewords.cols()) {
    throw DimensionError("nearest_codeword", 1, static_cast<long>(codewords.cols()),
                         static_cast<long>(vector.size()));
  }
  NearestCodeword best;
  for (Index k = 0; k < codewords.rows(); ++k) {
    const double d2 = (codewords.row(k).transpose() - vector).squaredNorm();
    if (d2 < best.distance2) {
      best.index = k;
      best.distance2 = d2;
    }
  }
  return best;
}

class Codebook {
 public:
  // K x D trainable codeword matrix.
  explicit Codebook(RowMatrixXd codewords);

  Index size() const { return codewords_.dim(0); }
  Index dim() const { return codewords_.dim(1); }
  const Tensor& codewords() const { return codewords_; }
  ConstRowMatrixMap matrix() const {
    return ConstRowMatrixMap(codewords_.data().data(), size(), dim());
  }
  NearestCodeword nearest(const Eigen::Ref<const VectorXd>& v) const {
    return nearest_codeword(v, matrix());
  }
  // Overwrites the codeword values in place (the tensor handle is kept).
  void assign(const RowMatrixXd& words);

 private:
  Tensor codewords_;
};

enum class CodebookInit { Uniform, KMeans };

// Uniform draws from (-1/K, 1/K), or k-means (k-means++ seeding, Lloyd
// iterations) over the rows of `samples`. Throws ConfigError for K < 2 or when
// k-means lacks at least K samples.
Codebook init_codebook(Index size, Index dim, CodebookInit strategy, std::uint64_t seed,
                       const RowMatrixXd& samples = RowMatrixXd());

struct LatentSequence {
  Tensor z_e;  // B x D x T, continuous
  Tensor z_q;  // B x D x T, forward value = selected codewords
  Tensor e;    // B x D x T, selected codewords; carries gradient to the codebook
  std::vector<Index> indices;  // B * T, (batch, time) order
};

// Per-frame nearest codewords of z_e with a straight-through z_q: the forward
// value is exactly the codeword, the backward pass copies dL/dz_q to z_e and
// sends nothing to the codebook.
LatentSequence quantize_straight_through(const Tensor& z_e, const Codebook& codebook);

struct VqLossTerms {
  Tensor codebook_loss;    // mean (sg[z_e] - e)^2, reaches the codebook only
  Tensor commitment_loss;  // mean (z_e - sg[e])^2, reaches the encoder only
};

VqLossTerms vq_loss_terms(const Tensor& z_e, const Tensor& e);

struct TokenSequence {
  std::string utterance_id;
  std::vector<Index> indices;
};

// Runs the encoder on one utterance and quantizes every frame. An empty
// spectrogram gives an empty sequence.
TokenSequence extract_tokens(const MelSpectrogram& mel, const Encoder& encoder,
                             const Codebook& codebook);

struct UsageStats {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  double entropy = 0.0;  // nats
  double perplexity = 1.0;
};

// Histogram over [0, codebook_size); pass codebook_size = 0 to size it from
// the largest index seen. Throws Error on empty input.
UsageStats codebook_usage_stats(const std::vector<TokenSequence>& sequences,
                                Index codebook_size = 0);
UsageStats codebook_usage_stats(const std::vector<Index>& indices, Index codebook_size = 0);

// "utterance_id idx idx ..." per line.
void write_token_dump(std::ostream& out, const std::vector<TokenSequence>& sequences);
std::vector<TokenSequence> read_token_dump(std::istream& in);

}  // namespace vqphone
