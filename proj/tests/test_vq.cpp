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

#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vqphone/networks.hpp"
#include "vqphone/ops.hpp"
#include "vqphone/vq.hpp"

using namespace vqphone;

namespace {

RowMatrixXd random_matrix(Index rows, Index cols, Rng& rng) {
  RowMatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

}  // namespace

TEST_CASE("nearest codeword: exact match, ties, dimension check") {
  Rng rng(1);
  const RowMatrixXd book = random_matrix(16, 8, rng);
  const NearestCodeword hit = nearest_codeword(VectorXd(book.row(7).transpose()), book);
  CHECK(hit.index == 7);
  CHECK(hit.distance2 == 0.0);

  RowMatrixXd tie(3, 2);
  tie << 1, 0, -1, 0, 0, 5;
  CHECK(nearest_codeword(VectorXd::Zero(2), tie).index == 0);

  CHECK_THROWS_AS(nearest_codeword(VectorXd::Zero(3), tie), DimensionError);
}

TEST_CASE("nearest codeword equals exhaustive scan on 1000 instances") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const RowMatrixXd book = random_matrix(64, 16, rng);
    const VectorXd v = normal_vector(rng, 16);
    const auto [index, d2] = vqphone::testing::brute_force_nearest(v, book);
    const NearestCodeword got = nearest_codeword(v, book);
    REQUIRE(got.index == index);
    REQUIRE(got.distance2 == doctest::Approx(d2).epsilon(1e-12));
  }
}

TEST_CASE("straight-through quantization: forward values and gradient identity") {
  Rng rng(3);
  Codebook cb(random_matrix(8, 4, rng));
  Tensor z_e = Tensor::from({2, 4, 5}, normal_vector(rng, 40), true);
  LatentSequence q = quantize_straight_through(z_e, cb);
  REQUIRE(q.indices.size() == 10);
  for (Index b = 0; b < 2; ++b)
    for (Index t = 0; t < 5; ++t) {
      const Index k = q.indices[static_cast<std::size_t>(b * 5 + t)];
      VectorXd column(4);
      for (Index d = 0; d < 4; ++d) column[d] = z_e.data()[(b * 4 + d) * 5 + t];
      CHECK(k == cb.nearest(column).index);
      for (Index d = 0; d < 4; ++d) CHECK(q.z_q.data()[(b * 4 + d) * 5 + t] == cb.matrix()(k, d));
    }

  backward(sum(q.z_q));
  CHECK(z_e.grad() == VectorXd::Ones(40));
  CHECK_FALSE(cb.codewords().has_grad());

  // Quantizing z_q again is idempotent.
  LatentSequence again = quantize_straight_through(q.z_q.detach_copy(), cb);
  CHECK(again.indices == q.indices);
  CHECK(again.z_q.data() == q.z_q.data());

  CHECK_THROWS_AS(quantize_straight_through(Tensor::zeros({1, 3, 2}), cb), DimensionError);
}

TEST_CASE("straight-through gradient equals the gradient at a substituted z_q") {
  Rng rng(8);
  NetworkConfig cfg = NetworkConfig::shrunken(6);
  Decoder decoder(cfg, rng);
  Codebook cb(random_matrix(5, cfg.latent_dim, rng));
  const Tensor speaker = Tensor::from({1, cfg.speaker_dim}, normal_vector(rng, cfg.speaker_dim));
  Tensor z_e = Tensor::from({1, cfg.latent_dim, 7}, normal_vector(rng, cfg.latent_dim * 7), true);
  const VectorXd w = normal_vector(rng, 6 * 7);
  const Tensor wt = Tensor::from({1, 6, 7}, w);

  LatentSequence q = quantize_straight_through(z_e, cb);
  backward(sum(mul(decoder(q.z_q, speaker), wt)));

  Tensor substitute = Tensor::from(q.z_q.shape(), q.z_q.data(), true);
  backward(sum(mul(decoder(substitute, speaker), wt)));
  CHECK(z_e.grad() == substitute.grad());
}

TEST_CASE("vq loss terms: values and term-by-term gradient routing") {
  Rng rng(4);
  Codebook cb(random_matrix(6, 3, rng));
  Tensor z_e = Tensor::from({1, 3, 4}, normal_vector(rng, 12), true);
  LatentSequence q = quantize_straight_through(z_e, cb);

  VqLossTerms exact = vq_loss_terms(q.e.detach_copy(), q.e);
  CHECK(exact.codebook_loss.item() == 0.0);
  CHECK(exact.commitment_loss.item() == 0.0);

  Tensor shifted = add_scalar(q.e.detach_copy(), 0.25);
  VqLossTerms delta = vq_loss_terms(shifted, q.e);
  CHECK(delta.codebook_loss.item() == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(delta.commitment_loss.item() == doctest::Approx(0.0625).epsilon(1e-12));

  VqLossTerms terms = vq_loss_terms(q.z_e, q.e);
  CHECK(terms.codebook_loss.item() == doctest::Approx(terms.commitment_loss.item()));
  CHECK(terms.codebook_loss.item() >= 0.0);

  backward(terms.commitment_loss);
  CHECK_FALSE(cb.codewords().has_grad());
  CHECK(z_e.grad().norm() > 0.0);
  z_e.zero_grad();

  backward(terms.codebook_loss);
  CHECK(z_e.grad().isZero());
  CHECK(cb.codewords().grad().norm() > 0.0);

  CHECK_THROWS_AS(vq_loss_terms(Tensor::zeros({1, 3, 4}), Tensor::zeros({1, 3, 5})), DimensionError);
}

TEST_CASE("codebook initialization") {
  const Codebook a = init_codebook(256, 128, CodebookInit::Uniform, 42);
  const Codebook b = init_codebook(256, 128, CodebookInit::Uniform, 42);
  CHECK(a.size() == 256);
  CHECK(a.dim() == 128);
  CHECK(a.matrix() == b.matrix());
  CHECK(a.matrix().cwiseAbs().maxCoeff() < 1.0 / 256);
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = i + 1; j < a.size(); ++j) CHECK_FALSE(a.matrix().row(i) == a.matrix().row(j));
  CHECK_THROWS_AS(init_codebook(1, 4, CodebookInit::Uniform, 1), ConfigError);
}

TEST_CASE("k-means initialization recovers synthetic cluster means") {
  Rng rng(12);
  RowMatrixXd means(4, 3);
  means << 3, 0, 0, -3, 0, 0, 0, 3, 0, 0, 0, -3;
  RowMatrixXd samples(400, 3);
  for (Index i = 0; i < 400; ++i) {
    samples.row(i) = means.row(i % 4) + 0.1 * normal_vector(rng, 3).transpose();
  }
  RowMatrixXd empirical = RowMatrixXd::Zero(4, 3);
  for (Index i = 0; i < 400; ++i) empirical.row(i % 4) += samples.row(i) / 100.0;

  const Codebook cb = init_codebook(4, 3, CodebookInit::KMeans, 5, samples);
  for (Index c = 0; c < 4; ++c) {
    const NearestCodeword n = cb.nearest(empirical.row(c).transpose());
    CHECK(std::sqrt(n.distance2) < 0.1);
  }
  CHECK(init_codebook(4, 3, CodebookInit::KMeans, 5, samples).matrix() == cb.matrix());
  CHECK_THROWS_AS(init_codebook(4, 3, CodebookInit::KMeans, 5, samples.topRows(2)), ConfigError);
}

TEST_CASE("token extraction: one token per frame, deterministic, empty input") {
  Rng rng(21);
  NetworkConfig cfg = NetworkConfig::shrunken(10);
  Encoder encoder(cfg, rng);
  Codebook cb = init_codebook(8, cfg.latent_dim, CodebookInit::Uniform, 3);
  MelSpectrogram mel;
  mel.utterance_id = "u1";
  mel.frames = random_matrix(23, 10, rng);
  const TokenSequence a = extract_tokens(mel, encoder, cb);
  const TokenSequence b = extract_tokens(mel, encoder, cb);
  CHECK(a.utterance_id == "u1");
  CHECK(a.indices.size() == 23);
  CHECK(a.indices == b.indices);
  for (Index k : a.indices) CHECK((k >= 0 && k < 8));

  MelSpectrogram empty;
  empty.frames.resize(0, 10);
  CHECK(extract_tokens(empty, encoder, cb).indices.empty());
}

TEST_CASE("usage statistics") {
  CHECK(codebook_usage_stats(std::vector<Index>(50, 3), 8).perplexity == doctest::Approx(1.0));
  std::vector<Index> uniform;
  for (int r = 0; r < 10; ++r)
    for (Index k = 0; k < 16; ++k) uniform.push_back(k);
  CHECK(codebook_usage_stats(uniform, 16).perplexity == doctest::Approx(16.0));

  Rng rng(2);
  std::vector<Index> random;
  for (int i = 0; i < 777; ++i) random.push_back(uniform_index(rng, 10));
  const UsageStats s = codebook_usage_stats(random, 10);
  std::size_t total = 0;
  for (auto c : s.counts) total += c;
  CHECK(total == 777);
  CHECK(s.total == 777);
  CHECK(s.perplexity == doctest::Approx(vqphone::testing::perplexity_of(random)).epsilon(1e-12));
}

TEST_CASE("token dump round trip") {
  std::vector<TokenSequence> seqs = {{"a", {1, 2, 3}}, {"b", {}}, {"c", {0}}};
  std::stringstream buf;
  write_token_dump(buf, seqs);
  CHECK(buf.str() == "a 1 2 3\nb\nc 0\n");
  const auto back = read_token_dump(buf);
  REQUIRE(back.size() == 3);
  CHECK(back[0].indices == seqs[0].indices);
  CHECK(back[1].indices.empty());
  CHECK(back[2].utterance_id == "c");
  std::stringstream bad("x 1 two\n");
  CHECK_THROWS_AS(read_token_dump(bad), FormatError);
}
