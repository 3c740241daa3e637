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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "vqphone/checkpoint.hpp"
#include "vqphone/features.hpp"
#include "vqphone/ops.hpp"
#include "vqphone/toy_corpus.hpp"
#include "vqphone/trainer.hpp"

using namespace vqphone;
namespace fs = std::filesystem;

namespace {

Config small_config() {
  Config cfg;
  cfg.frontend.mel_bins = 8;
  cfg.network = NetworkConfig::shrunken(8);
  cfg.train.codebook_size = 4;
  cfg.train.batch_size = 2;
  cfg.train.crop_frames = 8;
  cfg.train.n_critic = 2;
  cfg.train.max_steps = 4;
  cfg.train.seed = 17;
  return cfg;
}

ToyCorpus small_corpus() {
  ToyCorpusOptions o;
  o.utterances = 8;
  o.frames = 16;
  o.mel_bins = 8;
  o.min_segment = 3;
  o.max_segment = 5;
  return make_toy_corpus(o);
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vqphone_test_trainer" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<VectorXd> snapshot(const ParameterList& params) {
  std::vector<VectorXd> out;
  for (const auto& p : params) out.push_back(p.tensor.data());
  return out;
}

bool unchanged(const ParameterList& params, const std::vector<VectorXd>& before) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.data() != before[i]) return false;
  }
  return true;
}

bool all_changed(const ParameterList& params, const std::vector<VectorXd>& before) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.data() == before[i]) return false;
  }
  return true;
}

bool no_grads(const ParameterList& params) {
  for (const auto& p : params) {
    if (p.tensor.has_grad() && !p.tensor.grad().isZero()) return false;
  }
  return true;
}

void zero_discriminator(Models& m) {
  for (auto& p : m.discriminator_parameters()) {
    Tensor t = p.tensor;
    t.data().setZero();
  }
}

}  // namespace

TEST_CASE("reconstruction loss") {
  Rng rng(1);
  const Tensor x = Tensor::from({2, 3, 4}, normal_vector(rng, 24));
  CHECK(reconstruction_loss(x, x, ReconLoss::L1).item() == 0.0);
  CHECK(reconstruction_loss(x, add_scalar(x, 1.0), ReconLoss::L1).item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(reconstruction_loss(x, add_scalar(x, 2.0), ReconLoss::L2).item() == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_THROWS_AS(reconstruction_loss(x, Tensor::zeros({2, 3, 5}), ReconLoss::L1), DimensionError);

  for (ReconLoss kind : {ReconLoss::L1, ReconLoss::L2}) {
    Tensor x_hat = Tensor::from({2, 3, 4}, normal_vector(rng, 24), true);
    const auto r = vqphone::testing::check_gradients(
        [&](const std::vector<Tensor>& v) { return reconstruction_loss(x, v[0], kind); }, {x_hat}, rng);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("corpus loading and batching") {
  const fs::path dir = temp_dir("corpus");
  ToyCorpus toy = small_corpus();
  std::ofstream manifest(dir / "manifest.txt");
  for (std::size_t i = 0; i < 3; ++i) {
    MelSpectrogram mel;
    mel.frames = toy.corpus[i].frames;
    mel.params.mel_bins = 8;
    save_features(dir / (toy.corpus[i].id + ".vqph"), mel);
    manifest << toy.corpus[i].id << ' ' << toy.corpus[i].speaker << ' ' << toy.corpus[i].id << ".vqph\n";
  }
  manifest.close();
  const Corpus corpus = load_corpus(dir / "manifest.txt");
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[1].frames == toy.corpus[1].frames);
  CHECK(corpus_speakers(corpus) == std::vector<std::string>{"spk0", "spk1"});
  CHECK_THROWS(load_corpus(dir / "missing.txt"));

  Rng rng(3);
  SpeakerTable speakers(corpus_speakers(corpus), 4, rng);
  const Batch batch = sample_batch(corpus, speakers, 5, 8, rng);
  CHECK(batch.mel.shape() == Shape{5, 8, 8});
  CHECK(batch.speakers.size() == 5);

  Corpus tiny = {{"short", "spk0", RowMatrixXd::Random(3, 8)}};
  const Batch padded = sample_batch(tiny, speakers, 1, 6, rng);
  for (Index t = 3; t < 6; ++t)
    for (Index c = 0; c < 8; ++c) CHECK(padded.mel.data()[c * 6 + t] == tiny[0].frames(2, c));
}

TEST_CASE("gradient penalty: linear critics match the analytic norm") {
  const Index batch = 2, channels = 5, frames = 6, d = channels * frames;
  TrainConfig cfg;
  const Critic sum_critic = [](const Tensor& x) { return scale(mean_over_time(x.reshape({x.dim(0), 1, x.numel() / x.dim(0)})), static_cast<double>(x.numel() / x.dim(0))).reshape({x.dim(0)}); };
  const Critic mean_critic = [](const Tensor& x) { return mean_over_time(x.reshape({x.dim(0), 1, x.numel() / x.dim(0)})).reshape({x.dim(0)}); };

  double sum_g2 = 0.0, mean_g2 = 0.0, sum_pen = 0.0, mean_pen = 0.0;
  const int seeds = 4000;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    const Tensor real = Tensor::from({batch, channels, frames}, normal_vector(rng, batch * d));
    const Tensor fake = Tensor::from({batch, channels, frames}, normal_vector(rng, batch * d));
    const PenaltyTerms a = gradient_penalty(sum_critic, real, fake, cfg, rng);
    const PenaltyTerms b = gradient_penalty(mean_critic, real, fake, cfg, rng);
    sum_g2 += a.grad_norm2.data().mean();
    mean_g2 += b.grad_norm2.data().mean();
    sum_pen += a.penalty.item();
    mean_pen += b.penalty.item();
  }
  sum_g2 /= seeds;
  mean_g2 /= seeds;
  CHECK(std::abs(sum_g2 - d) / d < 0.05);
  CHECK(std::abs(mean_g2 - 1.0 / d) * d < 0.05);
  // Penalties average to within the same Monte-Carlo band of the analytic value.
  const double sum_expect = std::pow(std::sqrt(static_cast<double>(d)) - 1.0, 2);
  const double mean_expect = std::pow(1.0 / std::sqrt(static_cast<double>(d)) - 1.0, 2);
  CHECK(std::abs(sum_pen / seeds - sum_expect) / sum_expect < 0.15);
  CHECK(std::abs(mean_pen / seeds - mean_expect) / mean_expect < 0.05);
}

TEST_CASE("gradient penalty: shrunken discriminator against the exact input gradient") {
  Rng init(5);
  const NetworkConfig net = NetworkConfig::shrunken(6);
  Discriminator disc(net, init);
  const Critic critic = [&disc](const Tensor& x) { return disc(x); };
  TrainConfig cfg;
  cfg.fd_directions = 64;
  const Index batch = 2, frames = 10;
  double rel_sum = 0.0;
  for (int seed = 0; seed < 32; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    Tensor x = Tensor::from({batch, 6, frames}, normal_vector(rng, batch * 6 * frames), true);
    backward(sum(disc(x)));
    const VectorXd g = x.grad();
    const Tensor est = estimate_grad_norm2(critic, x.detach_copy(), cfg.fd_epsilon, cfg.fd_directions, rng);
    for (Index b = 0; b < batch; ++b) {
      const double exact = g.segment(b * 6 * frames, 6 * frames).squaredNorm();
      rel_sum += est[b] / exact;
    }
  }
  CHECK(std::abs(rel_sum / (32.0 * batch) - 1.0) < 0.10);
}

TEST_CASE("gradient penalty reaches only critic parameters") {
  Rng init(6);
  const NetworkConfig net = NetworkConfig::shrunken(6);
  Discriminator disc(net, init);
  const Critic critic = [&disc](const Tensor& x) { return disc(x); };
  Tensor real = Tensor::from({2, 6, 5}, normal_vector(init, 60), true);
  Tensor fake = Tensor::from({2, 6, 5}, normal_vector(init, 60), true);
  TrainConfig cfg;
  PenaltyTerms p = gradient_penalty(critic, real, fake, cfg, init);
  CHECK(p.penalty.item() >= 0.0);
  backward(p.penalty);
  CHECK_FALSE(real.has_grad());
  CHECK_FALSE(fake.has_grad());
  double norm = 0.0;
  for (const auto& q : disc.parameters()) norm += q.tensor.grad().squaredNorm();
  CHECK(norm > 0.0);
  CHECK_THROWS_AS(gradient_penalty(critic, real, Tensor::zeros({2, 6, 4}), cfg, init), DimensionError);
}

TEST_CASE("critic loss: cancellation and lambda weighting") {
  Rng init(7);
  const NetworkConfig net = NetworkConfig::shrunken(6);
  Discriminator disc(net, init);
  const Critic critic = [&disc](const Tensor& x) { return disc(x); };
  const Tensor x = Tensor::from({3, 6, 7}, normal_vector(init, 126));

  TrainConfig cfg;
  cfg.lambda_gp = 0.0;
  Rng r0(1);
  CriticLoss plain = critic_loss(critic, x, x, cfg, r0);
  CHECK(std::abs(plain.loss.item()) <= 1e-12);

  cfg.lambda_gp = 10.0;
  Rng r1(2), r2(2);
  CriticLoss with_gp = critic_loss(critic, x, x, cfg, r1);
  const PenaltyTerms gp = gradient_penalty(critic, x, x, cfg, r2);
  CHECK(with_gp.loss.item() == doctest::Approx(10.0 * gp.penalty.item()).epsilon(1e-12));

  const Tensor other = Tensor::from({3, 6, 7}, normal_vector(init, 126));
  cfg.lambda_gp = 0.0;
  CriticLoss gap = critic_loss(critic, x, other, cfg, r0);
  CHECK(gap.loss.item() == -disc(x).data().mean() + disc(other).data().mean());
}

TEST_CASE("generator loss with a zero critic is recon plus the vq terms") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  zero_discriminator(m);
  Rng rng(4);
  const Batch batch = sample_batch(toy.corpus, m.speakers, 2, 8, rng);
  const GeneratorLoss loss = generator_loss(batch, m, cfg.train);
  const double expect = loss.recon.item() + loss.vq.codebook_loss.item() + loss.vq.commitment_loss.item();
  CHECK(loss.adversarial.item() == 0.0);
  CHECK(std::abs(loss.total.item() - expect) <= 1e-12);
}

TEST_CASE("adversarial weight scales only the critic term") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  Rng rng(4);
  const Batch batch = sample_batch(toy.corpus, m.speakers, 2, 8, rng);
  for (double w : {0.0, 0.01, 1.0}) {
    TrainConfig t = cfg.train;
    t.w_adv = w;
    const GeneratorLoss loss = generator_loss(batch, m, t);
    const double expect = loss.recon.item() + loss.vq.codebook_loss.item() + loss.vq.commitment_loss.item() +
                          w * loss.adversarial.item();
    CHECK(loss.total.item() == doctest::Approx(expect).epsilon(1e-12));
  }
  Config bad = cfg;
  bad.train.w_adv = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generator loss term ablation routes codebook and commitment gradients") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  Rng rng(4);
  const Batch batch = sample_batch(toy.corpus, m.speakers, 2, 8, rng);

  TrainConfig no_codebook = cfg.train;
  no_codebook.w_codebook = 0.0;
  backward(generator_loss(batch, m, no_codebook).total);
  CHECK(m.codebook.codewords().grad().isZero());
  zero_grad(tensors_of(m.all_parameters()));

  GeneratorLoss only = generator_loss(batch, m, cfg.train);
  backward(only.vq.codebook_loss);
  CHECK(no_grads(m.encoder.parameters()));
  CHECK(m.codebook.codewords().grad().norm() > 0.0);
  zero_grad(tensors_of(m.all_parameters()));

  only = generator_loss(batch, m, cfg.train);
  backward(only.vq.commitment_loss);
  CHECK(m.codebook.codewords().grad().isZero());
  double enc = 0.0;
  for (const auto& p : m.encoder.parameters()) enc += p.tensor.grad().squaredNorm();
  CHECK(enc > 0.0);
}

TEST_CASE("every generator leaf receives gradient") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  Rng rng(4);
  Batch batch = sample_batch(toy.corpus, m.speakers, 4, 8, rng);
  batch.speakers = {0, 1, 0, 1};
  backward(generator_loss(batch, m, cfg.train).total);
  for (const auto& p : m.generator_parameters()) {
    INFO(p.name);
    CHECK(p.tensor.grad().norm() > 0.0);
  }
}

TEST_CASE("critic and generator steps update disjoint parameter sets") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  Adam g_opt(tensors_of(m.generator_parameters()));
  Adam d_opt(tensors_of(m.discriminator_parameters()));
  Rng rng(4);
  const Batch batch = sample_batch(toy.corpus, m.speakers, 2, 8, rng);

  auto g_before = snapshot(m.generator_parameters());
  auto d_before = snapshot(m.discriminator_parameters());
  const StepMetrics dm = discriminator_step(batch, m, d_opt, cfg.train, rng);
  CHECK(std::isfinite(dm.d_loss));
  CHECK(unchanged(m.generator_parameters(), g_before));
  CHECK(no_grads(m.generator_parameters()));
  CHECK(all_changed(m.discriminator_parameters(), d_before));

  d_before = snapshot(m.discriminator_parameters());
  d_opt.zero_grad();
  Batch one_speaker = batch;
  one_speaker.speakers = {0, 0};
  const VectorXd table_before = m.speakers.table().data();
  const StepMetrics gm = generator_step(one_speaker, m, g_opt, cfg.train);
  CHECK(std::isfinite(gm.g_loss));
  CHECK(unchanged(m.discriminator_parameters(), d_before));
  CHECK(no_grads(m.discriminator_parameters()));
  for (const auto& p : m.discriminator_parameters()) CHECK(p.tensor.requires_grad());
  const VectorXd table_after = m.speakers.table().data();
  const Index dim = m.speakers.dim();
  CHECK(table_after.segment(0, dim) != table_before.segment(0, dim));
  CHECK(table_after.segment(dim, dim) == table_before.segment(dim, dim));
  CHECK(gm.perplexity >= 1.0);
  CHECK(gm.perplexity <= 4.0);
}

TEST_CASE("with lambda_gp = 0 and one critic step the critic loss is the plain gap") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  cfg.train.lambda_gp = 0.0;
  cfg.train.n_critic = 1;
  Models m(cfg.network, corpus_speakers(toy.corpus), 4, 3);
  Adam d_opt(tensors_of(m.discriminator_parameters()));
  Rng rng(4);
  const Batch batch = sample_batch(toy.corpus, m.speakers, 2, 8, rng);
  Tensor fake;
  {
    NoGradGuard ng;
    fake = run_generator(m, batch).reconstruction;
  }
  const double expect = -m.discriminator(batch.mel).data().mean() + m.discriminator(fake).data().mean();
  const StepMetrics s = discriminator_step(batch, m, d_opt, cfg.train, rng);
  CHECK(s.d_loss == expect);
  CHECK(s.gp == 0.0);
}

TEST_CASE("metrics serialise as one JSON object per line") {
  StepMetrics m;
  m.step = 3;
  m.recon = 0.5;
  m.perplexity = 2.0;
  const auto j = nlohmann::json::parse(metrics_to_json(m));
  CHECK(j["step"] == 3);
  CHECK(j["recon"] == 0.5);
  CHECK(j.contains("gp"));
  CHECK(metrics_to_json(m).find('\n') == std::string::npos);
}

TEST_CASE("training is deterministic and resumes exactly from a checkpoint") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  cfg.train.max_steps = 6;
  std::ostringstream log_a, log_b;
  Trainer a(toy.corpus, cfg);
  a.run(&log_a);
  Trainer b(toy.corpus, cfg);
  b.run(&log_b);
  CHECK(log_a.str() == log_b.str());

  const fs::path dir = temp_dir("resume");
  Config first = cfg;
  first.train.max_steps = 3;
  Trainer c(toy.corpus, first);
  c.run(nullptr);
  c.save_checkpoint(dir / "mid.vqck");

  Trainer d(toy.corpus, cfg);
  d.load_checkpoint(dir / "mid.vqck");
  CHECK(d.step_count() == 3);
  std::ostringstream log_d;
  d.run(&log_d);
  std::string tail;
  {
    std::istringstream in(log_a.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      if (++n > 3) tail += line + "\n";
    }
  }
  CHECK(log_d.str() == tail);
}

TEST_CASE("checkpoints round-trip parameters and reject incompatible configs") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  cfg.train.max_steps = 1;
  Trainer t(toy.corpus, cfg);
  t.run(nullptr);
  const fs::path dir = temp_dir("ckpt");
  t.save_checkpoint(dir / "a.vqck");

  const CheckpointData data = read_checkpoint(dir / "a.vqck");
  const ParameterList params = t.models().all_parameters();
  REQUIRE(data.parameters.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(data.parameters[i].name == params[i].name);
    CHECK(data.parameters[i].values == params[i].tensor.data());
  }
  const LoadedModel loaded = load_model(dir / "a.vqck");
  CHECK(loaded.step == 1);
  CHECK(loaded.models->codebook.matrix() == t.models().codebook.matrix());

  Config other = cfg;
  other.train.codebook_size = 8;
  Trainer wrong_k(toy.corpus, other);
  try {
    wrong_k.load_checkpoint(dir / "a.vqck");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("codebook_size") != std::string::npos);
  }
  other = cfg;
  other.network.latent_dim = 5;
  Trainer wrong_net(toy.corpus, other);
  try {
    wrong_net.load_checkpoint(dir / "a.vqck");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("network.latent_dim") != std::string::npos);
  }

  {
    std::fstream f(dir / "a.vqck", std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "a.vqck"), FormatError);
}

TEST_CASE("k-means codebook initialisation in the trainer") {
  const ToyCorpus toy = small_corpus();
  Config cfg = small_config();
  cfg.train.codebook_init = CodebookInit::KMeans;
  Trainer a(toy.corpus, cfg);
  Trainer b(toy.corpus, cfg);
  CHECK(a.models().codebook.matrix() == b.models().codebook.matrix());
  Config uni = small_config();
  Trainer c(toy.corpus, uni);
  CHECK(a.models().codebook.matrix() != c.models().codebook.matrix());
}
