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

#include "vqphone/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vqphone/checkpoint.hpp"
#include "vqphone/features.hpp"
#include "vqphone/ops.hpp"

namespace vqphone {

namespace {

constexpr std::uint64_t kTrainStreamSalt = 0x9E3779B97F4A7C15ull;

void append(ParameterList& out, const ParameterList& more) {
  out.insert(out.end(), more.begin(), more.end());
}

// Flips requires_grad off for a parameter set and restores it on scope exit.
class FreezeGuard {
 public:
  explicit FreezeGuard(const ParameterList& params) {
    for (const auto& p : params) {
      Tensor t = p.tensor;
      saved_.emplace_back(t, t.requires_grad());
      t.set_requires_grad(false);
    }
  }
  ~FreezeGuard() {
    for (auto& [t, flag] : saved_) t.set_requires_grad(flag);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<std::pair<Tensor, bool>> saved_;
};

// B x D x T latent tensor -> (B*T) x D sample rows.
RowMatrixXd latent_rows(const Tensor& z) {
  const Index batch = z.dim(0), dim = z.dim(1), frames = z.dim(2);
  RowMatrixXd rows(batch * frames, dim);
  for (Index b = 0; b < batch; ++b) {
    ConstRowMatrixMap block(z.data().data() + b * dim * frames, dim, frames);
    rows.middleRows(b * frames, frames) = block.transpose();
  }
  return rows;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id, speaker, path;
    if (!(fields >> id >> speaker >> path)) {
      throw FormatError(manifest.string() + ":" + std::to_string(line_no) +
                        ": expected \"utterance speaker path\"");
    }
    std::filesystem::path feature_path(path);
    if (feature_path.is_relative()) feature_path = base / feature_path;
    MelSpectrogram mel = load_features(feature_path);
    corpus.push_back({id, speaker, std::move(mel.frames)});
  }
  if (corpus.empty()) throw Error("manifest " + manifest.string() + " lists no utterances");
  return corpus;
}

std::vector<std::string> corpus_speakers(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& u : corpus) ids.insert(u.speaker);
  return {ids.begin(), ids.end()};
}

Models::Models(const NetworkConfig& cfg, const std::vector<std::string>& speaker_ids,
               int codebook_size, std::uint64_t seed)
    : Models(cfg, speaker_ids, codebook_size, Rng(seed)) {}

Models::Models(const NetworkConfig& cfg, const std::vector<std::string>& speaker_ids,
               int codebook_size, Rng&& rng)
    : config(cfg),
      encoder(cfg, rng),
      codebook(init_codebook(codebook_size, cfg.latent_dim, CodebookInit::Uniform, rng())),
      decoder(cfg, rng),
      speakers(speaker_ids, cfg.speaker_dim, rng),
      discriminator(cfg, rng) {}

ParameterList Models::generator_parameters() const {
  ParameterList out = encoder.parameters();
  out.push_back({"codebook.codewords", codebook.codewords()});
  append(out, decoder.parameters());
  append(out, speakers.parameters());
  return out;
}

ParameterList Models::discriminator_parameters() const { return discriminator.parameters(); }

ParameterList Models::all_parameters() const {
  ParameterList out = generator_parameters();
  append(out, discriminator_parameters());
  return out;
}

Tensor stack_frames(const std::vector<const RowMatrixXd*>& frames) {
  if (frames.empty()) throw DimensionError("stack_frames", "empty batch");
  const Index t = frames[0]->rows(), bins = frames[0]->cols();
  const Index batch = static_cast<Index>(frames.size());
  VectorXd values(batch * bins * t);
  for (Index b = 0; b < batch; ++b) {
    const RowMatrixXd& f = *frames[static_cast<std::size_t>(b)];
    if (f.rows() != t) throw DimensionError("stack_frames", 2, t, f.rows());
    if (f.cols() != bins) throw DimensionError("stack_frames", 1, bins, f.cols());
    RowMatrixMap(values.data() + b * bins * t, bins, t) = f.transpose();
  }
  return Tensor::from({batch, bins, t}, std::move(values));
}

Batch sample_batch(const Corpus& corpus, const SpeakerTable& speakers, int batch_size,
                   int crop_frames, Rng& rng) {
  if (corpus.empty()) throw Error("cannot sample from an empty corpus");
  std::vector<RowMatrixXd> crops;
  Batch batch;
  crops.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const Utterance& u = corpus[static_cast<std::size_t>(uniform_index(rng, static_cast<Index>(corpus.size())))];
    const Index t = u.frames.rows();
    RowMatrixXd crop(crop_frames, u.frames.cols());
    if (t >= crop_frames) {
      const Index offset = uniform_index(rng, t - crop_frames + 1);
      crop = u.frames.middleRows(offset, crop_frames);
    } else {
      if (t == 0) throw DimensionError("sample_batch", "utterance " + u.id + " has no frames");
      crop.topRows(t) = u.frames;
      for (Index r = t; r < crop_frames; ++r) crop.row(r) = u.frames.row(t - 1);
    }
    crops.push_back(std::move(crop));
    batch.speakers.push_back(speakers.index_of(u.speaker));
  }
  std::vector<const RowMatrixXd*> ptrs;
  for (const auto& c : crops) ptrs.push_back(&c);
  batch.mel = stack_frames(ptrs);
  return batch;
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat, ReconLoss kind) {
  Tensor diff = sub(x_hat, x);
  return kind == ReconLoss::L1 ? mean(abs(diff)) : mean(square(diff));
}

Tensor estimate_grad_norm2(const Critic& critic, const Tensor& x, double step, int directions,
                           Rng& rng) {
  if (directions < 1) throw ConfigError("finite-difference directions must be positive");
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  const Index batch = x.dim(0);
  const Index d = x.numel() / batch;
  const Index r = directions;
  // Rows b*r + i hold x_b + h u_i, rows r*B + b*r + i hold x_b - h u_i.
  VectorXd stacked(2 * r * batch * d);
  for (Index b = 0; b < batch; ++b) {
    const auto xb = x.data().segment(b * d, d);
    for (Index i = 0; i < r; ++i) {
      VectorXd u = normal_vector(rng, d);
      u /= u.norm();
      stacked.segment((b * r + i) * d, d) = xb + step * u;
      stacked.segment((r * batch + b * r + i) * d, d) = xb - step * u;
    }
  }
  Shape shape = x.shape();
  shape[0] = 2 * r * batch;
  Tensor scores = critic(Tensor::from(shape, std::move(stacked))).reshape({2 * r * batch, 1});

  std::vector<Index> plus_rows(static_cast<std::size_t>(r * batch));
  std::vector<Index> minus_rows(plus_rows.size());
  for (Index k = 0; k < r * batch; ++k) {
    plus_rows[static_cast<std::size_t>(k)] = k;
    minus_rows[static_cast<std::size_t>(k)] = r * batch + k;
  }
  Tensor slope = scale(sub(gather_rows(scores, plus_rows), gather_rows(scores, minus_rows)),
                       1.0 / (2.0 * step));
  Tensor per_direction = square(slope).reshape({batch, 1, r});
  return scale(mean_over_time(per_direction), static_cast<double>(d)).reshape({batch});
}

PenaltyTerms gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake,
                              const TrainConfig& cfg, Rng& rng) {
  if (real.shape() != fake.shape()) {
    throw DimensionError("gradient_penalty", "real " + shape_to_string(real.shape()) + " vs fake " +
                                                 shape_to_string(fake.shape()));
  }
  const Index batch = real.dim(0);
  const Index d = real.numel() / batch;
  VectorXd mixed(real.numel());
  for (Index b = 0; b < batch; ++b) {
    const double eps = uniform(rng, 0.0, 1.0);
    mixed.segment(b * d, d) = eps * real.data().segment(b * d, d) + (1.0 - eps) * fake.data().segment(b * d, d);
  }
  PenaltyTerms terms;
  terms.interpolant = Tensor::from(real.shape(), std::move(mixed));
  terms.grad_norm2 = estimate_grad_norm2(critic, terms.interpolant, cfg.fd_epsilon, cfg.fd_directions, rng);
  terms.penalty = mean(square(add_scalar(sqrt(terms.grad_norm2), -1.0)));
  return terms;
}

CriticLoss critic_loss(const Critic& critic, const Tensor& real, const Tensor& fake,
                       const TrainConfig& cfg, Rng& rng) {
  Tensor real_score = mean(critic(real));
  Tensor fake_score = mean(critic(fake));
  CriticLoss out;
  out.loss = sub(fake_score, real_score);
  out.gap = real_score.item() - fake_score.item();
  if (cfg.lambda_gp > 0.0) {
    PenaltyTerms gp = gradient_penalty(critic, real, fake, cfg, rng);
    out.penalty = gp.penalty.item();
    out.loss = add(out.loss, scale(gp.penalty, cfg.lambda_gp));
  }
  return out;
}

std::string metrics_to_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["recon"] = m.recon;
  j["codebook"] = m.codebook;
  j["commitment"] = m.commitment;
  j["adv_g"] = m.adv_g;
  j["d_gap"] = m.d_gap;
  j["gp"] = m.gp;
  j["d_loss"] = m.d_loss;
  j["g_loss"] = m.g_loss;
  j["perplexity"] = m.perplexity;
  return j.dump();
}

GeneratorPass run_generator(const Models& models, const Batch& batch) {
  GeneratorPass pass;
  pass.latent = quantize_straight_through(models.encoder(batch.mel), models.codebook);
  pass.reconstruction = models.decoder(pass.latent.z_q, models.speakers.lookup(batch.speakers));
  return pass;
}

GeneratorLoss generator_loss(const Batch& batch, const Models& models, const TrainConfig& cfg) {
  GeneratorLoss out;
  out.pass = run_generator(models, batch);
  out.recon = reconstruction_loss(batch.mel, out.pass.reconstruction, cfg.recon_loss);
  out.vq = vq_loss_terms(out.pass.latent.z_e, out.pass.latent.e);
  out.adversarial = scale(mean(models.discriminator(out.pass.reconstruction)), -1.0);
  out.total = add(add(add(out.recon, scale(out.vq.codebook_loss, cfg.w_codebook)),
                      scale(out.vq.commitment_loss, cfg.w_commit)),
                  scale(out.adversarial, cfg.w_adv));
  return out;
}

StepMetrics discriminator_step(const Batch& batch, Models& models, Adam& optimizer,
                               const TrainConfig& cfg, Rng& rng) {
  Tensor fake;
  {
    NoGradGuard no_grad;
    fake = run_generator(models, batch).reconstruction.detach_copy();
  }
  const Discriminator& disc = models.discriminator;
  Critic critic = [&disc](const Tensor& x) { return disc(x); };
  optimizer.zero_grad();
  CriticLoss loss = critic_loss(critic, batch.mel, fake, cfg, rng);
  backward(loss.loss);
  optimizer.step();
  StepMetrics m;
  m.d_gap = loss.gap;
  m.gp = loss.penalty;
  m.d_loss = loss.loss.item();
  return m;
}

namespace {

StepMetrics generator_metrics(const GeneratorLoss& loss, Index codebook_size) {
  StepMetrics m;
  m.recon = loss.recon.item();
  m.codebook = loss.vq.codebook_loss.item();
  m.commitment = loss.vq.commitment_loss.item();
  m.adv_g = loss.adversarial.item();
  m.g_loss = loss.total.item();
  m.perplexity = codebook_usage_stats(loss.pass.latent.indices, codebook_size).perplexity;
  return m;
}

}  // namespace

StepMetrics generator_step(const Batch& batch, Models& models, Adam& optimizer,
                           const TrainConfig& cfg) {
  FreezeGuard frozen(models.discriminator_parameters());
  optimizer.zero_grad();
  GeneratorLoss loss = generator_loss(batch, models, cfg);
  backward(loss.total);
  optimizer.step();
  return generator_metrics(loss, models.codebook.size());
}

StepMetrics evaluate_generator(const Batch& batch, const Models& models, const TrainConfig& cfg) {
  NoGradGuard no_grad;
  return generator_metrics(generator_loss(batch, models, cfg), models.codebook.size());
}

Trainer::Trainer(Corpus corpus, Config cfg)
    : corpus_(std::move(corpus)),
      cfg_((cfg.validate(), std::move(cfg))),
      models_(cfg_.network, corpus_speakers(corpus_), cfg_.train.codebook_size, cfg_.train.seed),
      g_opt_(tensors_of(models_.generator_parameters()),
             AdamOptions{cfg_.train.lr_g, cfg_.train.beta1, cfg_.train.beta2, 1e-8}),
      d_opt_(tensors_of(models_.discriminator_parameters()),
             AdamOptions{cfg_.train.lr_d, cfg_.train.beta1, cfg_.train.beta2, 1e-8}),
      rng_(cfg_.train.seed ^ kTrainStreamSalt) {
  for (const auto& u : corpus_) {
    if (u.frames.cols() != cfg_.network.mel_bins) {
      throw DimensionError("Trainer", 1, cfg_.network.mel_bins, u.frames.cols());
    }
  }
  if (cfg_.train.codebook_init == CodebookInit::KMeans) {
    Rng init_rng(cfg_.train.seed + 1);
    Batch first = sample_batch(corpus_, models_.speakers, cfg_.train.batch_size,
                               cfg_.train.crop_frames, init_rng);
    NoGradGuard no_grad;
    const RowMatrixXd samples = latent_rows(models_.encoder(first.mel));
    Codebook init = init_codebook(cfg_.train.codebook_size, cfg_.network.latent_dim,
                                  CodebookInit::KMeans, cfg_.train.seed + 2, samples);
    models_.codebook.assign(RowMatrixXd(init.matrix()));
  }
}

StepMetrics Trainer::step() {
  const TrainConfig& t = cfg_.train;
  StepMetrics critic;
  for (int i = 0; i < t.n_critic; ++i) {
    Batch batch = sample_batch(corpus_, models_.speakers, t.batch_size, t.crop_frames, rng_);
    critic = discriminator_step(batch, models_, d_opt_, t, rng_);
  }
  Batch batch = sample_batch(corpus_, models_.speakers, t.batch_size, t.crop_frames, rng_);
  StepMetrics m = generator_step(batch, models_, g_opt_, t);
  m.d_gap = critic.d_gap;
  m.gp = critic.gp;
  m.d_loss = critic.d_loss;
  m.step = ++step_;
  return m;
}

void Trainer::run(std::ostream* metrics_log, const std::filesystem::path& checkpoint_dir,
                  const std::function<void(const StepMetrics&)>& on_step) {
  const TrainConfig& t = cfg_.train;
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  auto checkpoint_path = [&](std::int64_t s) {
    return checkpoint_dir / ("step_" + std::to_string(s) + ".vqck");
  };
  while (step_ < t.max_steps) {
    StepMetrics m = step();
    if (metrics_log) *metrics_log << metrics_to_json(m) << '\n' << std::flush;
    if (on_step) on_step(m);
    if (!checkpoint_dir.empty() && t.checkpoint_every > 0 && step_ % t.checkpoint_every == 0) {
      save_checkpoint(checkpoint_path(step_));
    }
  }
  if (!checkpoint_dir.empty()) {
    if (!std::filesystem::exists(checkpoint_path(step_))) save_checkpoint(checkpoint_path(step_));
    save_checkpoint(checkpoint_dir / "final.vqck");
  }
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  CheckpointData data;
  data.config_text = format_config(cfg_);
  data.step = step_;
  std::ostringstream rng_state;
  rng_state << rng_;
  data.rng_state = rng_state.str();
  data.speakers = models_.speakers.ids();
  data.parameters = snapshot_parameters(models_.all_parameters());
  data.generator_optimizer = g_opt_.state();
  data.discriminator_optimizer = d_opt_.state();
  write_checkpoint(path, data);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  const Config stored = parse_config(data.config_text);
  std::vector<std::string> diff = config_diff(stored, cfg_, {"network"});
  if (stored.train.codebook_size != cfg_.train.codebook_size) {
    diff.push_back("train.codebook_size: checkpoint=" + std::to_string(stored.train.codebook_size) +
                   " requested=" + std::to_string(cfg_.train.codebook_size));
  }
  if (!diff.empty()) {
    std::string msg = "checkpoint " + path.string() + " is incompatible with the requested configuration:";
    for (const auto& line : diff) msg += "\n  " + line;
    throw ConfigError(msg);
  }
  if (data.speakers != models_.speakers.ids()) {
    throw ConfigError("checkpoint " + path.string() + " was trained on a different speaker set");
  }
  assign_parameters(models_.all_parameters(), data.parameters);
  g_opt_.load_state(data.generator_optimizer);
  d_opt_.load_state(data.discriminator_optimizer);
  std::istringstream rng_state(data.rng_state);
  rng_state >> rng_;
  if (!rng_state) throw FormatError("checkpoint " + path.string() + " has a corrupt RNG state");
  step_ = data.step;
}

}  // namespace vqphone
