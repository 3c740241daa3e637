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

// Adversarial VQ-VAE training: reconstruction + codebook + commitment losses
// for the generator (encoder, codebook, decoder, speaker codes) and a
// Wasserstein critic with gradient penalty for the discriminator.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vqphone/adam.hpp"
#include "vqphone/config.hpp"
#include "vqphone/networks.hpp"
#include "vqphone/random.hpp"
#include "vqphone/vq.hpp"

namespace vqphone {

struct Utterance {
  std::string id;
  std::string speaker;
  RowMatrixXd frames;  // T x mel_bins
};
using Corpus = std::vector<Utterance>;

// Manifest lines: "utterance_id speaker_id feature_path". Relative feature
// paths resolve against the manifest's directory.
Corpus load_corpus(const std::filesystem::path& manifest);
// Sorted, de-duplicated speaker ids.
std::vector<std::string> corpus_speakers(const Corpus& corpus);

// Everything that is trained. Parameters are created from a single seeded
// engine in a fixed order.
struct Models {
  Models(const NetworkConfig& cfg, const std::vector<std::string>& speaker_ids, int codebook_size,
         std::uint64_t seed);

  NetworkConfig config;
  Encoder encoder;
  Codebook codebook;
  Decoder decoder;
  SpeakerTable speakers;
  Discriminator discriminator;

  ParameterList generator_parameters() const;
  ParameterList discriminator_parameters() const;
  ParameterList all_parameters() const;

 private:
  Models(const NetworkConfig& cfg, const std::vector<std::string>& speaker_ids, int codebook_size,
         Rng&& rng);
};

struct Batch {
  Tensor mel;  // B x mel_bins x T, constant
  std::vector<Index> speakers;
};

// Stacks T x bins frame matrices (all with equal T) into a B x bins x T tensor.
Tensor stack_frames(const std::vector<const RowMatrixXd*>& frames);
// Random utterances (with replacement) and random crop offsets. Utterances
// shorter than the crop repeat their last frame.
Batch sample_batch(const Corpus& corpus, const SpeakerTable& speakers, int batch_size,
                   int crop_frames, Rng& rng);

// Mean absolute (L1) or squared (L2) error.
Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat, ReconLoss kind);

// Maps a batch of inputs to one score per batch element (shape {B}).
using Critic = std::function<Tensor(const Tensor&)>;

// Directional finite-difference estimate of the squared input-gradient norm
// per batch element:
//   g2_b = (d / r) * sum_i ((D(x + h u_i) - D(x - h u_i))_b / (2 h))^2
// with u_i random directions of unit norm within each batch element, d the
// element count per batch element, h = step and r = directions. The result is
// recorded on the tape and differentiable with respect to the critic's
// parameters.
Tensor estimate_grad_norm2(const Critic& critic, const Tensor& x, double step, int directions,
                           Rng& rng);

struct PenaltyTerms {
  Tensor penalty;      // mean_b (sqrt(g2_b) - 1)^2
  Tensor grad_norm2;   // g2_b, shape {B}
  Tensor interpolant;  // eps * real + (1 - eps) * fake, eps ~ U(0,1) per element
};

PenaltyTerms gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake,
                              const TrainConfig& cfg, Rng& rng);

// L_D = E[D(fake)] - E[D(real)] + lambda_gp * penalty. The penalty (and its
// random draws) is skipped when lambda_gp is zero.
struct CriticLoss {
  Tensor loss;
  double gap = 0.0;      // E[D(real)] - E[D(fake)]
  double penalty = 0.0;  // unweighted
};
CriticLoss critic_loss(const Critic& critic, const Tensor& real, const Tensor& fake,
                       const TrainConfig& cfg, Rng& rng);

struct StepMetrics {
  std::int64_t step = 0;
  double recon = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double adv_g = 0.0;    // -E[D(fake)] as seen by the generator
  double d_gap = 0.0;    // E[D(real)] - E[D(fake)] on the last critic step
  double gp = 0.0;       // unweighted penalty on the last critic step
  double d_loss = 0.0;
  double g_loss = 0.0;
  double perplexity = 1.0;
};

std::string metrics_to_json(const StepMetrics& m);

// Generator output for a batch: encoder -> quantizer -> decoder.
struct GeneratorPass {
  LatentSequence latent;
  Tensor reconstruction;
};
GeneratorPass run_generator(const Models& models, const Batch& batch);

// L_G = recon + w_codebook * codebook + w_commit * commitment - w_adv * E[D(G(z_q, y))].
struct GeneratorLoss {
  GeneratorPass pass;
  Tensor recon;
  VqLossTerms vq;
  Tensor adversarial;  // -E[D(reconstruction)]
  Tensor total;
};
GeneratorLoss generator_loss(const Batch& batch, const Models& models, const TrainConfig& cfg);

// One critic update. The generator runs without recording, so no generator
// parameter receives a gradient. Fills d_gap, gp and d_loss.
StepMetrics discriminator_step(const Batch& batch, Models& models, Adam& optimizer,
                               const TrainConfig& cfg, Rng& rng);

// One generator update with the critic frozen. Fills recon, codebook,
// commitment, adv_g, g_loss and perplexity.
StepMetrics generator_step(const Batch& batch, Models& models, Adam& optimizer,
                           const TrainConfig& cfg);

// Loss values of the generator objective without updating anything.
StepMetrics evaluate_generator(const Batch& batch, const Models& models, const TrainConfig& cfg);

class Trainer {
 public:
  Trainer(Corpus corpus, Config cfg);

  // n_critic critic steps followed by one generator step.
  StepMetrics step();
  // Runs until max_steps, appending one JSON line per step to `metrics_log`
  // and writing checkpoints into `checkpoint_dir` every checkpoint_every
  // steps and at the end (when the directory is non-empty).
  void run(std::ostream* metrics_log, const std::filesystem::path& checkpoint_dir = {},
           const std::function<void(const StepMetrics&)>& on_step = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores parameters, optimizer moments, RNG stream and step counter.
  // Throws ConfigError with a per-field diff when the checkpoint's network or
  // codebook settings differ from this trainer's.
  void load_checkpoint(const std::filesystem::path& path);

  std::int64_t step_count() const { return step_; }
  const Models& models() const { return models_; }
  Models& models() { return models_; }
  const Config& config() const { return cfg_; }
  const Corpus& corpus() const { return corpus_; }

 private:
  Corpus corpus_;
  Config cfg_;
  Models models_;
  Adam g_opt_;
  Adam d_opt_;
  Rng rng_;
  std::int64_t step_ = 0;
};

}  // namespace vqphone
