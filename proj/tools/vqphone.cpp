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

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "vqphone/errors.hpp"
#include "vqphone/networks.hpp"
#include "vqphone/phoneset.hpp"
#include "vqphone/wav.hpp"

using namespace vqphone;

namespace {

void add_common(CLI::App* cmd, cli::CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "Config file (INI sections, key = value)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Override train.seed");
  cmd->add_option("--out", common.out, "Output directory");
  cmd->add_option("--set", common.overrides, "Override one config value, section.key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vqphone: unsupervised phonetic tokens from mel spectrograms"};
  app.require_subcommand(1);

  cli::CommonOptions common;

  cli::FeaturizeOptions featurize;
  auto* f = app.add_subcommand("featurize", "WAV files to VQPH log-mel feature files plus a manifest");
  add_common(f, common);
  f->add_option("inputs", featurize.inputs, "WAV files")->required();
  f->add_option("--speaker", featurize.speaker,
                "Speaker id for the manifest (default: parent directory name)");

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "Train encoder, codebook, decoder and critic");
  add_common(t, common);
  t->add_option("--manifest", train.manifest, "Corpus manifest (overrides the config)");
  t->add_option("--checkpoint", train.resume, "Resume from a VQCK checkpoint");

  cli::TokenizeOptions tokenize;
  auto* k = app.add_subcommand("tokenize", "Write one token per frame for each input");
  add_common(k, common);
  k->add_option("--checkpoint", tokenize.checkpoint, "VQCK checkpoint")->required();
  k->add_option("inputs", tokenize.inputs, "WAV or VQPH files")->required();

  cli::ReconstructOptions reconstruct;
  auto* r = app.add_subcommand("reconstruct", "Re-synthesize a mel spectrogram with a speaker code");
  add_common(r, common);
  r->add_option("--checkpoint", reconstruct.checkpoint, "VQCK checkpoint")->required();
  r->add_option("--speaker", reconstruct.speaker, "Target speaker id")->required();
  r->add_option("input", reconstruct.input, "WAV or VQPH file")->required();
  r->add_flag("--wav", reconstruct.write_wav, "Also write a Griffin-Lim waveform");
  r->add_option("--gl-iterations", reconstruct.griffin_lim_iterations, "Griffin-Lim iterations")
      ->check(CLI::PositiveNumber);

  cli::StatsOptions stats;
  auto* s = app.add_subcommand("stats", "Codebook usage of token dumps or loss curves of metrics logs");
  add_common(s, common);
  s->add_option("inputs", stats.inputs, "Token dumps or metrics.jsonl files")->required();

  cli::IpaOptions ipa;
  auto* p = app.add_subcommand("ipa", "ARPAbet lines to IPA");
  add_common(p, common);
  p->add_option("input", ipa.input, "Text file with one ARPAbet sequence per line (default stdin)");
  p->add_option("--table", ipa.table, "ARPAbet to IPA mapping file (default: bundled table)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (f->parsed()) return cli::cmd_featurize(common, featurize);
    if (t->parsed()) return cli::cmd_train(common, train);
    if (k->parsed()) return cli::cmd_tokenize(common, tokenize);
    if (r->parsed()) return cli::cmd_reconstruct(common, reconstruct);
    if (s->parsed()) return cli::cmd_stats(common, stats);
    if (p->parsed()) return cli::cmd_ipa(common, ipa);
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return cli::kInternalError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return cli::kInternalError;
  }
  return cli::kInternalError;
}
