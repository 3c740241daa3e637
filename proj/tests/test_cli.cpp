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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vqphone/config.hpp"
#include "vqphone/features.hpp"
#include "vqphone/frontend.hpp"
#include "vqphone/toy_corpus.hpp"
#include "vqphone/vq.hpp"
#include "vqphone/wav.hpp"

using namespace vqphone;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "vqphone_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run_cli(const std::string& args, const std::string& stdin_text = "") {
  static int counter = 0;
  const fs::path base = scratch() / ("run" + std::to_string(counter++));
  std::string cmd = quote(VQPHONE_CLI) + " " + args + " > " + quote(base.string() + ".out") + " 2> " +
                    quote(base.string() + ".err");
  if (!stdin_text.empty()) {
    std::ofstream(base.string() + ".in") << stdin_text;
    cmd += " < " + quote(base.string() + ".in");
  }
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base.string() + ".out");
  r.err = slurp(base.string() + ".err");
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

void write_tone(const fs::path& path, double hz, int samples) {
  AudioBuffer b;
  b.samples.resize(static_cast<std::size_t>(samples));
  for (int n = 0; n < samples; ++n) b.samples[static_cast<std::size_t>(n)] = 0.3 * std::sin(2.0 * M_PI * hz * n / 24000.0);
  write_wav(path, b);
}

// Small networks on 80-bin features, a handful of steps.
const char* kTinyConfig = R"(# tiny model for CLI tests
[network]
encoder_channels = 8,4,4,4
latent_dim = 4
decoder_channels = 4,4,8,4
discriminator_channels = 8,4,4,4
speaker_dim = 4

[train]
codebook_size = 8
batch_size = 4
crop_frames = 32
n_critic = 2
max_steps = 200
checkpoint_every = 100
lr_g = 0.001
)";

// Toy corpus written as feature files plus a manifest; shared by several cases.
fs::path toy_manifest() {
  static const fs::path manifest = [] {
    const fs::path dir = scratch() / "toy";
    fs::create_directories(dir);
    const ToyCorpus toy = make_toy_corpus();
    std::ofstream out(dir / "manifest.txt");
    for (const auto& u : toy.corpus) {
      MelSpectrogram mel;
      mel.frames = u.frames;
      mel.utterance_id = u.id;
      save_features(dir / (u.id + ".vqph"), mel);
      out << u.id << ' ' << u.speaker << ' ' << u.id << ".vqph\n";
    }
    std::ofstream(scratch() / "tiny.ini") << kTinyConfig;
    return dir / "manifest.txt";
  }();
  return manifest;
}

fs::path trained_checkpoint() {
  static const fs::path ckpt = [] {
    const fs::path out = scratch() / "train_a";
    const Run r = run_cli("train --config " + quote((scratch() / "tiny.ini").string()) + " --manifest " +
                          quote(toy_manifest().string()) + " --out " + quote(out.string()) + " --seed 3");
    INFO(r.err);
    REQUIRE(r.code == 0);
    return out / "checkpoints" / "final.vqck";
  }();
  return ckpt;
}

double l1(const RowMatrixXd& a, const RowMatrixXd& b) { return (a - b).cwiseAbs().mean(); }

}  // namespace

TEST_CASE("config files: defaults, overrides, unknown keys, echo round trip") {
  const Config defaults;
  CHECK(parse_config("") .train.codebook_size == defaults.train.codebook_size);
  const Config c = parse_config("[train]\nlambda_gp = 2.5\nseed = 9 ; comment\n[paths]\noutput_dir = x\n");
  CHECK(c.train.lambda_gp == 2.5);
  CHECK(c.train.seed == 9u);
  CHECK(c.output_dir == "x");
  CHECK_THROWS_AS(parse_config("[train]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nn_critic = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_critic = 1\n"), ConfigError);

  Config odd;
  odd.train.lr_g = 0.1 + 0.2;
  odd.network.encoder_channels = {3, 5};
  odd.train.codebook_init = CodebookInit::KMeans;
  const Config back = parse_config(format_config(odd));
  CHECK(back.train == odd.train);
  CHECK(back.network == odd.network);
  CHECK(back.frontend == odd.frontend);
  CHECK(config_diff(odd, back, {"network", "train", "frontend"}).empty());

  Config mismatch;
  mismatch.frontend.mel_bins = 40;
  CHECK_THROWS_AS(mismatch.validate(), ConfigError);
}

TEST_CASE("featurize: outputs, idempotent re-run, partial failure") {
  const fs::path in = scratch() / "wavs" / "spkA";
  fs::create_directories(in);
  for (int i = 0; i < 3; ++i) write_tone(in / ("u" + std::to_string(i) + ".wav"), 300.0 + 100 * i, 6000);
  const fs::path out = scratch() / "feats";
  std::string files;
  for (int i = 0; i < 3; ++i) files += " " + quote((in / ("u" + std::to_string(i) + ".wav")).string());

  Run r = run_cli("featurize --out " + quote(out.string()) + files);
  INFO(r.err);
  CHECK(r.code == 0);
  CHECK(lines_of(slurp(out / "manifest.txt")).size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(is_feature_file(out / ("u" + std::to_string(i) + ".vqph")));
  CHECK(fs::exists(out / "config.ini"));
  CHECK(lines_of(slurp(out / "manifest.txt"))[0] == "u0 spkA u0.vqph");
  const std::string manifest = slurp(out / "manifest.txt");
  const std::string features = slurp(out / "u1.vqph");

  r = run_cli("featurize --out " + quote(out.string()) + files);
  CHECK(r.code == 0);
  CHECK(r.out.find("skipped 3") != std::string::npos);
  CHECK(slurp(out / "manifest.txt") == manifest);
  CHECK(slurp(out / "u1.vqph") == features);

  const fs::path bad_dir = scratch() / "wavs2" / "spkB";
  fs::create_directories(bad_dir);
  write_tone(bad_dir / "a.wav", 200, 6000);
  write_tone(bad_dir / "b.wav", 250, 6000);
  std::ofstream(bad_dir / "c.wav") << "not a wav file";
  const fs::path out2 = scratch() / "feats2";
  r = run_cli("featurize --speaker s9 --out " + quote(out2.string()) + " " + quote((bad_dir / "a.wav").string()) +
              " " + quote((bad_dir / "c.wav").string()) + " " + quote((bad_dir / "b.wav").string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("c.wav") != std::string::npos);
  CHECK(lines_of(slurp(out2 / "manifest.txt")).size() == 2);
  CHECK(lines_of(slurp(out2 / "manifest.txt"))[0] == "a s9 a.vqph");

  AudioBuffer slow;
  slow.sample_rate = 16000;
  slow.samples.assign(4000, 0.1);
  write_wav(bad_dir / "slow.wav", slow);
  r = run_cli("featurize --out " + quote((scratch() / "feats3").string()) + " " + quote((bad_dir / "slow.wav").string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("16000") != std::string::npos);
}

TEST_CASE("train: smoke, determinism, missing manifest, bad config") {
  const fs::path ckpt = trained_checkpoint();
  CHECK(fs::exists(ckpt));
  const fs::path dir_a = ckpt.parent_path().parent_path();
  CHECK(fs::exists(dir_a / "checkpoints" / "step_100.vqck"));
  CHECK(fs::exists(dir_a / "config.ini"));
  const auto log_a = slurp(dir_a / "metrics.jsonl");
  CHECK(lines_of(log_a).size() == 200);

  const fs::path dir_b = scratch() / "train_b";
  Run r = run_cli("train --config " + quote((scratch() / "tiny.ini").string()) + " --manifest " +
                  quote(toy_manifest().string()) + " --out " + quote(dir_b.string()) + " --seed 3");
  CHECK(r.code == 0);
  CHECK(slurp(dir_b / "metrics.jsonl") == log_a);
  CHECK(r.out.find("perplexity") != std::string::npos);

  r = run_cli("train --manifest " + quote((scratch() / "nope.txt").string()) + " --out " +
              quote((scratch() / "train_c").string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("manifest") != std::string::npos);

  std::ofstream(scratch() / "bad.ini") << "[train]\nwhatever = 3\n";
  r = run_cli("train --config " + quote((scratch() / "bad.ini").string()) + " --manifest " +
              quote(toy_manifest().string()) + " --out " + quote((scratch() / "train_d").string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("whatever") != std::string::npos);
}

TEST_CASE("tokenize: WAV and VQPH inputs, determinism, one token per frame") {
  const fs::path ckpt = trained_checkpoint();
  const fs::path wav = scratch() / "tok.wav";
  write_tone(wav, 440.0, 9000);
  const fs::path feat = toy_manifest().parent_path() / "utt3.vqph";
  const fs::path out = scratch() / "tokens";
  const std::string args = "tokenize --checkpoint " + quote(ckpt.string()) + " --out " + quote(out.string()) + " " +
                           quote(feat.string()) + " " + quote(wav.string());
  Run r = run_cli(args);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string dump = slurp(out / "tokens.txt");
  CHECK(fs::exists(out / "config.ini"));
  std::istringstream in(dump);
  const auto seqs = read_token_dump(in);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].utterance_id == "utt3");
  CHECK(static_cast<Index>(seqs[0].indices.size()) == load_features(feat).num_frames());
  CHECK(static_cast<Index>(seqs[1].indices.size()) == frame_count(9000, FrameParams{}));
  for (const auto& s : seqs)
    for (Index k : s.indices) CHECK((k >= 0 && k < 8));

  r = run_cli(args);
  CHECK(r.code == 0);
  CHECK(slurp(out / "tokens.txt") == dump);

  r = run_cli("tokenize --checkpoint " + quote((scratch() / "missing.vqck").string()) + " --out " +
              quote(out.string()) + " " + quote(feat.string()));
  CHECK(r.code == 1);
}

TEST_CASE("reconstruct: shape, speaker conditioning, trained beats untrained") {
  const fs::path ckpt = trained_checkpoint();
  const fs::path feat = toy_manifest().parent_path() / "utt4.vqph";  // speaker spk0
  const MelSpectrogram input = load_features(feat);

  const fs::path out = scratch() / "recon";
  Run r = run_cli("reconstruct --checkpoint " + quote(ckpt.string()) + " --speaker spk0 --out " +
                  quote(out.string()) + " --wav " + quote(feat.string()));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const MelSpectrogram same = load_features(out / "utt4_spk0.vqph");
  CHECK(same.frames.rows() == input.frames.rows());
  CHECK(same.frames.cols() == input.frames.cols());
  CHECK(load_wav(out / "utt4_spk0.wav").samples.size() > 0);
  CHECK(fs::exists(out / "config.ini"));

  r = run_cli("reconstruct --checkpoint " + quote(ckpt.string()) + " --speaker spk1 --out " + quote(out.string()) +
              " " + quote(feat.string()));
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "utt4_spk1.vqph") != slurp(out / "utt4_spk0.vqph"));

  r = run_cli("reconstruct --checkpoint " + quote(ckpt.string()) + " --speaker carol --out " +
              quote(out.string()) + " " + quote(feat.string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("spk0") != std::string::npos);
  CHECK(r.err.find("spk1") != std::string::npos);

  const fs::path untrained_dir = scratch() / "train_zero";
  r = run_cli("train --config " + quote((scratch() / "tiny.ini").string()) + " --set train.max_steps=0 --manifest " +
              quote(toy_manifest().string()) + " --out " + quote(untrained_dir.string()) + " --seed 3");
  REQUIRE(r.code == 0);
  const fs::path out0 = scratch() / "recon0";
  r = run_cli("reconstruct --checkpoint " + quote((untrained_dir / "checkpoints" / "final.vqck").string()) +
              " --speaker spk0 --out " + quote(out0.string()) + " " + quote(feat.string()));
  REQUIRE(r.code == 0);
  const MelSpectrogram before = load_features(out0 / "utt4_spk0.vqph");
  CHECK(l1(same.frames, input.frames) < l1(before.frames, input.frames));
}

TEST_CASE("stats: perplexity, histogram totals, metrics CSV") {
  std::ofstream(scratch() / "same.txt") << "a 3 3 3 3\nb 3 3\n";
  Run r = run_cli("stats " + quote((scratch() / "same.txt").string()));
  CHECK(r.code == 0);
  CHECK(r.out.find("perplexity 1.0000") != std::string::npos);

  std::ofstream(scratch() / "mixed.txt") << "a 0 1 2 3\nb 1 1 7\n";
  const fs::path out = scratch() / "stats";
  r = run_cli("stats --out " + quote(out.string()) + " " + quote((scratch() / "mixed.txt").string()));
  CHECK(r.code == 0);
  const auto rows = lines_of(slurp(out / "token_histogram.csv"));
  long total = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) total += std::stol(rows[i].substr(rows[i].find(',') + 1));
  CHECK(total == 7);
  CHECK(fs::exists(out / "config.ini"));

  const fs::path log = trained_checkpoint().parent_path().parent_path() / "metrics.jsonl";
  r = run_cli("stats --out " + quote(out.string()) + " " + quote(log.string()));
  CHECK(r.code == 0);
  const auto csv = lines_of(slurp(out / "metrics.csv"));
  CHECK(csv.size() == lines_of(slurp(log)).size() + 1);
  CHECK(csv[0].rfind("step,recon,", 0) == 0);

  std::ofstream(scratch() / "empty.txt") << "";
  r = run_cli("stats " + quote((scratch() / "empty.txt").string()));
  CHECK(r.code == 1);
}

TEST_CASE("ipa: mapping, empty lines, diagnostics with line numbers") {
  Run r = run_cli("ipa", "HH AH0 L OW1\n\nK AE1 T\n");
  CHECK(r.code == 0);
  CHECK(r.out == "h ə l ˈoʊ\n\nk ˈæ t\n");

  r = run_cli("ipa", "HH AH0 L OW1\nB QQ1\nK AE1 T\n");
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(lines_of(r.out).size() == 3);
  CHECK(lines_of(r.out)[2] == "k ˈæ t");

  std::ofstream(scratch() / "table.tsv") << "AA\tA\n";
  r = run_cli("ipa --table " + quote((scratch() / "table.tsv").string()), "AA\n");
  CHECK(r.code == 1);
  CHECK(r.err.find("missing") != std::string::npos);
}

TEST_CASE("usage errors exit nonzero") {
  CHECK(run_cli("").code != 0);
  CHECK(run_cli("frobnicate").code != 0);
}
