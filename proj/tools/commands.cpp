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

#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vqphone/checkpoint.hpp"
#include "vqphone/features.hpp"
#include "vqphone/frontend.hpp"
#include "vqphone/phoneset.hpp"
#include "vqphone/trainer.hpp"
#include "vqphone/vq.hpp"
#include "vqphone/wav.hpp"

namespace fs = std::filesystem;

namespace vqphone::cli {

namespace {

constexpr const char* kConfigEcho = "config.ini";
constexpr const char* kManifest = "manifest.txt";
constexpr const char* kHashes = ".featurize_hashes";

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

fs::path output_dir(const Config& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("no output directory: pass --out or set paths.output_dir");
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

void echo_config(const fs::path& dir, const Config& cfg) { save_config(dir / kConfigEcho, cfg); }

AudioBuffer require_rate(AudioBuffer audio, const FrameParams& params, const fs::path& path) {
  if (audio.sample_rate != params.sample_rate) {
    throw FormatError(path.string() + ": sample rate " + std::to_string(audio.sample_rate) + " Hz, expected " +
                      std::to_string(params.sample_rate) + " Hz (frontend.sample_rate)");
  }
  return audio;
}

// Loads a VQPH file directly or featurizes a WAV with the given parameters.
MelSpectrogram load_input(const fs::path& path, const FrameParams& params) {
  if (is_feature_file(path)) return load_features(path);
  return mel_spectrogram(require_rate(load_wav(path), params, path), params, path.stem().string());
}

void require_bins(const MelSpectrogram& mel, const NetworkConfig& net, const fs::path& path) {
  if (mel.frames.cols() != net.mel_bins) {
    throw DimensionError("input " + path.string(),
                         "has " + std::to_string(mel.frames.cols()) + " mel bins, checkpoint expects " +
                             std::to_string(net.mel_bins));
  }
}

// Checkpoint config with only the runtime output location taken from the command line.
Config inference_config(const LoadedModel& model, const CommonOptions& common) {
  Config cfg = model.config;
  if (!common.out.empty()) cfg.output_dir = common.out;
  return cfg;
}

struct ManifestEntry {
  std::string speaker;
  std::string path;
};

std::map<std::string, ManifestEntry> read_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string id, speaker, file;
    if (fields >> id >> speaker >> file) out[id] = {speaker, file};
  }
  return out;
}

std::map<std::string, std::string> read_hashes(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string id, hash;
  while (in >> id >> hash) out[id] = hash;
  return out;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

Config effective_config(const CommonOptions& common) {
  Config cfg = common.config_path.empty() ? Config{} : load_config(common.config_path);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got \"" + kv + "\"");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.seed) cfg.train.seed = *common.seed;
  if (!common.out.empty()) cfg.output_dir = common.out;
  cfg.validate();
  return cfg;
}

int cmd_featurize(const CommonOptions& common, const FeaturizeOptions& opts) {
  const Config cfg = effective_config(common);
  const fs::path dir = output_dir(cfg);
  echo_config(dir, cfg);

  auto manifest = read_manifest(dir / kManifest);
  auto hashes = read_hashes(dir / kHashes);
  const std::uint64_t params_hash = fnv1a(format_config(Config{cfg.frontend, {}, {}, {}, {}}));

  int written = 0, skipped = 0, failed = 0;
  std::set<std::string> seen;
  for (const auto& input : opts.inputs) {
    const fs::path path(input);
    const std::string id = path.stem().string();
    try {
      if (!seen.insert(id).second) throw Error("duplicate utterance id " + id);
      std::string speaker = opts.speaker;
      if (speaker.empty()) speaker = fs::absolute(path).parent_path().filename().string();
      if (speaker.empty()) speaker = "unknown";
      const std::vector<char> bytes = read_bytes(path);
      const std::string hash = hex64(fnv1a(std::string_view(bytes.data(), bytes.size()), params_hash));
      const std::string file = id + ".vqph";
      auto known = hashes.find(id);
      if (known != hashes.end() && known->second == hash && fs::exists(dir / file) &&
          manifest.count(id) && manifest[id].speaker == speaker) {
        ++skipped;
        continue;
      }
      const MelSpectrogram mel = mel_spectrogram(require_rate(parse_wav(bytes), cfg.frontend, path), cfg.frontend, id);
      save_features(dir / file, mel);
      manifest[id] = {speaker, file};
      hashes[id] = hash;
      ++written;
    } catch (const Error& e) {
      std::cerr << "error: " << input << ": " << e.what() << '\n';
      ++failed;
    }
  }

  {
    std::ofstream out(dir / kManifest);
    for (const auto& [id, e] : manifest) out << id << ' ' << e.speaker << ' ' << e.path << '\n';
  }
  {
    std::ofstream out(dir / kHashes);
    for (const auto& [id, h] : hashes) out << id << ' ' << h << '\n';
  }
  std::cout << "featurized " << written << ", skipped " << skipped << ", failed " << failed << '\n';
  return failed ? kInputError : kOk;
}

int cmd_train(const CommonOptions& common, const TrainOptions& opts) {
  Config cfg = effective_config(common);
  if (!opts.manifest.empty()) cfg.manifest = opts.manifest;
  if (cfg.manifest.empty()) throw ConfigError("no corpus manifest: pass --manifest or set paths.manifest");
  if (!fs::exists(cfg.manifest)) throw Error("manifest not found: " + cfg.manifest);
  const fs::path dir = output_dir(cfg);
  echo_config(dir, cfg);

  Trainer trainer(load_corpus(cfg.manifest), cfg);
  std::ios::openmode mode = std::ios::trunc;
  if (!opts.resume.empty()) {
    trainer.load_checkpoint(opts.resume);
    mode = std::ios::app;
  }
  std::ofstream log(dir / "metrics.jsonl", mode);
  if (!log) throw Error("cannot write " + (dir / "metrics.jsonl").string());

  std::vector<StepMetrics> history;
  trainer.run(&log, dir / "checkpoints", [&](const StepMetrics& m) { history.push_back(m); });

  std::cout << "trained " << history.size() << " steps (now at step " << trainer.step_count() << ")\n";
  std::cout << std::left << std::setw(8) << "step" << std::setw(12) << "recon" << std::setw(12)
            << "commit" << std::setw(12) << "d_gap" << std::setw(12) << "gp" << "perplexity\n";
  const std::size_t stride = std::max<std::size_t>(1, history.size() / 10);
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i % stride != 0 && i + 1 != history.size()) continue;
    const StepMetrics& m = history[i];
    std::cout << std::left << std::setw(8) << m.step << std::setw(12) << fmt(m.recon) << std::setw(12)
              << fmt(m.commitment) << std::setw(12) << fmt(m.d_gap) << std::setw(12) << fmt(m.gp)
              << fmt(m.perplexity, 2) << '\n';
  }
  std::cout << "checkpoint: " << (dir / "checkpoints" / "final.vqck").string() << '\n';
  return kOk;
}

int cmd_tokenize(const CommonOptions& common, const TokenizeOptions& opts) {
  const LoadedModel model = load_model(opts.checkpoint);
  const Config cfg = inference_config(model, common);
  const fs::path dir = output_dir(cfg);
  echo_config(dir, cfg);

  std::vector<TokenSequence> sequences;
  for (const auto& input : opts.inputs) {
    MelSpectrogram mel = load_input(input, cfg.frontend);
    require_bins(mel, cfg.network, input);
    if (mel.utterance_id.empty()) mel.utterance_id = fs::path(input).stem().string();
    sequences.push_back(extract_tokens(mel, model.models->encoder, model.models->codebook));
  }
  std::ofstream out(dir / "tokens.txt");
  write_token_dump(out, sequences);
  std::cout << "wrote " << sequences.size() << " token sequences to " << (dir / "tokens.txt").string()
            << '\n';
  return kOk;
}

int cmd_reconstruct(const CommonOptions& common, const ReconstructOptions& opts) {
  const LoadedModel model = load_model(opts.checkpoint);
  const Config cfg = inference_config(model, common);
  const Models& m = *model.models;
  const Index speaker = m.speakers.index_of(opts.speaker);

  MelSpectrogram mel = load_input(opts.input, cfg.frontend);
  require_bins(mel, cfg.network, opts.input);
  if (mel.utterance_id.empty()) mel.utterance_id = fs::path(opts.input).stem().string();
  const fs::path dir = output_dir(cfg);
  echo_config(dir, cfg);

  MelSpectrogram out = mel;
  {
    NoGradGuard no_grad;
    Batch batch{stack_frames({&mel.frames}), {speaker}};
    const Tensor x_hat = run_generator(m, batch).reconstruction;
    const Index bins = x_hat.dim(1), frames = x_hat.dim(2);
    out.frames = ConstRowMatrixMap(x_hat.data().data(), bins, frames).transpose();
  }
  const std::string stem = mel.utterance_id + "_" + opts.speaker;
  save_features(dir / (stem + ".vqph"), out);
  std::cout << "wrote " << (dir / (stem + ".vqph")).string() << '\n';
  if (opts.write_wav) {
    write_wav(dir / (stem + ".wav"), griffin_lim_invert(out, opts.griffin_lim_iterations));
    std::cout << "wrote " << (dir / (stem + ".wav")).string() << '\n';
  }
  return kOk;
}

namespace {

bool looks_like_metrics(const fs::path& path) {
  std::ifstream in(path);
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  }
  return false;
}

void report_tokens(const std::vector<TokenSequence>& sequences, const fs::path* dir) {
  const UsageStats stats = codebook_usage_stats(sequences);
  if (stats.total == 0) throw Error("token dumps contain no tokens");
  std::cout << "utterances " << sequences.size() << ", tokens " << stats.total << ", codewords used ";
  std::size_t used = 0;
  for (auto c : stats.counts) used += c > 0;
  std::cout << used << "/" << stats.counts.size() << '\n';
  std::cout << "entropy " << fmt(stats.entropy) << " nats, perplexity " << fmt(stats.perplexity) << '\n';
  std::size_t peak = 1;
  for (auto c : stats.counts) peak = std::max(peak, c);
  for (std::size_t k = 0; k < stats.counts.size(); ++k) {
    if (stats.counts[k] == 0) continue;
    const auto bar = static_cast<std::size_t>(std::lround(40.0 * static_cast<double>(stats.counts[k]) /
                                                          static_cast<double>(peak)));
    std::cout << std::setw(5) << k << ' ' << std::setw(8) << stats.counts[k] << ' '
              << std::string(bar, '#') << '\n';
  }
  if (dir) {
    std::ofstream csv(*dir / "token_histogram.csv");
    csv << "token,count\n";
    for (std::size_t k = 0; k < stats.counts.size(); ++k) csv << k << ',' << stats.counts[k] << '\n';
  }
}

void report_metrics(const fs::path& path, const fs::path* dir) {
  static const char* kColumns[] = {"step", "recon", "codebook", "commitment", "adv_g",
                                   "d_gap", "gp", "d_loss", "g_loss", "perplexity"};
  std::ifstream in(path);
  std::string line;
  std::vector<nlohmann::json> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (rows.empty()) throw Error(path.string() + " contains no metrics");
  std::ostringstream csv;
  for (std::size_t c = 0; c < std::size(kColumns); ++c) csv << (c ? "," : "") << kColumns[c];
  csv << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < std::size(kColumns); ++c) {
      csv << (c ? "," : "");
      if (row.contains(kColumns[c])) csv << row[kColumns[c]].dump();
    }
    csv << '\n';
  }
  const auto& first = rows.front();
  const auto& last = rows.back();
  std::cout << path.string() << ": " << rows.size() << " steps\n";
  for (const char* key : {"recon", "commitment", "d_gap", "gp", "perplexity"}) {
    if (!first.contains(key) || !last.contains(key)) continue;
    std::cout << "  " << std::left << std::setw(12) << key << fmt(first[key].get<double>()) << " -> "
              << fmt(last[key].get<double>()) << '\n';
  }
  if (dir) {
    std::ofstream out(*dir / (path.stem().string() + ".csv"));
    out << csv.str();
  } else {
    std::cout << csv.str();
  }
}

}  // namespace

int cmd_stats(const CommonOptions& common, const StatsOptions& opts) {
  std::optional<fs::path> dir;
  if (!common.out.empty()) {
    const Config cfg = effective_config(common);
    dir = output_dir(cfg);
    echo_config(*dir, cfg);
  }
  std::vector<TokenSequence> sequences;
  bool any_tokens = false;
  for (const auto& input : opts.inputs) {
    if (!fs::exists(input)) throw Error("no such file: " + input);
    if (looks_like_metrics(input)) {
      report_metrics(input, dir ? &*dir : nullptr);
    } else {
      std::ifstream in(input);
      auto more = read_token_dump(in);
      sequences.insert(sequences.end(), more.begin(), more.end());
      any_tokens = true;
    }
  }
  if (any_tokens) report_tokens(sequences, dir ? &*dir : nullptr);
  return kOk;
}

int cmd_ipa(const CommonOptions& common, const IpaOptions& opts) {
  const MappingTable table = opts.table.empty() ? default_mapping_table() : load_mapping_table(opts.table);

  std::ifstream file;
  std::istream* in = &std::cin;
  if (!opts.input.empty() && opts.input != "-") {
    file.open(opts.input);
    if (!file) throw Error("cannot read " + opts.input);
    in = &file;
  }
  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (!common.out.empty()) {
    const Config cfg = effective_config(common);
    const fs::path dir = output_dir(cfg);
    echo_config(dir, cfg);
    out_file.open(dir / "ipa.txt");
    out = &out_file;
  }

  int errors = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(*in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      *out << '\n';
      continue;
    }
    try {
      *out << to_ipa(parse_arpabet(line), table).to_string() << '\n';
    } catch (const PhoneParseError& e) {
      std::cerr << "line " << line_no << ", token " << e.token_index() + 1 << ": " << e.what() << '\n';
      *out << '\n';
      ++errors;
    } catch (const Error& e) {
      std::cerr << "line " << line_no << ": " << e.what() << '\n';
      *out << '\n';
      ++errors;
    }
  }
  return errors ? kInputError : kOk;
}

}  // namespace vqphone::cli
