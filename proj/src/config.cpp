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

#include "vqphone/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

namespace vqphone {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

std::string format_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> parse_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

struct Field {
  const char* key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&, const std::string&)> set;
};

#define INT_FIELD(section, member)                                                           \
  Field {                                                                                    \
    #section "." #member, [](const Config& c) { return std::to_string(c.section.member); }, \
        [](Config& c, const std::string& k, const std::string& v) {                          \
          c.section.member = parse_number<int>(k, v);                                        \
        }                                                                                    \
  }
#define DOUBLE_FIELD(section, member)                                                        \
  Field {                                                                                    \
    #section "." #member, [](const Config& c) { return format_double(c.section.member); },  \
        [](Config& c, const std::string& k, const std::string& v) {                          \
          c.section.member = parse_number<double>(k, v);                                     \
        }                                                                                    \
  }
#define LIST_FIELD(section, member)                                                          \
  Field {                                                                                    \
    #section "." #member, [](const Config& c) { return format_list(c.section.member); },    \
        [](Config& c, const std::string& k, const std::string& v) {                          \
          c.section.member = parse_list(k, v);                                               \
        }                                                                                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      INT_FIELD(frontend, sample_rate),
      INT_FIELD(frontend, fft_size),
      INT_FIELD(frontend, hop),
      INT_FIELD(frontend, window),
      INT_FIELD(frontend, mel_bins),
      DOUBLE_FIELD(frontend, fmin),
      DOUBLE_FIELD(frontend, fmax),
      DOUBLE_FIELD(frontend, log_floor),
      INT_FIELD(network, mel_bins),
      LIST_FIELD(network, encoder_channels),
      INT_FIELD(network, latent_dim),
      LIST_FIELD(network, decoder_channels),
      LIST_FIELD(network, discriminator_channels),
      INT_FIELD(network, speaker_dim),
      INT_FIELD(network, blocks_per_layer),
      INT_FIELD(network, kernel_size),
      INT_FIELD(network, encoder_out_kernel),
      INT_FIELD(network, decoder_post_kernel),
      INT_FIELD(network, decoder_out_kernel),
      INT_FIELD(network, discriminator_out_kernel),
      DOUBLE_FIELD(network, leaky_slope),
      Field{"network.zero_init_residual",
            [](const Config& c) { return std::string(c.network.zero_init_residual ? "true" : "false"); },
            [](Config& c, const std::string& k, const std::string& v) {
              c.network.zero_init_residual = parse_bool(k, v);
            }},
      INT_FIELD(train, codebook_size),
      Field{"train.codebook_init",
            [](const Config& c) {
              return std::string(c.train.codebook_init == CodebookInit::KMeans ? "kmeans" : "uniform");
            },
            [](Config& c, const std::string& k, const std::string& v) {
              const std::string t = trim(v);
              if (t == "uniform") c.train.codebook_init = CodebookInit::Uniform;
              else if (t == "kmeans") c.train.codebook_init = CodebookInit::KMeans;
              else throw ConfigError("invalid value '" + v + "' for " + k + " (uniform|kmeans)");
            }},
      DOUBLE_FIELD(train, lambda_gp),
      INT_FIELD(train, n_critic),
      DOUBLE_FIELD(train, lr_g),
      DOUBLE_FIELD(train, lr_d),
      DOUBLE_FIELD(train, beta1),
      DOUBLE_FIELD(train, beta2),
      Field{"train.recon_loss",
            [](const Config& c) { return std::string(c.train.recon_loss == ReconLoss::L1 ? "l1" : "l2"); },
            [](Config& c, const std::string& k, const std::string& v) {
              const std::string t = trim(v);
              if (t == "l1" || t == "L1") c.train.recon_loss = ReconLoss::L1;
              else if (t == "l2" || t == "L2") c.train.recon_loss = ReconLoss::L2;
              else throw ConfigError("invalid value '" + v + "' for " + k + " (l1|l2)");
            }},
      DOUBLE_FIELD(train, w_codebook),
      DOUBLE_FIELD(train, w_commit),
      DOUBLE_FIELD(train, w_adv),
      INT_FIELD(train, batch_size),
      INT_FIELD(train, crop_frames),
      INT_FIELD(train, max_steps),
      Field{"train.seed", [](const Config& c) { return std::to_string(c.train.seed); },
            [](Config& c, const std::string& k, const std::string& v) {
              c.train.seed = parse_number<std::uint64_t>(k, v);
            }},
      DOUBLE_FIELD(train, fd_epsilon),
      INT_FIELD(train, fd_directions),
      INT_FIELD(train, checkpoint_every),
      Field{"paths.manifest", [](const Config& c) { return c.manifest; },
            [](Config& c, const std::string&, const std::string& v) { c.manifest = trim(v); }},
      Field{"paths.output_dir", [](const Config& c) { return c.output_dir; },
            [](Config& c, const std::string&, const std::string& v) { c.output_dir = trim(v); }},
  };
  return all;
}

#undef INT_FIELD
#undef DOUBLE_FIELD
#undef LIST_FIELD

}  // namespace

void TrainConfig::validate() const {
  if (codebook_size < 2) throw ConfigError("train.codebook_size must be >= 2");
  if (lambda_gp < 0 || w_codebook < 0 || w_commit < 0 || w_adv < 0) {
    throw ConfigError("train: loss weights must be non-negative");
  }
  if (n_critic < 1) throw ConfigError("train.n_critic must be >= 1");
  if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("train: learning rates must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (batch_size < 1 || crop_frames < 1) throw ConfigError("train: batch_size and crop_frames must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  if (!(fd_epsilon > 0)) throw ConfigError("train.fd_epsilon must be positive");
  if (fd_directions < 1) throw ConfigError("train.fd_directions must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

void Config::validate() const {
  frontend.validate();
  network.validate();
  train.validate();
  if (frontend.mel_bins != network.mel_bins) {
    throw ConfigError("frontend.mel_bins (" + std::to_string(frontend.mel_bins) +
                      ") must equal network.mel_bins (" + std::to_string(network.mel_bins) + ")");
  }
}

std::vector<std::pair<std::string, std::string>> flatten_config(const Config& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

void set_config_value(Config& cfg, const std::string& dotted_key, const std::string& value) {
  for (const auto& f : fields()) {
    if (dotted_key == f.key) {
      f.set(cfg, dotted_key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + dotted_key + "'");
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    try {
      set_config_value(cfg, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string format_config(const Config& cfg) {
  std::string out, section;
  for (const auto& [key, value] : flatten_config(cfg)) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

void save_config(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << format_config(cfg);
}

std::vector<std::string> config_diff(const Config& a, const Config& b,
                                     const std::vector<std::string>& sections) {
  const auto fa = flatten_config(a);
  const auto fb = flatten_config(b);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const std::string section = fa[i].first.substr(0, fa[i].first.find('.'));
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
    if (fa[i].second != fb[i].second) {
      out.push_back(fa[i].first + ": checkpoint=" + fa[i].second + " requested=" + fb[i].second);
    }
  }
  return out;
}

}  // namespace vqphone
