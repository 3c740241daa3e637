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

#include "vqphone/toy_corpus.hpp"

#include <cmath>
#include <numbers>

#include "vqphone/errors.hpp"
#include "vqphone/random.hpp"

namespace vqphone {

ToyCorpus make_toy_corpus(const ToyCorpusOptions& o) {
  if (o.speakers < 1 || o.classes < 1 || o.utterances < 1 || o.frames < 1 || o.mel_bins < 1) {
    throw ConfigError("toy corpus sizes must be positive");
  }
  if (o.min_segment < 1 || o.max_segment < o.min_segment) {
    throw ConfigError("toy corpus segment lengths must satisfy 1 <= min <= max");
  }
  Rng rng(o.seed);
  ToyCorpus out;
  const Index bins = o.mel_bins;

  // Each class is a pair of formant-like bumps on a low floor.
  out.templates = RowMatrixXd::Constant(o.classes, bins, -2.0);
  for (int c = 0; c < o.classes; ++c) {
    const double centre1 = (0.1 + 0.8 * (c + 0.5) / o.classes) * static_cast<double>(bins);
    const double centre2 = std::fmod(centre1 + 0.37 * static_cast<double>(bins), static_cast<double>(bins));
    const double width = 0.04 * static_cast<double>(bins) + 1.0;
    for (Index k = 0; k < bins; ++k) {
      const double kd = static_cast<double>(k);
      out.templates(c, k) += 2.0 * std::exp(-0.5 * std::pow((kd - centre1) / width, 2)) +
                             1.2 * std::exp(-0.5 * std::pow((kd - centre2) / width, 2));
    }
  }

  std::vector<VectorXd> colour;
  for (int s = 0; s < o.speakers; ++s) {
    const double tilt = uniform(rng, -0.6, 0.6);
    const double offset = uniform(rng, -0.3, 0.3);
    VectorXd v(bins);
    for (Index k = 0; k < bins; ++k) {
      v[k] = offset + tilt * (static_cast<double>(k) / static_cast<double>(bins) - 0.5);
    }
    colour.push_back(std::move(v));
  }

  for (int u = 0; u < o.utterances; ++u) {
    const int speaker = u % o.speakers;
    Utterance utt;
    utt.id = "utt" + std::to_string(u);
    utt.speaker = "spk" + std::to_string(speaker);
    utt.frames.resize(o.frames, bins);
    std::vector<int> labels(static_cast<std::size_t>(o.frames));
    int t = 0;
    int previous = -1;
    while (t < o.frames) {
      int cls = static_cast<int>(uniform_index(rng, o.classes));
      if (o.classes > 1 && cls == previous) cls = (cls + 1) % o.classes;
      previous = cls;
      const int len = o.min_segment +
                      static_cast<int>(uniform_index(rng, o.max_segment - o.min_segment + 1));
      for (int i = 0; i < len && t < o.frames; ++i, ++t) {
        utt.frames.row(t) = out.templates.row(cls) + colour[static_cast<std::size_t>(speaker)].transpose() +
                            o.noise * normal_vector(rng, bins).transpose();
        labels[static_cast<std::size_t>(t)] = cls;
      }
    }
    out.corpus.push_back(std::move(utt));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

}  // namespace vqphone
