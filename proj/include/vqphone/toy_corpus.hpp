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

// Synthetic labelled mel corpus: a few spectral "phone" classes rendered by
// several speakers, each with its own spectral tilt and offset. Used by the
// acceptance suite and the CLI smoke tests.

#include <cstdint>
#include <vector>

#include "vqphone/trainer.hpp"

namespace vqphone {

struct ToyCorpusOptions {
  int speakers = 2;
  int classes = 4;
  int utterances = 200;
  int frames = 64;
  int mel_bins = 80;
  int min_segment = 8;
  int max_segment = 16;
  double noise = 0.05;
  std::uint64_t seed = 7;
};

struct ToyCorpus {
  Corpus corpus;
  // labels[u][t] is the class rendered at frame t of utterance u.
  std::vector<std::vector<int>> labels;
  // classes x mel_bins log-mel templates.
  RowMatrixXd templates;
};

ToyCorpus make_toy_corpus(const ToyCorpusOptions& options = {});

}  // namespace vqphone
