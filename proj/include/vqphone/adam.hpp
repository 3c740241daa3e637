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

#include <cstdint>
#include <vector>

#include "vqphone/tensor.hpp"

namespace vqphone {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<VectorXd> first_moment;
  std::vector<VectorXd> second_moment;
};

// Adam with bias correction over a fixed list of parameter tensors. step()
// reads each parameter's accumulated gradient; a parameter without a gradient
// is treated as having a zero gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }
  const AdamState& state() const { return state_; }
  // Throws DimensionError when the moment buffers do not match the parameters.
  void load_state(AdamState state);

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace vqphone
