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

#include "vqphone/adam.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "vqphone/errors.hpp"

namespace vqphone {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)) {
  if (!(options.lr > 0)) throw ConfigError("Adam: learning rate must be positive");
  state_.options = options;
  for (const auto& p : params_) {
    state_.first_moment.push_back(VectorXd::Zero(p.numel()));
    state_.second_moment.push_back(VectorXd::Zero(p.numel()));
  }
}

void Adam::step() {
  const AdamOptions& o = state_.options;
  state_.step += 1;
  const double t = static_cast<double>(state_.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    VectorXd& m = state_.first_moment[i];
    VectorXd& v = state_.second_moment[i];
    if (p.has_grad()) {
      const VectorXd& g = p.mutable_grad();
      m = o.beta1 * m + (1.0 - o.beta1) * g;
      v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseAbs2();
    } else {
      m *= o.beta1;
      v *= o.beta2;
    }
    p.data().array() -=
        o.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + o.epsilon);
  }
}

void Adam::zero_grad() { vqphone::zero_grad(params_); }

void Adam::load_state(AdamState state) {
  if (state.first_moment.size() != params_.size() || state.second_moment.size() != params_.size()) {
    throw DimensionError("Adam::load_state", 0, static_cast<long>(params_.size()),
                         static_cast<long>(state.first_moment.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (state.first_moment[i].size() != params_[i].numel() ||
        state.second_moment[i].size() != params_[i].numel()) {
      throw DimensionError("Adam::load_state",
                           "moment buffer " + std::to_string(i) + " does not match parameter " +
                               shape_to_string(params_[i].shape()));
    }
  }
  state_ = std::move(state);
}

}  // namespace vqphone
