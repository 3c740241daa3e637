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

// Differentiable operations on Tensor. Layout convention for sequence data is
// B x C x T (batch, channel, time), row-major.

#include <vector>

#include "vqphone/tensor.hpp"

namespace vqphone {

// Elementwise arithmetic; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// Gradient uses max(sqrt(x), 1e-12) in the denominator.
Tensor sqrt(const Tensor& a);

// Reductions to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// 1-D convolution with stride 1 and zero "same" padding.
// input B x C_in x T, kernel C_out x C_in x k (k odd), bias C_out.
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

Tensor leaky_relu(const Tensor& x, double slope = 0.2);

// Gated linear unit over the channel axis of a B x 2C x T tensor: the first
// C channels are the content, the last C the gate.
Tensor glu(const Tensor& x);

// Normalizes each (batch, time) position over the channel axis, then applies
// per-channel gamma and beta. x is B x C x T, gamma and beta have C elements.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double epsilon = 1e-5);

// Forward identity, backward zero.
Tensor stop_gradient(const Tensor& x);

// Takes its forward value from `value` and passes the incoming gradient to `x`
// unchanged; nothing flows to `value`. This is x + sg(value - x) without the
// rounding of the sum, so the forward result equals `value` bit for bit.
Tensor straight_through(const Tensor& x, const Tensor& value);

// B x C1 x T and B x C2 x T -> B x (C1 + C2) x T.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Rows of an N x D table picked by `rows`: result is rows.size() x D.
Tensor gather_rows(const Tensor& table, const std::vector<Index>& rows);

// B x D -> B x D x T by repetition along time.
Tensor broadcast_time(const Tensor& x, Index frames);

// Codewords of a K x D table laid out as B x D x T, where indices holds the
// B*T codeword indices in (batch, time) order.
Tensor select_codewords(const Tensor& codebook, const std::vector<Index>& indices, Index batch,
                        Index frames);

// B x C x T -> B x C, averaging over time.
Tensor mean_over_time(const Tensor& x);

// mean((a - b)^2)
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace vqphone
