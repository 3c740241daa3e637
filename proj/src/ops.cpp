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

#include "vqphone/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vqphone/errors.hpp"

namespace vqphone {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor record(Shape shape, VectorXd value, const char* op, std::vector<NodePtr> inputs,
              std::function<void(Node&)> rule) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool needs = grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                                   [](const NodePtr& n) { return n->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->leaf = false;
    node->inputs = std::move(inputs);
    node->backward = std::move(rule);
  }
  return Tensor(std::move(node));
}

void accumulate_if(Node& input, const VectorXd& delta) {
  if (input.requires_grad) input.accumulate(delta);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank()) {
    throw DimensionError(op, "rank mismatch " + shape_to_string(a.shape()) + " vs " +
                                 shape_to_string(b.shape()));
  }
  for (int i = 0; i < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) throw DimensionError(op, i, a.dim(i), b.dim(i));
  }
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw DimensionError(op, "expected rank " + std::to_string(rank) + ", got " +
                                 shape_to_string(t.shape()));
  }
}

// Lays out the k shifted copies of each input channel as rows of a
// (C_in * k) x (B * T) matrix; zero outside [0, T).
RowMatrixXd im2col(const VectorXd& x, Index batch, Index channels, Index frames, Index k) {
  const Index pad = k / 2;
  RowMatrixXd cols = RowMatrixXd::Zero(channels * k, batch * frames);
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < channels; ++c) {
      const double* src = x.data() + (b * channels + c) * frames;
      for (Index j = 0; j < k; ++j) {
        const Index shift = j - pad;
        const Index t0 = std::max<Index>(0, -shift);
        const Index t1 = std::min<Index>(frames, frames - shift);
        if (t1 <= t0) continue;
        double* dst = cols.data() + (c * k + j) * cols.cols() + b * frames;
        std::copy(src + t0 + shift, src + t1 + shift, dst + t0);
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrixXd& cols, VectorXd& dx, Index batch, Index channels, Index frames,
                Index k) {
  const Index pad = k / 2;
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < channels; ++c) {
      double* dst = dx.data() + (b * channels + c) * frames;
      for (Index j = 0; j < k; ++j) {
        const Index shift = j - pad;
        const Index t0 = std::max<Index>(0, -shift);
        const Index t1 = std::min<Index>(frames, frames - shift);
        const double* src = cols.data() + (c * k + j) * cols.cols() + b * frames;
        for (Index t = t0; t < t1; ++t) dst[t + shift] += src[t];
      }
    }
  }
}

// B x C x T  <->  C x (B * T)
RowMatrixXd to_channel_major(const VectorXd& x, Index batch, Index channels, Index frames) {
  RowMatrixXd out(channels, batch * frames);
  for (Index b = 0; b < batch; ++b) {
    out.middleCols(b * frames, frames) =
        ConstRowMatrixMap(x.data() + b * channels * frames, channels, frames);
  }
  return out;
}

VectorXd from_channel_major(const RowMatrixXd& m, Index batch, Index channels, Index frames) {
  VectorXd out(batch * channels * frames);
  for (Index b = 0; b < batch; ++b) {
    RowMatrixMap(out.data() + b * channels * frames, channels, frames) =
        m.middleCols(b * frames, frames);
  }
  return out;
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return record(a.shape(), a.data() + b.data(), "add", {a.node(), b.node()}, [](Node& self) {
    accumulate_if(*self.inputs[0], self.grad);
    accumulate_if(*self.inputs[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return record(a.shape(), a.data() - b.data(), "sub", {a.node(), b.node()}, [](Node& self) {
    accumulate_if(*self.inputs[0], self.grad);
    accumulate_if(*self.inputs[1], -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return record(a.shape(), a.data().cwiseProduct(b.data()), "mul", {a.node(), b.node()},
                [](Node& self) {
                  Node& lhs = *self.inputs[0];
                  Node& rhs = *self.inputs[1];
                  if (lhs.requires_grad) lhs.accumulate(self.grad.cwiseProduct(rhs.value));
                  if (rhs.requires_grad) rhs.accumulate(self.grad.cwiseProduct(lhs.value));
                });
}

Tensor scale(const Tensor& a, double factor) {
  return record(a.shape(), a.data() * factor, "scale", {a.node()}, [factor](Node& self) {
    self.inputs[0]->accumulate(self.grad * factor);
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return record(a.shape(), a.data().array() + offset, "add_scalar", {a.node()},
                [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Tensor abs(const Tensor& a) {
  return record(a.shape(), a.data().cwiseAbs(), "abs", {a.node()}, [](Node& self) {
    const VectorXd& x = self.inputs[0]->value;
    VectorXd sign = x.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    self.inputs[0]->accumulate(self.grad.cwiseProduct(sign));
  });
}

Tensor square(const Tensor& a) {
  return record(a.shape(), a.data().cwiseAbs2(), "square", {a.node()}, [](Node& self) {
    self.inputs[0]->accumulate(2.0 * self.grad.cwiseProduct(self.inputs[0]->value));
  });
}

Tensor sqrt(const Tensor& a) {
  VectorXd root = a.data().cwiseMax(0.0).cwiseSqrt();
  return record(a.shape(), root, "sqrt", {a.node()}, [root](Node& self) {
    VectorXd denom = (2.0 * root.array().max(1e-12)).matrix();
    self.inputs[0]->accumulate(self.grad.cwiseQuotient(denom));
  });
}

Tensor sum(const Tensor& a) {
  return record({1}, VectorXd::Constant(1, a.data().sum()), "sum", {a.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(VectorXd::Constant(in.value.size(), self.grad[0]));
  });
}

Tensor mean(const Tensor& a) {
  const Index n = a.numel();
  if (n == 0) throw DimensionError("mean", "empty tensor");
  return record({1}, VectorXd::Constant(1, a.data().sum() / static_cast<double>(n)), "mean",
                {a.node()}, [n](Node& self) {
                  self.inputs[0]->accumulate(
                      VectorXd::Constant(n, self.grad[0] / static_cast<double>(n)));
                });
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_rank("conv1d", input, 3);
  require_rank("conv1d", kernel, 3);
  require_rank("conv1d", bias, 1);
  const Index batch = input.dim(0), in_ch = input.dim(1), frames = input.dim(2);
  const Index out_ch = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != in_ch) throw DimensionError("conv1d", 1, kernel.dim(1), in_ch);
  if (k % 2 == 0) throw DimensionError("conv1d", "kernel width must be odd, got " + std::to_string(k));
  if (bias.dim(0) != out_ch) throw DimensionError("conv1d", 0, out_ch, bias.dim(0));

  ConstRowMatrixMap weight(kernel.data().data(), out_ch, in_ch * k);
  RowMatrixXd out;
  if (k == 1) {
    out = weight * to_channel_major(input.data(), batch, in_ch, frames);
  } else {
    out = weight * im2col(input.data(), batch, in_ch, frames, k);
  }
  out.colwise() += bias.data();

  return record({batch, out_ch, frames}, from_channel_major(out, batch, out_ch, frames), "conv1d",
                {input.node(), kernel.node(), bias.node()},
                [batch, in_ch, out_ch, frames, k](Node& self) {
                  Node& x = *self.inputs[0];
                  Node& w = *self.inputs[1];
                  Node& b = *self.inputs[2];
                  const RowMatrixXd g = to_channel_major(self.grad, batch, out_ch, frames);
                  const RowMatrixXd cols =
                      k == 1 ? to_channel_major(x.value, batch, in_ch, frames)
                             : im2col(x.value, batch, in_ch, frames, k);
                  if (w.requires_grad) {
                    RowMatrixMap(w.grad_buffer().data(), out_ch, in_ch * k).noalias() +=
                        g * cols.transpose();
                  }
                  if (b.requires_grad) b.grad_buffer() += g.rowwise().sum();
                  if (x.requires_grad) {
                    ConstRowMatrixMap weight(w.value.data(), out_ch, in_ch * k);
                    const RowMatrixXd dcols = weight.transpose() * g;
                    VectorXd& dx = x.grad_buffer();
                    if (k == 1) {
                      dx += from_channel_major(dcols, batch, in_ch, frames);
                    } else {
                      col2im_add(dcols, dx, batch, in_ch, frames, k);
                    }
                  }
                });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  VectorXd y = x.data().unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  return record(x.shape(), std::move(y), "leaky_relu", {x.node()}, [slope](Node& self) {
    const VectorXd& v = self.inputs[0]->value;
    VectorXd d = v.unaryExpr([slope](double u) { return u > 0 ? 1.0 : slope; });
    self.inputs[0]->accumulate(self.grad.cwiseProduct(d));
  });
}

Tensor glu(const Tensor& x) {
  require_rank("glu", x, 3);
  const Index batch = x.dim(0), channels = x.dim(1), frames = x.dim(2);
  if (channels % 2 != 0) {
    throw DimensionError("glu", "channel count must be even, got " + std::to_string(channels));
  }
  const Index half = channels / 2, block = half * frames;
  VectorXd gate(batch * block);
  VectorXd y(batch * block);
  for (Index b = 0; b < batch; ++b) {
    const double* content = x.data().data() + b * 2 * block;
    const double* raw_gate = content + block;
    for (Index i = 0; i < block; ++i) {
      gate[b * block + i] = sigmoid(raw_gate[i]);
      y[b * block + i] = content[i] * gate[b * block + i];
    }
  }
  return record({batch, half, frames}, std::move(y), "glu", {x.node()},
                [batch, block, gate](Node& self) {
                  Node& in = *self.inputs[0];
                  VectorXd& dx = in.grad_buffer();
                  for (Index b = 0; b < batch; ++b) {
                    const double* content = in.value.data() + b * 2 * block;
                    double* d_content = dx.data() + b * 2 * block;
                    double* d_gate = d_content + block;
                    for (Index i = 0; i < block; ++i) {
                      const double s = gate[b * block + i];
                      const double g = self.grad[b * block + i];
                      d_content[i] += g * s;
                      d_gate[i] += g * content[i] * s * (1.0 - s);
                    }
                  }
                });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  require_rank("layer_norm", x, 3);
  const Index batch = x.dim(0), channels = x.dim(1), frames = x.dim(2);
  if (gamma.numel() != channels) throw DimensionError("layer_norm", 1, channels, gamma.numel());
  if (beta.numel() != channels) throw DimensionError("layer_norm", 1, channels, beta.numel());

  VectorXd normalized(x.numel());
  VectorXd inv_std(batch * frames);
  VectorXd y(x.numel());
  for (Index b = 0; b < batch; ++b) {
    ConstRowMatrixMap in(x.data().data() + b * channels * frames, channels, frames);
    RowMatrixMap xhat(normalized.data() + b * channels * frames, channels, frames);
    Eigen::RowVectorXd mu = in.colwise().mean();
    xhat = in.rowwise() - mu;
    Eigen::RowVectorXd var = xhat.array().square().colwise().mean();
    Eigen::RowVectorXd inv = (var.array() + epsilon).rsqrt();
    xhat = xhat.array().rowwise() * inv.array();
    inv_std.segment(b * frames, frames) = inv.transpose();
    RowMatrixMap out(y.data() + b * channels * frames, channels, frames);
    out = (xhat.array().colwise() * gamma.data().array()).colwise() + beta.data().array();
  }

  return record(x.shape(), std::move(y), "layer_norm", {x.node(), gamma.node(), beta.node()},
                [batch, channels, frames, normalized, inv_std](Node& self) {
                  Node& in = *self.inputs[0];
                  Node& g = *self.inputs[1];
                  Node& bt = *self.inputs[2];
                  const double c = static_cast<double>(channels);
                  for (Index b = 0; b < batch; ++b) {
                    const Index off = b * channels * frames;
                    ConstRowMatrixMap dy(self.grad.data() + off, channels, frames);
                    ConstRowMatrixMap xhat(normalized.data() + off, channels, frames);
                    if (g.requires_grad) {
                      g.grad_buffer() += dy.cwiseProduct(xhat).rowwise().sum();
                    }
                    if (bt.requires_grad) bt.grad_buffer() += dy.rowwise().sum();
                    if (in.requires_grad) {
                      RowMatrixXd dxhat = dy.array().colwise() * g.value.array();
                      Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
                      Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                      RowMatrixXd dx = (c * dxhat.array()).rowwise() - sum_d.array();
                      dx.array() -= xhat.array().rowwise() * sum_dx.array();
                      Eigen::RowVectorXd scale_row =
                          inv_std.segment(b * frames, frames).transpose() / c;
                      dx = dx.array().rowwise() * scale_row.array();
                      RowMatrixMap(in.grad_buffer().data() + off, channels, frames) += dx;
                    }
                  }
                });
}

Tensor stop_gradient(const Tensor& x) { return x.detach_copy(); }

Tensor straight_through(const Tensor& x, const Tensor& value) {
  require_same_shape("straight_through", x, value);
  return record(x.shape(), value.data(), "straight_through", {x.node()},
                [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank("concat_channels", a, 3);
  require_rank("concat_channels", b, 3);
  if (a.dim(0) != b.dim(0)) throw DimensionError("concat_channels", 0, a.dim(0), b.dim(0));
  if (a.dim(2) != b.dim(2)) throw DimensionError("concat_channels", 2, a.dim(2), b.dim(2));
  const Index batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), frames = a.dim(2);
  VectorXd y(batch * (ca + cb) * frames);
  for (Index i = 0; i < batch; ++i) {
    y.segment(i * (ca + cb) * frames, ca * frames) = a.data().segment(i * ca * frames, ca * frames);
    y.segment((i * (ca + cb) + ca) * frames, cb * frames) =
        b.data().segment(i * cb * frames, cb * frames);
  }
  return record({batch, ca + cb, frames}, std::move(y), "concat_channels", {a.node(), b.node()},
                [batch, ca, cb, frames](Node& self) {
                  Node& lhs = *self.inputs[0];
                  Node& rhs = *self.inputs[1];
                  for (Index i = 0; i < batch; ++i) {
                    if (lhs.requires_grad) {
                      lhs.grad_buffer().segment(i * ca * frames, ca * frames) +=
                          self.grad.segment(i * (ca + cb) * frames, ca * frames);
                    }
                    if (rhs.requires_grad) {
                      rhs.grad_buffer().segment(i * cb * frames, cb * frames) +=
                          self.grad.segment((i * (ca + cb) + ca) * frames, cb * frames);
                    }
                  }
                });
}

Tensor gather_rows(const Tensor& table, const std::vector<Index>& rows) {
  require_rank("gather_rows", table, 2);
  const Index n = table.dim(0), d = table.dim(1);
  const Index count = static_cast<Index>(rows.size());
  VectorXd y(count * d);
  for (Index i = 0; i < count; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= n) {
      throw DimensionError("gather_rows", "row " + std::to_string(r) + " outside table of " +
                                              std::to_string(n));
    }
    y.segment(i * d, d) = table.data().segment(r * d, d);
  }
  return record({count, d}, std::move(y), "gather_rows", {table.node()}, [rows, d](Node& self) {
    VectorXd& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g.segment(rows[i] * d, d) += self.grad.segment(static_cast<Index>(i) * d, d);
    }
  });
}

Tensor broadcast_time(const Tensor& x, Index frames) {
  require_rank("broadcast_time", x, 2);
  const Index batch = x.dim(0), d = x.dim(1);
  VectorXd y(batch * d * frames);
  for (Index i = 0; i < batch * d; ++i) y.segment(i * frames, frames).setConstant(x.data()[i]);
  return record({batch, d, frames}, std::move(y), "broadcast_time", {x.node()},
                [batch, d, frames](Node& self) {
                  VectorXd& g = self.inputs[0]->grad_buffer();
                  for (Index i = 0; i < batch * d; ++i) g[i] += self.grad.segment(i * frames, frames).sum();
                });
}

Tensor select_codewords(const Tensor& codebook, const std::vector<Index>& indices, Index batch,
                        Index frames) {
  require_rank("select_codewords", codebook, 2);
  if (static_cast<Index>(indices.size()) != batch * frames) {
    throw DimensionError("select_codewords", 0, batch * frames, static_cast<Index>(indices.size()));
  }
  const Index k = codebook.dim(0), d = codebook.dim(1);
  VectorXd y(batch * d * frames);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < frames; ++t) {
      const Index idx = indices[static_cast<std::size_t>(b * frames + t)];
      if (idx < 0 || idx >= k) {
        throw DimensionError("select_codewords", "index " + std::to_string(idx) +
                                                     " outside codebook of " + std::to_string(k));
      }
      for (Index c = 0; c < d; ++c) y[(b * d + c) * frames + t] = codebook.data()[idx * d + c];
    }
  }
  return record({batch, d, frames}, std::move(y), "select_codewords", {codebook.node()},
                [indices, batch, frames, d](Node& self) {
                  VectorXd& g = self.inputs[0]->grad_buffer();
                  for (Index b = 0; b < batch; ++b) {
                    for (Index t = 0; t < frames; ++t) {
                      const Index idx = indices[static_cast<std::size_t>(b * frames + t)];
                      for (Index c = 0; c < d; ++c) {
                        g[idx * d + c] += self.grad[(b * d + c) * frames + t];
                      }
                    }
                  }
                });
}

Tensor mean_over_time(const Tensor& x) {
  require_rank("mean_over_time", x, 3);
  const Index batch = x.dim(0), channels = x.dim(1), frames = x.dim(2);
  if (frames == 0) throw DimensionError("mean_over_time", "zero frames");
  VectorXd y(batch * channels);
  for (Index i = 0; i < batch * channels; ++i) {
    y[i] = x.data().segment(i * frames, frames).mean();
  }
  return record({batch, channels}, std::move(y), "mean_over_time", {x.node()},
                [batch, channels, frames](Node& self) {
                  VectorXd& g = self.inputs[0]->grad_buffer();
                  const double inv = 1.0 / static_cast<double>(frames);
                  for (Index i = 0; i < batch * channels; ++i) {
                    g.segment(i * frames, frames).array() += self.grad[i] * inv;
                  }
                });
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

}  // namespace vqphone
