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

// Common Eigen aliases. Frame matrices (spectrograms, filterbanks, codebooks)
// are row-major: one row is one frame or one codeword.

#include <Eigen/Dense>

namespace vqphone {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrix<double>;
using VectorXd = Eigen::VectorXd;

using RowMatrixMap = Eigen::Map<RowMatrixXd>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrixXd>;

}  // namespace vqphone
