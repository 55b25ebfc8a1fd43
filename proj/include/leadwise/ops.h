// Copyright 2026 The Leadwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable primitives. Every op records a backward closure on the tape
// when gradients are enabled and at least one input requires them.

#ifndef LEADWISE_OPS_H_
#define LEADWISE_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "leadwise/tensor.h"

namespace leadwise::nn {

// [m x k] * [k x n] -> [m x n]. A rank-1 left operand yields a rank-1 result.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a length-cols vector to every row.
Tensor add_rowwise(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double factor);

// Row-wise normalization over the last axis followed by gamma/beta affine.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Exact (erf) form.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// axis 0 reduces over rows, axis 1 (or -1) over columns. Rank-1 inputs only
// accept axis 0 / -1, which is their single axis.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x);  // last axis
Tensor l2_normalize(const Tensor& x, int axis = -1);

// Mean over one axis; result is rank 1.
Tensor mean_pool(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Pieces are rows (axis 0) or column blocks (axis 1). Rank-1 pieces count as
// a single row.
Tensor concat(std::span<const Tensor> pieces, int axis);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// out[r] = x[r, indices[r]].
Tensor pick(const Tensor& x, std::span<const std::size_t> indices);

// Mean binary cross-entropy on logits against {0,1} targets, computed in the
// stable form max(z,0) - z*y + log(1 + exp(-|z|)).
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets);

}  // namespace leadwise::nn

#endif  // LEADWISE_OPS_H_
