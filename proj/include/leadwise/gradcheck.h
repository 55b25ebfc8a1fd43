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

#ifndef LEADWISE_GRADCHECK_H_
#define LEADWISE_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "leadwise/layers.h"
#include "leadwise/tensor.h"

namespace leadwise::nn {

struct GradCheckOptions {
  // Base step of the central difference.
  double eps = 1e-4;
  // Richardson extrapolation levels over steps eps, eps/2, ...; each level
  // raises the truncation order by two. 0 is a plain central difference.
  int richardson_levels = 2;
  // Denominator floor: err = |a - n| / max(|a|, |n|, floor). Entries that
  // are structurally zero (e.g. attention key biases) show finite-difference
  // noise around 1e-10, which the floor keeps from dominating.
  double floor = 1e-5;
  // 0 checks every coordinate; otherwise at most this many per tensor,
  // sampled with `seed`.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Compares the reverse-mode gradient of `loss` (a deterministic closure that
// rebuilds the scalar from the current parameter values) with central
// differences, coordinate by coordinate.
// Rounding noise scales with |loss| / eps, so keep eps well above 1e-6
// when extrapolating.
GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<NamedTensor>& params,
                                const GradCheckOptions& options = {});

}  // namespace leadwise::nn

#endif  // LEADWISE_GRADCHECK_H_
