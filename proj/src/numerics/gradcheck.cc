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

#include "leadwise/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leadwise/rng.h"

namespace leadwise::nn {

GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<NamedTensor>& params,
                                const GradCheckOptions& options) {
  for (const NamedTensor& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const NamedTensor& p : params) {
    const auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.tensor.size(), 0.0);
  }

  GradCheckResult result;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor tensor = params[t].tensor;
    std::vector<std::size_t> coords(tensor.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 &&
        coords.size() > options.max_coords_per_tensor) {
      coords = rng.sample_without_replacement(tensor.size(),
                                              options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = tensor.mutable_values();
    for (std::size_t idx : coords) {
      const double saved = values[idx];
      auto central = [&](double h) {
        values[idx] = saved + h;
        const double plus = loss().item();
        values[idx] = saved - h;
        const double minus = loss().item();
        values[idx] = saved;
        return (plus - minus) / (2.0 * h);
      };
      // table[k] holds the level-k estimate at the finest step so far.
      std::vector<double> table;
      double h = options.eps;
      for (int level = 0; level <= options.richardson_levels; ++level, h /= 2) {
        double next = central(h);
        double factor = 4.0;
        for (std::size_t k = 0; k < table.size(); ++k, factor *= 4.0) {
          const double refined = (factor * next - table[k]) / (factor - 1.0);
          table[k] = next;
          next = refined;
        }
        table.push_back(next);
      }
      const double numeric = table.back();
      const double a = analytic[t][idx];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (err > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        if (err >= result.max_rel_error) {
          result.worst_tensor = params[t].name;
          result.worst_index = idx;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace leadwise::nn
