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

#ifndef LEADWISE_OPTIM_H_
#define LEADWISE_OPTIM_H_

#include <cstdint>
#include <vector>

#include "leadwise/tensor.h"

namespace leadwise::nn {

struct AdamWOptions {
  double lr = 2e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay:
//   p <- p - lr * wd * p
//   m <- b1 m + (1-b1) g ;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  // Applies one update from the accumulated gradients. Parameters without a
  // gradient are treated as having a zero gradient.
  void step();
  void zero_grad();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::int64_t step_count() const { return step_; }
  const AdamWOptions& options() const { return options_; }

  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_ = 0;
};

// Linear warmup from 0 to base_lr over warmup_steps, then half-cosine decay
// to 0 at total_steps. step is clamped to [0, total_steps].
double cosine_schedule(std::int64_t step, std::int64_t total_steps,
                       double base_lr, std::int64_t warmup_steps);

}  // namespace leadwise::nn

#endif  // LEADWISE_OPTIM_H_
