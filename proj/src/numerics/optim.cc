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

#include "leadwise/optim.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace leadwise::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamW::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    auto values = p.mutable_values();
    const auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      values[j] *= decay;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      values[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double cosine_schedule(std::int64_t step, std::int64_t total_steps,
                       double base_lr, std::int64_t warmup_steps) {
  step = std::clamp<std::int64_t>(step, 0, total_steps);
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  }
  const std::int64_t decay_steps = total_steps - warmup_steps;
  if (decay_steps <= 0) return base_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(decay_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace leadwise::nn
