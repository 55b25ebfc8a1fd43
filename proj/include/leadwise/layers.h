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

// Parameter registry and the transformer building blocks shared by the ECG
// encoder, the reference text encoder and the cardiac query network.

#ifndef LEADWISE_LAYERS_H_
#define LEADWISE_LAYERS_H_

#include <cstddef>
#include <string>
#include <vector>

#include "leadwise/ops.h"
#include "leadwise/rng.h"
#include "leadwise/tensor.h"

namespace leadwise::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of trainable tensors. Registration order is the
// serialization order and the optimizer order.
class ParamStore {
 public:
  Tensor add_normal(const std::string& name, Shape shape, double stddev,
                    Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const std::vector<NamedTensor>& all() const { return params_; }
  std::vector<Tensor> tensors() const;
  // Throws std::out_of_range for unknown names.
  Tensor get(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<NamedTensor> params_;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(ParamStore& store, const std::string& prefix,
                       std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const {
    return add_rowwise(matmul(x, weight), bias);
  }
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;

  static LayerNorm create(ParamStore& store, const std::string& prefix,
                          std::size_t dim);
  Tensor operator()(const Tensor& x) const {
    return layer_norm(x, gamma, beta, eps);
  }
};

// Multi-head scaled dot-product attention assembled from primitives.
struct Attention {
  Linear query, key, value, output;
  std::size_t heads = 1;

  static Attention create(ParamStore& store, const std::string& prefix,
                          std::size_t dim, std::size_t kv_dim,
                          std::size_t heads, Rng& rng);
  // queries: [Nq x dim], context: [Nk x kv_dim] -> [Nq x dim]
  Tensor operator()(const Tensor& queries, const Tensor& context) const;
};

struct Mlp {
  Linear fc1, fc2;

  static Mlp create(ParamStore& store, const std::string& prefix,
                    std::size_t dim, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }
};

// Pre-norm encoder block: x + Attn(LN(x)), then x + MLP(LN(x)).
struct EncoderBlock {
  LayerNorm norm1, norm2;
  Attention attn;
  Mlp mlp;

  static EncoderBlock create(ParamStore& store, const std::string& prefix,
                             std::size_t dim, std::size_t heads,
                             std::size_t mlp_ratio, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

// Two-layer nonlinear projector: Linear -> GELU -> Linear.
struct Projector {
  Linear fc1, fc2;

  static Projector create(ParamStore& store, const std::string& prefix,
                          std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }
};

}  // namespace leadwise::nn

#endif  // LEADWISE_LAYERS_H_
