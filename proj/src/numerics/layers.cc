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

#include "leadwise/layers.h"

#include <cmath>
#include <stdexcept>

namespace leadwise::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  for (const NamedTensor& p : params_) {
    if (p.name == name) throw std::invalid_argument("duplicate parameter " + name);
  }
  params_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_normal(const std::string& name, Shape shape,
                              double stddev, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = stddev * rng.normal();
  return add(name, Tensor::from_values(std::move(shape), std::move(values),
                                       /*requires_grad=*/true));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape,
                                double value) {
  std::vector<double> values(shape_size(shape), value);
  return add(name, Tensor::from_values(std::move(shape), std::move(values),
                                       /*requires_grad=*/true));
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const NamedTensor& p : params_) out.push_back(p.tensor);
  return out;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const NamedTensor& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("unknown parameter " + name);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& p : params_) n += p.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (NamedTensor& p : params_) p.tensor.zero_grad();
}

Linear Linear::create(ParamStore& store, const std::string& prefix,
                      std::size_t in, std::size_t out, Rng& rng) {
  // Xavier-normal.
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  Linear l;
  l.weight = store.add_normal(prefix + ".weight", {in, out}, stddev, rng);
  l.bias = store.add_constant(prefix + ".bias", {out}, 0.0);
  return l;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& prefix,
                            std::size_t dim) {
  LayerNorm n;
  n.gamma = store.add_constant(prefix + ".gamma", {dim}, 1.0);
  n.beta = store.add_constant(prefix + ".beta", {dim}, 0.0);
  return n;
}

Attention Attention::create(ParamStore& store, const std::string& prefix,
                            std::size_t dim, std::size_t kv_dim,
                            std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument(prefix + ": dim " + std::to_string(dim) +
                                " not divisible by heads " +
                                std::to_string(heads));
  }
  Attention a;
  a.query = Linear::create(store, prefix + ".q", dim, dim, rng);
  a.key = Linear::create(store, prefix + ".k", kv_dim, dim, rng);
  a.value = Linear::create(store, prefix + ".v", kv_dim, dim, rng);
  a.output = Linear::create(store, prefix + ".o", dim, dim, rng);
  a.heads = heads;
  return a;
}

Tensor Attention::operator()(const Tensor& queries,
                             const Tensor& context) const {
  const Tensor q = query(queries);
  const Tensor k = key(context);
  const Tensor v = value(context);
  const std::size_t dim = q.cols();
  const std::size_t head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t b = h * head_dim, e = b + head_dim;
    const Tensor qh = slice_cols(q, b, e);
    const Tensor kh = slice_cols(k, b, e);
    const Tensor vh = slice_cols(v, b, e);
    const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  const Tensor merged = heads == 1 ? outs[0] : concat(outs, 1);
  return output(merged);
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::size_t dim,
                std::size_t hidden, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::create(store, prefix + ".fc1", dim, hidden, rng);
  m.fc2 = Linear::create(store, prefix + ".fc2", hidden, dim, rng);
  return m;
}

EncoderBlock EncoderBlock::create(ParamStore& store, const std::string& prefix,
                                  std::size_t dim, std::size_t heads,
                                  std::size_t mlp_ratio, Rng& rng) {
  EncoderBlock b;
  b.norm1 = LayerNorm::create(store, prefix + ".norm1", dim);
  b.attn = Attention::create(store, prefix + ".attn", dim, dim, heads, rng);
  b.norm2 = LayerNorm::create(store, prefix + ".norm2", dim);
  b.mlp = Mlp::create(store, prefix + ".mlp", dim, dim * mlp_ratio, rng);
  return b;
}

Tensor EncoderBlock::operator()(const Tensor& x) const {
  const Tensor h = norm1(x);
  const Tensor y = add(x, attn(h, h));
  return add(y, mlp(norm2(y)));
}

Projector Projector::create(ParamStore& store, const std::string& prefix,
                            std::size_t in, std::size_t out, Rng& rng) {
  Projector p;
  p.fc1 = Linear::create(store, prefix + ".fc1", in, out, rng);
  p.fc2 = Linear::create(store, prefix + ".fc2", out, out, rng);
  return p;
}

}  // namespace leadwise::nn
