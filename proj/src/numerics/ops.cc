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

#include "leadwise/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace leadwise::nn {
namespace {

using detail::Node;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

// Resolves an axis against the matrix view; rank-1 tensors only have the
// column axis.
int resolve_axis(const Tensor& x, int axis, const char* op) {
  if (x.rank() <= 1) {
    require(axis == 0 || axis == -1,
            std::string(op) + ": invalid axis for rank-1 tensor");
    return 1;
  }
  require(axis >= -1 && axis <= 1, std::string(op) + ": invalid axis");
  return axis == -1 ? 1 : axis;
}

bool wants(const Node& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

// Calls fn(index_list) for each reduction line: a contiguous-or-strided set
// of element offsets for axis-wise ops on a rows x cols matrix.
template <typename Fn>
void for_each_line(std::size_t rows, std::size_t cols, int axis, Fn fn) {
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r * cols, std::size_t{1}, cols);
  } else {
    for (std::size_t c = 0; c < cols; ++c) fn(c, cols, rows);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 1 && b.rank() == 2,
          "matmul: expects rank-1/2 left and rank-2 right operand");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul: inner dimension mismatch " +
                             shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
  return Tensor::make_result(
      std::move(shape), std::move(out), {a, b}, [m, k, n](Node& self) {
        const double* g = self.grad.data();
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
          double* ga = pa.ensure_grad().data();
          const double* bv = pb.values.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = bv + p * n;
              const double* grow = g + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (pb.requires_grad) {
          double* gb = pb.ensure_grad().data();
          const double* av = pa.values.data();
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              double* gbrow = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    auto& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = self.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      const double sign = p == 0 ? 1.0 : -1.0;
      auto& g = self.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      const auto& other = self.parents[1 - p]->values;
      auto& g = self.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  require(bias.size() == n, "add_rowwise: bias length " +
                                std::to_string(bias.size()) +
                                " != columns " + std::to_string(n));
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, bias}, [m, n](Node& self) {
        if (wants(self, 0)) {
          auto& g = self.parents[0]->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self, 1)) {
          auto& g = self.parents[1]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
      });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [factor](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += factor * self.grad[i];
                             });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  require(gamma.size() == n && beta.size() == n,
          "layer_norm: affine parameters must match the last axis");
  std::vector<double> xhat(m * n), rstd(m), out(m * n);
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& gv = self.parents[1]->values;
        const double* g = self.grad.data();
        if (wants(self, 0)) {
          auto& gx = self.parents[0]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dy = g[i * n + j] * gv[j];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[i * n + j];
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double dy = g[i * n + j] * gv[j];
              gx[i * n + j] += rstd[i] * (dy - inv_n * sum_dy -
                                          xhat[i * n + j] * inv_n * sum_dy_xhat);
            }
          }
        }
        if (wants(self, 1)) {
          auto& gg = self.parents[1]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (wants(self, 2)) {
          auto& gb = self.parents[2]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      });
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xv = self.parents[0]->values;
    auto& g = self.parents[0]->ensure_grad();
    const double inv_sqrt_2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = xv[i] >= 0 ? 1.0 / (1.0 + std::exp(-xv[i]))
                        : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
  }
  return Tensor::make_result(x.shape(), out, {x},
                             [out](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += self.grad[i] * out[i] * (1.0 - out[i]);
                             });
}

Tensor softmax(const Tensor& x, int axis) {
  const int ax = resolve_axis(x, axis, "softmax");
  const std::size_t m = x.rows(), n = x.cols();
  require((ax == 1 ? n : m) > 0, "softmax: empty axis");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                              std::size_t len) {
    double mx = xv[start];
    for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, xv[start + t * stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t o = start + t * stride;
      out[o] = std::exp(xv[o] - mx);
      z += out[o];
    }
    for (std::size_t t = 0; t < len; ++t) out[start + t * stride] /= z;
  });
  return Tensor::make_result(
      x.shape(), out, {x}, [m, n, ax, out](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                                    std::size_t len) {
          double dot = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t o = start + t * stride;
            dot += self.grad[o] * out[o];
          }
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t o = start + t * stride;
            g[o] += out[o] * (self.grad[o] - dot);
          }
        });
      });
}

Tensor log_softmax(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  require(n > 0, "log_softmax: empty axis");
  const auto xv = x.values();
  std::vector<double> out(xv.size()), prob(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + n) - row);
    const double mx = row[arg];
    // log1p over the non-maximal terms keeps tiny losses accurate.
    double rest = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != arg) rest += std::exp(row[j] - mx);
    }
    const double log_z = std::log1p(rest);
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = (row[j] - mx) - log_z;
      prob[i * n + j] = std::exp(out[i * n + j]);
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [m, n, prob = std::move(prob)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j < n; ++j) total += self.grad[i * n + j];
          for (std::size_t j = 0; j < n; ++j)
            g[i * n + j] += self.grad[i * n + j] - prob[i * n + j] * total;
        }
      });
}

Tensor l2_normalize(const Tensor& x, int axis) {
  const int ax = resolve_axis(x, axis, "l2_normalize");
  const std::size_t m = x.rows(), n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> norms;
  for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                              std::size_t len) {
    double ss = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double v = xv[start + t * stride];
      ss += v * v;
    }
    const double norm = std::sqrt(ss);
    require(norm > 0.0, "l2_normalize: zero-norm vector");
    norms.push_back(norm);
    for (std::size_t t = 0; t < len; ++t)
      out[start + t * stride] = xv[start + t * stride] / norm;
  });
  return Tensor::make_result(
      x.shape(), out, {x},
      [m, n, ax, out, norms = std::move(norms)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        std::size_t line = 0;
        for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                                    std::size_t len) {
          double dot = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t o = start + t * stride;
            dot += self.grad[o] * out[o];
          }
          const double inv = 1.0 / norms[line++];
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t o = start + t * stride;
            g[o] += inv * (self.grad[o] - out[o] * dot);
          }
        });
      });
}

Tensor mean_pool(const Tensor& x, int axis) {
  const int ax = resolve_axis(x, axis, "mean_pool");
  const std::size_t m = x.rows(), n = x.cols();
  const std::size_t len = ax == 1 ? n : m;
  require(len > 0, "mean_pool: empty axis");
  const auto xv = x.values();
  std::vector<double> out;
  for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                              std::size_t count) {
    double s = 0.0;
    for (std::size_t t = 0; t < count; ++t) s += xv[start + t * stride];
    out.push_back(s / static_cast<double>(count));
  });
  const std::size_t out_len = out.size();
  return Tensor::make_result(
      {out_len}, std::move(out), {x}, [m, n, ax](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        std::size_t line = 0;
        for_each_line(m, n, ax, [&](std::size_t start, std::size_t stride,
                                    std::size_t count) {
          const double share = self.grad[line++] / static_cast<double>(count);
          for (std::size_t t = 0; t < count; ++t) g[start + t * stride] += share;
        });
      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor concat(std::span<const Tensor> pieces, int axis) {
  require(!pieces.empty(), "concat: no inputs");
  require(axis == 0 || axis == 1 || axis == -1, "concat: invalid axis");
  const bool by_rows = axis == 0;
  std::vector<Tensor> inputs(pieces.begin(), pieces.end());
  std::vector<double> out;
  std::vector<std::size_t> extents;
  if (by_rows) {
    const std::size_t n = inputs[0].cols();
    std::size_t total_rows = 0;
    for (const Tensor& t : inputs) {
      require(t.cols() == n && t.rank() >= 1,
              "concat(axis 0): column mismatch");
      total_rows += t.rows();
      extents.push_back(t.size());
      out.insert(out.end(), t.values().begin(), t.values().end());
    }
    return Tensor::make_result(
        {total_rows, n}, std::move(out), std::move(inputs),
        [extents](Node& self) {
          std::size_t offset = 0;
          for (std::size_t p = 0; p < extents.size(); ++p) {
            if (wants(self, p)) {
              auto& g = self.parents[p]->ensure_grad();
              for (std::size_t i = 0; i < extents[p]; ++i)
                g[i] += self.grad[offset + i];
            }
            offset += extents[p];
          }
        });
  }
  const std::size_t m = inputs[0].rows();
  std::size_t total_cols = 0;
  for (const Tensor& t : inputs) {
    require(t.rows() == m, "concat(axis 1): row mismatch");
    extents.push_back(t.cols());
    total_cols += t.cols();
  }
  out.assign(m * total_cols, 0.0);
  std::size_t col0 = 0;
  for (const Tensor& t : inputs) {
    const std::size_t w = t.cols();
    const auto v = t.values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * w, w, out.data() + i * total_cols + col0);
    col0 += w;
  }
  Shape shape = inputs[0].rank() == 1 ? Shape{total_cols} : Shape{m, total_cols};
  return Tensor::make_result(
      std::move(shape), std::move(out), std::move(inputs),
      [m, total_cols, extents](Node& self) {
        std::size_t c0 = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::size_t w = extents[p];
          if (wants(self, p)) {
            auto& g = self.parents[p]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j)
                g[i * w + j] += self.grad[i * total_cols + c0 + j];
          }
          c0 += w;
        }
      });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(indices.size() * n);
  const auto xv = x.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] < m, "gather_rows: index " + std::to_string(indices[r]) +
                                " out of range " + std::to_string(m));
    std::copy_n(xv.data() + indices[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result(
      {idx.size(), n}, std::move(out), {x}, [n, idx](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t j = 0; j < n; ++j)
            g[idx[r] * n + j] += self.grad[r * n + j];
      });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t m = x.rows(), n = x.cols();
  require(begin <= end && end <= n, "slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.data() + i * n + begin, w, out.data() + i * w);
  Shape shape = x.rank() == 1 ? Shape{w} : Shape{m, w};
  return Tensor::make_result(
      std::move(shape), std::move(out), {x}, [m, n, w, begin](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j)
            g[i * n + begin + j] += self.grad[i * w + j];
      });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> indices) {
  const std::size_t m = x.rows(), n = x.cols();
  require(indices.size() == m, "pick: need one index per row");
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    require(indices[i] < n, "pick: index out of range");
    out[i] = x.values()[i * n + indices[i]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result({m}, std::move(out), {x}, [n, idx](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      g[i * n + idx[i]] += self.grad[i];
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets) {
  require(logits.size() == targets.size() && !targets.empty(),
          "bce_with_logits: logits/targets length mismatch");
  const auto z = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += std::max(z[i], 0.0) - z[i] * targets[i] +
             std::log1p(std::exp(-std::abs(z[i])));
  }
  const double count = static_cast<double>(z.size());
  std::vector<double> y(targets.begin(), targets.end());
  return Tensor::make_result(
      {}, {total / count}, {logits}, [count, y](Node& self) {
        const auto& z = self.parents[0]->values;
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double p = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                     : std::exp(z[i]) / (1.0 + std::exp(z[i]));
          g[i] += self.grad[0] * (p - y[i]) / count;
        }
      });
}

}  // namespace leadwise::nn
