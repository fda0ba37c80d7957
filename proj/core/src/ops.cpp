/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "voxsplat/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace voxsplat::ad {

bool g_corrupt_tanh_adjoint = false;

namespace {

std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

int64_t last_dim(const Tensor& a) { return a.shape().back(); }
int64_t row_count(const Tensor& a) { return a.numel() / last_dim(a); }

void accum_if(const NodePtr& n, const std::vector<double>& g) {
  if (n->requires_grad) n->accumulate(g.data(), static_cast<int64_t>(g.size()));
}

using Unary = double (*)(double);

Tensor elementwise_binary(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          void (*bwd)(double, double, double, double&, double&)) {
  check_same_shape(name, a, b);
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(a.data()[i], b.data()[i]);
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn, bwd, n](Node& self) {
    std::vector<double> ga(static_cast<size_t>(n)), gb(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      double da = 0, db = 0;
      bwd(an->data[static_cast<size_t>(i)], bn->data[static_cast<size_t>(i)],
          self.grad[static_cast<size_t>(i)], da, db);
      ga[static_cast<size_t>(i)] = da;
      gb[static_cast<size_t>(i)] = db;
    }
    accum_if(an, ga);
    accum_if(bn, gb);
  });
}

Tensor elementwise_unary(const Tensor& a, Unary fwd, double (*deriv)(double, double)) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(a.data()[i]);
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, deriv, n](Node& self) {
    std::vector<double> ga(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      ga[static_cast<size_t>(i)] =
          self.grad[static_cast<size_t>(i)] *
          deriv(an->data[static_cast<size_t>(i)], self.data[static_cast<size_t>(i)]);
    }
    accum_if(an, ga);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double g, double& da, double& db) {
        if (x <= y) {
          da = g;
        } else {
          db = g;
        }
      });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  const int64_t c = last_dim(a), rows = row_count(a);
  if (v.numel() != c) shape_error("add_rowvec", shape_str(a.shape()) + " + " + shape_str(v.shape()));
  std::vector<double> out(a.values());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] += v.data()[j];
  auto an = a.node(), vn = v.node();
  return make_op(a.shape(), std::move(out), {a, v}, [an, vn, rows, c](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad.data(), rows * c);
    if (vn->requires_grad) {
      std::vector<double> gv(static_cast<size_t>(c), 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) gv[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(r * c + j)];
      vn->accumulate(gv.data(), c);
    }
  });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
  const int64_t c = last_dim(a), rows = row_count(a);
  if (v.numel() != c) shape_error("mul_rowvec", shape_str(a.shape()) + " * " + shape_str(v.shape()));
  std::vector<double> out(a.values());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] *= v.data()[j];
  auto an = a.node(), vn = v.node();
  return make_op(a.shape(), std::move(out), {a, v}, [an, vn, rows, c](Node& self) {
    if (an->requires_grad) {
      std::vector<double> ga(static_cast<size_t>(rows * c));
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j)
          ga[static_cast<size_t>(r * c + j)] =
              self.grad[static_cast<size_t>(r * c + j)] * vn->data[static_cast<size_t>(j)];
      an->accumulate(ga.data(), rows * c);
    }
    if (vn->requires_grad) {
      std::vector<double> gv(static_cast<size_t>(c), 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j)
          gv[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(r * c + j)] *
                                        an->data[static_cast<size_t>(r * c + j)];
      vn->accumulate(gv.data(), c);
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& s) {
  const int64_t c = last_dim(a), rows = row_count(a);
  if (s.numel() != rows) shape_error("mul_col", shape_str(a.shape()) + " * " + shape_str(s.shape()));
  std::vector<double> out(a.values());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] *= s.data()[r];
  auto an = a.node(), sn = s.node();
  return make_op(a.shape(), std::move(out), {a, s}, [an, sn, rows, c](Node& self) {
    if (an->requires_grad) {
      std::vector<double> ga(static_cast<size_t>(rows * c));
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j)
          ga[static_cast<size_t>(r * c + j)] =
              self.grad[static_cast<size_t>(r * c + j)] * sn->data[static_cast<size_t>(r)];
      an->accumulate(ga.data(), rows * c);
    }
    if (sn->requires_grad) {
      std::vector<double> gs(static_cast<size_t>(rows), 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j)
          gs[static_cast<size_t>(r)] += self.grad[static_cast<size_t>(r * c + j)] *
                                        an->data[static_cast<size_t>(r * c + j)];
      sn->accumulate(gs.data(), rows);
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] * c;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, c, n](Node& self) {
    std::vector<double> ga(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] = self.grad[static_cast<size_t>(i)] * c;
    accum_if(an, ga);
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] + c;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, n](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad.data(), n);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
    shape_error("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(static_cast<size_t>(n * m), 0.0);
  const double* A = a.data();
  const double* B = b.data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * m;
      double* orow = out.data() + i * m;
      for (int64_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  auto an = a.node(), bn = b.node();
  return make_op({n, m}, std::move(out), {a, b}, [an, bn, n, k, m](Node& self) {
    const double* G = self.grad.data();
    if (an->requires_grad) {
      std::vector<double> ga(static_cast<size_t>(n * k), 0.0);
      // gA = G B^T
      for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < k; ++p) {
          double acc = 0;
          const double* brow = bn->data.data() + p * m;
          const double* grow = G + i * m;
          for (int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i * k + p)] = acc;
        }
      an->accumulate(ga.data(), n * k);
    }
    if (bn->requires_grad) {
      std::vector<double> gb(static_cast<size_t>(k * m), 0.0);
      // gB = A^T G
      for (int64_t i = 0; i < n; ++i) {
        const double* arow = an->data.data() + i * k;
        const double* grow = G + i * m;
        for (int64_t p = 0; p < k; ++p) {
          const double aip = arow[p];
          if (aip == 0.0) continue;
          double* brow = gb.data() + p * m;
          for (int64_t j = 0; j < m; ++j) brow[j] += aip * grow[j];
        }
      }
      bn->accumulate(gb.data(), k * m);
    }
  });
}

Tensor exp(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::exp(x); },
                           [](double, double y) { return y; });
}

Tensor tanh(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::tanh(x); },
                           [](double, double y) {
                             double d = 1.0 - y * y;
                             return g_corrupt_tanh_adjoint ? 1.1 * d : d;
                           });
}

Tensor softplus(const Tensor& a) {
  return elementwise_unary(a,
                           [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                           [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                           [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return x > 0 ? x : 0.0; },
                           [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::fabs(x); },
                           [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double x = a.data()[i];
    out[static_cast<size_t>(i)] = x < lo ? lo : (x > hi ? hi : x);
  }
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, lo, hi, n](Node& self) {
    std::vector<double> ga(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      double x = an->data[static_cast<size_t>(i)];
      if (x > lo && x < hi) ga[static_cast<size_t>(i)] = self.grad[static_cast<size_t>(i)];
    }
    accum_if(an, ga);
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0;
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) acc += a.data()[i];
  auto an = a.node();
  return make_op({1}, {acc}, {a}, [an, n](Node& self) {
    std::vector<double> ga(static_cast<size_t>(n), self.grad[0]);
    accum_if(an, ga);
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, std::vector<int64_t> shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  if (n != a.numel()) shape_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  auto an = a.node();
  return make_op(std::move(shape), a.values(), {a}, [an](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad.data(), self.numel());
  });
}

Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  const int64_t c = last_dim(a), rows = row_count(a);
  if (c0 < 0 || c1 > c || c0 >= c1) shape_error("slice_cols", "bad range on " + shape_str(a.shape()));
  const int64_t w = c1 - c0;
  std::vector<double> out(static_cast<size_t>(rows * w));
  for (int64_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * w, a.data() + r * c + c0, static_cast<size_t>(w) * sizeof(double));
  std::vector<int64_t> shape(a.shape());
  shape.back() = w;
  auto an = a.node();
  return make_op(std::move(shape), std::move(out), {a}, [an, rows, c, c0, w](Node& self) {
    if (!an->requires_grad) return;
    double* g = an->grad_data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < w; ++j) g[r * c + c0 + j] += self.grad[static_cast<size_t>(r * w + j)];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const int64_t rows = row_count(parts[0]);
  int64_t total = 0;
  for (const Tensor& p : parts) {
    if (row_count(p) != rows) shape_error("concat_cols", "row mismatch");
    total += last_dim(p);
  }
  std::vector<double> out(static_cast<size_t>(rows * total));
  int64_t off = 0;
  for (const Tensor& p : parts) {
    const int64_t w = last_dim(p);
    for (int64_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total + off, p.data() + r * w, static_cast<size_t>(w) * sizeof(double));
    off += w;
  }
  std::vector<NodePtr> nodes;
  std::vector<int64_t> widths;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(last_dim(p));
  }
  return make_op({rows, total}, std::move(out), parts, [nodes, widths, rows, total](Node& self) {
    int64_t off2 = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      const int64_t w = widths[k];
      if (nodes[k]->requires_grad) {
        double* g = nodes[k]->grad_data();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < w; ++j) g[r * w + j] += self.grad[static_cast<size_t>(r * total + off2 + j)];
      }
      off2 += w;
    }
  });
}

Tensor index_rows(const Tensor& a, const std::vector<int64_t>& idx) {
  const int64_t c = last_dim(a), rows = row_count(a);
  const int64_t m = static_cast<int64_t>(idx.size());
  std::vector<double> out(static_cast<size_t>(m * c));
  for (int64_t r = 0; r < m; ++r) {
    if (idx[static_cast<size_t>(r)] < 0 || idx[static_cast<size_t>(r)] >= rows)
      shape_error("index_rows", "index out of range");
    std::memcpy(out.data() + r * c, a.data() + idx[static_cast<size_t>(r)] * c,
                static_cast<size_t>(c) * sizeof(double));
  }
  std::vector<int64_t> shape(a.shape());
  shape[0] = m;
  if (shape.size() == 1) shape = {m};
  auto an = a.node();
  return make_op(std::move(shape), std::move(out), {a}, [an, idx, c, m](Node& self) {
    if (!an->requires_grad) return;
    double* g = an->grad_data();
    for (int64_t r = 0; r < m; ++r)
      for (int64_t j = 0; j < c; ++j) g[idx[static_cast<size_t>(r)] * c + j] += self.grad[static_cast<size_t>(r * c + j)];
  });
}

Tensor rownormalize(const Tensor& a, const std::vector<double>& fallback) {
  const int64_t c = last_dim(a), rows = row_count(a);
  if (static_cast<int64_t>(fallback.size()) != c) shape_error("rownormalize", "fallback width mismatch");
  std::vector<double> out(static_cast<size_t>(rows * c));
  std::vector<double> norms(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    double n2 = 0;
    for (int64_t j = 0; j < c; ++j) n2 += a.data()[r * c + j] * a.data()[r * c + j];
    const double n = std::sqrt(n2);
    norms[static_cast<size_t>(r)] = n;
    if (n < 1e-8) {
      for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] = fallback[static_cast<size_t>(j)];
    } else {
      for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] = a.data()[r * c + j] / n;
    }
  }
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, norms, rows, c](Node& self) {
    if (!an->requires_grad) return;
    std::vector<double> ga(static_cast<size_t>(rows * c), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
      const double n = norms[static_cast<size_t>(r)];
      if (n < 1e-8) continue;
      // d/dx (x/|x|) = (I - y y^T)/|x| with y = x/|x|
      double dot = 0;
      for (int64_t j = 0; j < c; ++j)
        dot += self.grad[static_cast<size_t>(r * c + j)] * self.data[static_cast<size_t>(r * c + j)];
      for (int64_t j = 0; j < c; ++j)
        ga[static_cast<size_t>(r * c + j)] =
            (self.grad[static_cast<size_t>(r * c + j)] - dot * self.data[static_cast<size_t>(r * c + j)]) / n;
    }
    an->accumulate(ga.data(), rows * c);
  });
}

Tensor stop_gradient(const Tensor& a) {
  return Tensor(a.shape(), a.values(), false);
}

Tensor box_filter3(const Tensor& a) {
  if (a.shape().size() != 3) shape_error("box_filter3", "expected [H,W,C], got " + shape_str(a.shape()));
  const int64_t h = a.dim(0), w = a.dim(1), c = a.dim(2);
  auto apply = [h, w, c](const double* src, double* dst) {
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        for (int64_t k = 0; k < c; ++k) {
          double acc = 0;
          for (int64_t di = -1; di <= 1; ++di)
            for (int64_t dj = -1; dj <= 1; ++dj) {
              const int64_t ii = i + di, jj = j + dj;
              if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
              acc += src[(ii * w + jj) * c + k];
            }
          dst[(i * w + j) * c + k] = acc / 9.0;
        }
  };
  std::vector<double> out(static_cast<size_t>(h * w * c));
  apply(a.data(), out.data());
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, apply, h, w, c](Node& self) {
    if (!an->requires_grad) return;
    // The kernel is symmetric with zero padding, so the adjoint is the filter.
    std::vector<double> ga(static_cast<size_t>(h * w * c));
    apply(self.grad.data(), ga.data());
    an->accumulate(ga.data(), h * w * c);
  });
}

Tensor bilinear_sample(const Tensor& img, const Tensor& uv, std::vector<unsigned char>* valid) {
  if (img.shape().size() != 3) shape_error("bilinear_sample", "image must be [H,W,C]");
  if (uv.shape().size() != 2 || uv.dim(1) != 2) shape_error("bilinear_sample", "uv must be [M,2]");
  const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2), m = uv.dim(0);
  if (valid) valid->assign(static_cast<size_t>(m), 0);
  std::vector<double> out(static_cast<size_t>(m * c), 0.0);
  const double* I = img.data();
  for (int64_t s = 0; s < m; ++s) {
    const double xf = uv.data()[s * 2 + 0] - 0.5;
    const double yf = uv.data()[s * 2 + 1] - 0.5;
    const int64_t x0 = static_cast<int64_t>(std::floor(xf));
    const int64_t y0 = static_cast<int64_t>(std::floor(yf));
    const double dx = xf - static_cast<double>(x0);
    const double dy = yf - static_cast<double>(y0);
    if (valid && x0 >= 0 && x0 + 1 <= w - 1 && y0 >= 0 && y0 + 1 <= h - 1)
      (*valid)[static_cast<size_t>(s)] = 1;
    const double wgt[4] = {(1 - dx) * (1 - dy), dx * (1 - dy), (1 - dx) * dy, dx * dy};
    const int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int q = 0; q < 4; ++q) {
      if (xs[q] < 0 || xs[q] >= w || ys[q] < 0 || ys[q] >= h || wgt[q] == 0.0) continue;
      const double* px = I + (ys[q] * w + xs[q]) * c;
      for (int64_t k = 0; k < c; ++k) out[static_cast<size_t>(s * c + k)] += wgt[q] * px[k];
    }
  }
  auto in = img.node(), un = uv.node();
  return make_op({m, c}, std::move(out), {img, uv}, [in, un, h, w, c, m](Node& self) {
    std::vector<double> gimg;
    std::vector<double> guv;
    if (in->requires_grad) gimg.assign(static_cast<size_t>(h * w * c), 0.0);
    if (un->requires_grad) guv.assign(static_cast<size_t>(m * 2), 0.0);
    const double* I = in->data.data();
    for (int64_t s = 0; s < m; ++s) {
      const double xf = un->data[static_cast<size_t>(s * 2 + 0)] - 0.5;
      const double yf = un->data[static_cast<size_t>(s * 2 + 1)] - 0.5;
      const int64_t x0 = static_cast<int64_t>(std::floor(xf));
      const int64_t y0 = static_cast<int64_t>(std::floor(yf));
      const double dx = xf - static_cast<double>(x0);
      const double dy = yf - static_cast<double>(y0);
      const double wgt[4] = {(1 - dx) * (1 - dy), dx * (1 - dy), (1 - dx) * dy, dx * dy};
      const double dwdx[4] = {-(1 - dy), (1 - dy), -dy, dy};
      const double dwdy[4] = {-(1 - dx), -dx, (1 - dx), dx};
      const int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int q = 0; q < 4; ++q) {
        if (xs[q] < 0 || xs[q] >= w || ys[q] < 0 || ys[q] >= h) continue;
        const int64_t base = (ys[q] * w + xs[q]) * c;
        for (int64_t k = 0; k < c; ++k) {
          const double g = self.grad[static_cast<size_t>(s * c + k)];
          if (g == 0.0) continue;
          if (!gimg.empty()) gimg[static_cast<size_t>(base + k)] += g * wgt[q];
          if (!guv.empty()) {
            guv[static_cast<size_t>(s * 2 + 0)] += g * dwdx[q] * I[base + k];
            guv[static_cast<size_t>(s * 2 + 1)] += g * dwdy[q] * I[base + k];
          }
        }
      }
    }
    if (!gimg.empty()) in->accumulate(gimg.data(), h * w * c);
    if (!guv.empty()) un->accumulate(guv.data(), m * 2);
  });
}

Tensor trilinear_sample(const Tensor& vol, const Tensor& coords) {
  if (vol.shape().size() != 4) shape_error("trilinear_sample", "volume must be [X,Y,Z,C]");
  if (coords.shape().size() != 2 || coords.dim(1) != 3)
    shape_error("trilinear_sample", "coords must be [M,3]");
  const int64_t nx = vol.dim(0), ny = vol.dim(1), nz = vol.dim(2), c = vol.dim(3);
  const int64_t m = coords.dim(0);
  std::vector<double> out(static_cast<size_t>(m * c), 0.0);
  const double* V = vol.data();
  auto cell = [&](int64_t x, int64_t y, int64_t z) { return ((x * ny + y) * nz + z) * c; };
  for (int64_t s = 0; s < m; ++s) {
    const double* p = coords.data() + s * 3;
    const int64_t x0 = static_cast<int64_t>(std::floor(p[0]));
    const int64_t y0 = static_cast<int64_t>(std::floor(p[1]));
    const int64_t z0 = static_cast<int64_t>(std::floor(p[2]));
    const double dx = p[0] - static_cast<double>(x0);
    const double dy = p[1] - static_cast<double>(y0);
    const double dz = p[2] - static_cast<double>(z0);
    for (int q = 0; q < 8; ++q) {
      const int64_t xi = x0 + (q & 1), yi = y0 + ((q >> 1) & 1), zi = z0 + ((q >> 2) & 1);
      if (xi < 0 || xi >= nx || yi < 0 || yi >= ny || zi < 0 || zi >= nz) continue;
      const double wx = (q & 1) ? dx : 1 - dx;
      const double wy = ((q >> 1) & 1) ? dy : 1 - dy;
      const double wz = ((q >> 2) & 1) ? dz : 1 - dz;
      const double wgt = wx * wy * wz;
      if (wgt == 0.0) continue;
      const double* src = V + cell(xi, yi, zi);
      for (int64_t k = 0; k < c; ++k) out[static_cast<size_t>(s * c + k)] += wgt * src[k];
    }
  }
  auto vn = vol.node(), cn = coords.node();
  return make_op({m, c}, std::move(out), {vol, coords}, [vn, cn, nx, ny, nz, c, m](Node& self) {
    std::vector<double> gvol;
    std::vector<double> gco;
    if (vn->requires_grad) gvol.assign(static_cast<size_t>(nx * ny * nz * c), 0.0);
    if (cn->requires_grad) gco.assign(static_cast<size_t>(m * 3), 0.0);
    const double* V = vn->data.data();
    auto cell = [&](int64_t x, int64_t y, int64_t z) { return ((x * ny + y) * nz + z) * c; };
    for (int64_t s = 0; s < m; ++s) {
      const double* p = cn->data.data() + s * 3;
      const int64_t x0 = static_cast<int64_t>(std::floor(p[0]));
      const int64_t y0 = static_cast<int64_t>(std::floor(p[1]));
      const int64_t z0 = static_cast<int64_t>(std::floor(p[2]));
      const double d[3] = {p[0] - static_cast<double>(x0), p[1] - static_cast<double>(y0),
                           p[2] - static_cast<double>(z0)};
      for (int q = 0; q < 8; ++q) {
        const int bx = q & 1, by = (q >> 1) & 1, bz = (q >> 2) & 1;
        const int64_t xi = x0 + bx, yi = y0 + by, zi = z0 + bz;
        if (xi < 0 || xi >= nx || yi < 0 || yi >= ny || zi < 0 || zi >= nz) continue;
        const double wx = bx ? d[0] : 1 - d[0];
        const double wy = by ? d[1] : 1 - d[1];
        const double wz = bz ? d[2] : 1 - d[2];
        const int64_t base = cell(xi, yi, zi);
        for (int64_t k = 0; k < c; ++k) {
          const double g = self.grad[static_cast<size_t>(s * c + k)];
          if (g == 0.0) continue;
          if (!gvol.empty()) gvol[static_cast<size_t>(base + k)] += g * wx * wy * wz;
          if (!gco.empty()) {
            const double v = V[base + k];
            gco[static_cast<size_t>(s * 3 + 0)] += g * v * (bx ? 1.0 : -1.0) * wy * wz;
            gco[static_cast<size_t>(s * 3 + 1)] += g * v * wx * (by ? 1.0 : -1.0) * wz;
            gco[static_cast<size_t>(s * 3 + 2)] += g * v * wx * wy * (bz ? 1.0 : -1.0);
          }
        }
      }
    }
    if (!gvol.empty()) vn->accumulate(gvol.data(), nx * ny * nz * c);
    if (!gco.empty()) cn->accumulate(gco.data(), m * 3);
  });
}

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.shape().size() != 4) shape_error("conv3d", "input must be [X,Y,Z,Ci]");
  if (weight.shape().size() != 5 || weight.dim(2) != weight.dim(3) || weight.dim(3) != weight.dim(4))
    shape_error("conv3d", "weight must be [Co,Ci,k,k,k]");
  const int64_t nx = input.dim(0), ny = input.dim(1), nz = input.dim(2), ci = input.dim(3);
  const int64_t co = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != ci) shape_error("conv3d", "channel mismatch");
  if (bias.numel() != co) shape_error("conv3d", "bias width mismatch");
  const int64_t r = k / 2;
  std::vector<double> out(static_cast<size_t>(nx * ny * nz * co));
  const double* I = input.data();
  const double* W = weight.data();
  auto in_at = [&](int64_t x, int64_t y, int64_t z) { return ((x * ny + y) * nz + z) * ci; };
  auto w_at = [&](int64_t o, int64_t i, int64_t a, int64_t b, int64_t cidx) {
    return ((((o * ci + i) * k + a) * k + b) * k + cidx);
  };
  for (int64_t x = 0; x < nx; ++x)
    for (int64_t y = 0; y < ny; ++y)
      for (int64_t z = 0; z < nz; ++z)
        for (int64_t o = 0; o < co; ++o) {
          double acc = bias.data()[o];
          for (int64_t a = 0; a < k; ++a) {
            const int64_t xi = x + a - r;
            if (xi < 0 || xi >= nx) continue;
            for (int64_t b = 0; b < k; ++b) {
              const int64_t yi = y + b - r;
              if (yi < 0 || yi >= ny) continue;
              for (int64_t cc = 0; cc < k; ++cc) {
                const int64_t zi = z + cc - r;
                if (zi < 0 || zi >= nz) continue;
                const double* px = I + in_at(xi, yi, zi);
                for (int64_t i = 0; i < ci; ++i) acc += px[i] * W[w_at(o, i, a, b, cc)];
              }
            }
          }
          out[static_cast<size_t>(((x * ny + y) * nz + z) * co + o)] = acc;
        }
  auto in = input.node(), wn = weight.node(), bn = bias.node();
  return make_op({nx, ny, nz, co}, std::move(out), {input, weight, bias},
                 [in, wn, bn, nx, ny, nz, ci, co, k, r](Node& self) {
    auto in_at = [&](int64_t x, int64_t y, int64_t z) { return ((x * ny + y) * nz + z) * ci; };
    auto w_at = [&](int64_t o, int64_t i, int64_t a, int64_t b, int64_t cidx) {
      return ((((o * ci + i) * k + a) * k + b) * k + cidx);
    };
    std::vector<double> gin, gw, gb;
    if (in->requires_grad) gin.assign(static_cast<size_t>(nx * ny * nz * ci), 0.0);
    if (wn->requires_grad) gw.assign(wn->data.size(), 0.0);
    if (bn->requires_grad) gb.assign(static_cast<size_t>(co), 0.0);
    const double* I = in->data.data();
    const double* W = wn->data.data();
    for (int64_t x = 0; x < nx; ++x)
      for (int64_t y = 0; y < ny; ++y)
        for (int64_t z = 0; z < nz; ++z)
          for (int64_t o = 0; o < co; ++o) {
            const double g = self.grad[static_cast<size_t>(((x * ny + y) * nz + z) * co + o)];
            if (g == 0.0) continue;
            if (!gb.empty()) gb[static_cast<size_t>(o)] += g;
            for (int64_t a = 0; a < k; ++a) {
              const int64_t xi = x + a - r;
              if (xi < 0 || xi >= nx) continue;
              for (int64_t b = 0; b < k; ++b) {
                const int64_t yi = y + b - r;
                if (yi < 0 || yi >= ny) continue;
                for (int64_t cc = 0; cc < k; ++cc) {
                  const int64_t zi = z + cc - r;
                  if (zi < 0 || zi >= nz) continue;
                  const int64_t ibase = in_at(xi, yi, zi);
                  for (int64_t i = 0; i < ci; ++i) {
                    if (!gw.empty()) gw[static_cast<size_t>(w_at(o, i, a, b, cc))] += g * I[ibase + i];
                    if (!gin.empty()) gin[static_cast<size_t>(ibase + i)] += g * W[w_at(o, i, a, b, cc)];
                  }
                }
              }
            }
          }
    if (!gin.empty()) in->accumulate(gin.data(), nx * ny * nz * ci);
    if (!gw.empty()) wn->accumulate(gw.data(), static_cast<int64_t>(gw.size()));
    if (!gb.empty()) bn->accumulate(gb.data(), co);
  });
}

Tensor volume_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                   bool training, std::vector<double>* running_mean,
                   std::vector<double>* running_var, double momentum) {
  if (x.shape().size() != 2) shape_error("volume_norm", "x must be [N,C]");
  const int64_t n = x.dim(0), c = x.dim(1);
  if (gamma.numel() != c || beta.numel() != c) shape_error("volume_norm", "affine width mismatch");
  std::vector<double> mu(static_cast<size_t>(c), 0.0), var(static_cast<size_t>(c), 0.0);
  if (training) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) mu[static_cast<size_t>(j)] += x.data()[i * c + j];
    for (int64_t j = 0; j < c; ++j) mu[static_cast<size_t>(j)] /= static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double d = x.data()[i * c + j] - mu[static_cast<size_t>(j)];
        var[static_cast<size_t>(j)] += d * d;
      }
    for (int64_t j = 0; j < c; ++j) var[static_cast<size_t>(j)] /= static_cast<double>(n);
    if (running_mean && running_var) {
      if (running_mean->empty()) running_mean->assign(static_cast<size_t>(c), 0.0);
      if (running_var->empty()) running_var->assign(static_cast<size_t>(c), 1.0);
      for (int64_t j = 0; j < c; ++j) {
        (*running_mean)[static_cast<size_t>(j)] =
            (1 - momentum) * (*running_mean)[static_cast<size_t>(j)] + momentum * mu[static_cast<size_t>(j)];
        (*running_var)[static_cast<size_t>(j)] =
            (1 - momentum) * (*running_var)[static_cast<size_t>(j)] + momentum * var[static_cast<size_t>(j)];
      }
    }
  } else {
    if (!running_mean || !running_var || running_mean->empty()) {
      shape_error("volume_norm", "eval mode requires running statistics");
    }
    mu = *running_mean;
    var = *running_var;
  }
  std::vector<double> inv_sigma(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) inv_sigma[static_cast<size_t>(j)] = 1.0 / std::sqrt(var[static_cast<size_t>(j)] + eps);
  std::vector<double> xhat(static_cast<size_t>(n * c));
  std::vector<double> out(static_cast<size_t>(n * c));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const double xh = (x.data()[i * c + j] - mu[static_cast<size_t>(j)]) * inv_sigma[static_cast<size_t>(j)];
      xhat[static_cast<size_t>(i * c + j)] = xh;
      out[static_cast<size_t>(i * c + j)] = gamma.data()[j] * xh + beta.data()[j];
    }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op({n, c}, std::move(out), {x, gamma, beta},
                 [xn, gn, bn, xhat, inv_sigma, n, c, training](Node& self) {
    std::vector<double> sum_g(static_cast<size_t>(c), 0.0), sum_gx(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double g = self.grad[static_cast<size_t>(i * c + j)];
        sum_g[static_cast<size_t>(j)] += g;
        sum_gx[static_cast<size_t>(j)] += g * xhat[static_cast<size_t>(i * c + j)];
      }
    if (gn->requires_grad) gn->accumulate(sum_gx.data(), c);
    if (bn->requires_grad) bn->accumulate(sum_g.data(), c);
    if (xn->requires_grad) {
      std::vector<double> gx(static_cast<size_t>(n * c));
      const double invn = 1.0 / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
          const double g = self.grad[static_cast<size_t>(i * c + j)];
          const double scale_j = gn->data[static_cast<size_t>(j)] * inv_sigma[static_cast<size_t>(j)];
          if (training) {
            gx[static_cast<size_t>(i * c + j)] =
                scale_j * (g - invn * sum_g[static_cast<size_t>(j)] -
                           xhat[static_cast<size_t>(i * c + j)] * invn * sum_gx[static_cast<size_t>(j)]);
          } else {
            gx[static_cast<size_t>(i * c + j)] = scale_j * g;
          }
        }
      xn->accumulate(gx.data(), n * c);
    }
  });
}

}  // namespace voxsplat::ad
