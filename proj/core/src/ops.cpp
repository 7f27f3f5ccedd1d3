#include "barfiq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "barfiq/angle.hpp"
#include "barfiq/errors.hpp"

namespace barfiq::ops {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

void require_row(const Tensor& a, const Tensor& r, const char* op) {
  if (r.rows() != 1 || r.cols() != a.cols()) {
    throw ShapeError(std::string(op) + ": row " + r.shape_string() + " vs " + a.shape_string());
  }
}

void require_col(const Tensor& a, const Tensor& c, const char* op) {
  if (c.cols() != 1 || c.rows() != a.rows()) {
    throw ShapeError(std::string(op) + ": col " + c.shape_string() + " vs " + a.shape_string());
  }
}

// Elementwise map with derivative expressed through (x, y).
template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tensor yc = y;
  return make_op(std::move(y), {a}, [x, yc = std::move(yc), df](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    Tensor& ga = *pg[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], yc[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tensor out = barfiq::matmul(a.value(), b.value());
  return make_op(std::move(out), {a, b}, [A = a.value(), B = b.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0]) {
      // dA = g B^T
      Tensor& ga = *pg[0];
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t k = 0; k < B.rows(); ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * B(k, j);
          ga(i, k) += s;
        }
    }
    if (pg[1]) {
      // dB = A^T g
      Tensor& gb = *pg[1];
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
          const double aik = A(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < g.cols(); ++j) gb(k, j) += aik * g(i, j);
        }
    }
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transposed(), {a}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*pg[0])(j, i) += g(i, j);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    for (Tensor* p : pg)
      if (p)
        for (std::size_t i = 0; i < g.size(); ++i) (*p)[i] += g[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [A = a.value(), B = b.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * B[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * A[i];
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a.value(), b.value(), "div");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return make_op(std::move(out), {a, b}, [A = a.value(), B = b.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] / B[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i] * A[i] / (B[i] * B[i]);
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [s](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += s * g[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
  });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw ShapeError("scale_by: scale must be 1x1");
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sv;
  return make_op(std::move(out), {a, s}, [A = a.value(), sv](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += sv * g[i];
    if (pg[1]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      (*pg[1])[0] += acc;
    }
  });
}

Var add_row(const Var& a, const Var& r) {
  require_row(a.value(), r.value(), "add_row");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r.value()[j];
  return make_op(std::move(out), {a, r}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*pg[1])[j] += g(i, j);
  });
}

Var mul_row(const Var& a, const Var& r) {
  require_row(a.value(), r.value(), "mul_row");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= r.value()[j];
  return make_op(std::move(out), {a, r}, [A = a.value(), R = r.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (pg[0]) (*pg[0])(i, j) += g(i, j) * R[j];
        if (pg[1]) (*pg[1])[j] += g(i, j) * A(i, j);
      }
  });
}

Var mul_col(const Var& a, const Var& c) {
  require_col(a.value(), c.value(), "mul_col");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= c.value()[i];
  return make_op(std::move(out), {a, c}, [A = a.value(), C = c.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (pg[0]) (*pg[0])(i, j) += g(i, j) * C[i];
        if (pg[1]) (*pg[1])[i] += g(i, j) * A(i, j);
      }
  });
}

Var div_col(const Var& a, const Var& c) {
  require_col(a.value(), c.value(), "div_col");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= c.value()[i];
  return make_op(std::move(out), {a, c}, [A = a.value(), C = c.value()](const Tensor& g, std::vector<Tensor*>& pg) {
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (pg[0]) (*pg[0])(i, j) += g(i, j) / C[i];
        if (pg[1]) (*pg[1])[i] -= g(i, j) * A(i, j) / (C[i] * C[i]);
      }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_row(matmul(x, w), b); }

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_op(Tensor::scalar(s), {a}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < pg[0]->size(); ++i) (*pg[0])[i] += g[0];
  });
}

Var sum_cols(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out[i] += x(i, j);
  return make_op(std::move(out), {a}, [](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    Tensor& ga = *pg[0];
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[i];
  });
}

Var mean_rows(const Var& a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : out.data()) v *= inv;
  return make_op(std::move(out), {a}, [inv](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    Tensor& ga = *pg[0];
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[j] * inv;
  });
}

Var mean_cols(const Var& a) {
  const Tensor& x = a.value();
  if (x.cols() == 0) throw ShapeError("mean_cols: no columns");
  Tensor out(x.rows(), 1);
  const double inv = 1.0 / static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j);
    out[i] = s * inv;
  }
  return make_op(std::move(out), {a}, [inv](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    Tensor& ga = *pg[0];
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[i] * inv;
  });
}

Var max_cols(const Var& a) {
  const Tensor& x = a.value();
  if (x.cols() == 0) throw ShapeError("max_cols: no columns");
  Tensor out(x.rows(), 1);
  std::vector<std::size_t> arg(x.rows(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 1; j < x.cols(); ++j)
      if (x(i, j) > x(i, arg[i])) arg[i] = j;
    out[i] = x(i, arg[i]);
  }
  return make_op(std::move(out), {a}, [arg = std::move(arg)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < arg.size(); ++i) (*pg[0])(i, arg[i]) += g[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch");
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor out(r, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offsets[k] + j) = v(i, j);
  }
  return make_op(std::move(out), parts, [offsets](const Tensor& g, std::vector<Tensor*>& pg) {
    for (std::size_t k = 0; k < pg.size(); ++k) {
      if (!pg[k]) continue;
      Tensor& gp = *pg[k];
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[k] + j);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
    offsets.push_back(total);
    total += p.rows();
  }
  Tensor out(total, c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + offsets[k] * c);
  }
  return make_op(std::move(out), parts, [offsets, c](const Tensor& g, std::vector<Tensor*>& pg) {
    for (std::size_t k = 0; k < pg.size(); ++k) {
      if (!pg[k]) continue;
      Tensor& gp = *pg[k];
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] * c + i];
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  if (begin + count > x.cols()) throw ShapeError("slice_cols: out of range");
  Tensor out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return make_op(std::move(out), {a}, [begin](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*pg[0])(i, begin + j) += g(i, j);
  });
}

Var column(const Var& a, std::size_t j) { return slice_cols(a, j, 1); }

Var gather_rows(const Var& a, std::span<const std::size_t> idx) {
  const Tensor& x = a.value();
  Tensor out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(x.row(idx[i]).begin(), x.row(idx[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return make_op(std::move(out), {a}, [ids = std::move(ids)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*pg[0])(ids[i], j) += g(i, j);
  });
}

Var scatter_rows(const Var& a, std::span<const std::size_t> idx, std::size_t n) {
  const Tensor& x = a.value();
  if (idx.size() != x.rows()) throw ShapeError("scatter_rows: index count mismatch");
  Tensor out(n, x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) throw ShapeError("scatter_rows: index out of range");
    for (std::size_t j = 0; j < x.cols(); ++j) out(idx[i], j) += x(i, j);
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return make_op(std::move(out), {a}, [ids = std::move(ids)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*pg[0])(i, j) += g(ids[i], j);
  });
}

Var sigmoid(const Var& a) {
  return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var silu(const Var& a) {
  return unary(
      a, [](double x) { return x * sigmoid_scalar(x); },
      [](double x, double) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var elu_plus_one(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x + 1.0 : std::exp(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto p = barfiq::softmax(x.row(i));
    std::copy(p.begin(), p.end(), y.row(i).begin());
  }
  Tensor yc = y;
  return make_op(std::move(y), {a}, [Y = std::move(yc)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) dot += g(i, j) * Y(i, j);
      for (std::size_t j = 0; j < Y.cols(); ++j) (*pg[0])(i, j) += Y(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& X = x.value();
  const std::size_t n = X.cols();
  if (n == 0) throw DomainError("layer_norm: zero-length feature dimension");
  require_row(X, gamma.value(), "layer_norm gamma");
  require_row(X, beta.value(), "layer_norm beta");
  Tensor xhat(X.rows(), n);
  std::vector<double> inv_std(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double mean = 0.0;
    for (double v : X.row(i)) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : X.row(i)) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat(i, j) = (X(i, j) - mean) * inv_std[i];
  }
  Tensor out(X.rows(), n);
  const Tensor& G = gamma.value();
  const Tensor& B = beta.value();
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = xhat(i, j) * G[j] + B[j];
  return make_op(std::move(out), {x, gamma, beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), G](const Tensor& g, std::vector<Tensor*>& pg) {
                   const std::size_t n = xhat.cols();
                   for (std::size_t i = 0; i < xhat.rows(); ++i) {
                     double mg = 0.0, mgx = 0.0;
                     for (std::size_t j = 0; j < n; ++j) {
                       const double gh = g(i, j) * G[j];
                       mg += gh;
                       mgx += gh * xhat(i, j);
                       if (pg[1]) (*pg[1])[j] += g(i, j) * xhat(i, j);
                       if (pg[2]) (*pg[2])[j] += g(i, j);
                     }
                     if (!pg[0]) continue;
                     mg /= static_cast<double>(n);
                     mgx /= static_cast<double>(n);
                     for (std::size_t j = 0; j < n; ++j) {
                       const double gh = g(i, j) * G[j];
                       (*pg[0])(i, j) += inv_std[i] * (gh - mg - xhat(i, j) * mgx);
                     }
                   }
                 });
}

Var row_norm(const Var& x) {
  const Tensor& X = x.value();
  Tensor out(X.rows(), 1);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (double v : X.row(i)) s += v * v;
    out[i] = std::sqrt(s);
  }
  Tensor nc = out;
  return make_op(std::move(out), {x}, [X, N = std::move(nc)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (N[i] == 0.0) continue;
      for (std::size_t j = 0; j < X.cols(); ++j) (*pg[0])(i, j) += g[i] * X(i, j) / N[i];
    }
  });
}

Var row_normalize(const Var& x, double eps) {
  const Tensor& X = x.value();
  Tensor out(X.rows(), X.cols());
  std::vector<double> norms(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (double v : X.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    const double denom = norms[i] + eps;
    if (denom == 0.0) continue;  // zero row with eps == 0 stays zero
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j) / denom;
  }
  return make_op(std::move(out), {x}, [X, norms = std::move(norms), eps](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double n = norms[i];
      const double s = n + eps;
      if (s == 0.0) continue;
      double gx = 0.0;
      for (std::size_t j = 0; j < X.cols(); ++j) gx += g(i, j) * X(i, j);
      for (std::size_t j = 0; j < X.cols(); ++j) {
        double d = g(i, j) / s;
        if (n > 0.0) d -= gx * X(i, j) / (s * s * n);
        (*pg[0])(i, j) += d;
      }
    }
  });
}

Var rope_rows(const Var& x, std::span<const std::size_t> positions, double base) {
  const Tensor& X = x.value();
  const std::size_t d = X.cols();
  if (d % 2 != 0) throw ConfigError("rope: feature width must be even, got " + std::to_string(d));
  if (positions.size() != X.rows()) throw ShapeError("rope: one position per row required");
  Tensor cs(X.rows(), d / 2), sn(X.rows(), d / 2);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t m = 0; m < d / 2; ++m) {
      const double theta = std::pow(base, -2.0 * static_cast<double>(m) / static_cast<double>(d));
      const double ang = static_cast<double>(positions[i]) * theta;
      cs(i, m) = std::cos(ang);
      sn(i, m) = std::sin(ang);
    }
  Tensor out(X.rows(), d);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t m = 0; m < d / 2; ++m) {
      const double a = X(i, 2 * m), b = X(i, 2 * m + 1);
      out(i, 2 * m) = cs(i, m) * a - sn(i, m) * b;
      out(i, 2 * m + 1) = sn(i, m) * a + cs(i, m) * b;
    }
  return make_op(std::move(out), {x}, [cs = std::move(cs), sn = std::move(sn)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < cs.rows(); ++i)
      for (std::size_t m = 0; m < cs.cols(); ++m) {
        const double ga = g(i, 2 * m), gb = g(i, 2 * m + 1);
        (*pg[0])(i, 2 * m) += cs(i, m) * ga + sn(i, m) * gb;
        (*pg[0])(i, 2 * m + 1) += -sn(i, m) * ga + cs(i, m) * gb;
      }
  });
}

Var conv1d_depthwise(const Var& x, const Var& w) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (W.rows() != X.cols()) throw ShapeError("conv1d: kernel rows must equal channel count");
  const std::size_t k = W.cols();
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd");
  const long half = static_cast<long>(k / 2);
  const long T = static_cast<long>(X.rows());
  Tensor out(X.rows(), X.cols());
  for (long t = 0; t < T; ++t)
    for (std::size_t c = 0; c < X.cols(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const long src = t + static_cast<long>(j) - half;
        if (src < 0 || src >= T) continue;
        s += W(c, j) * X(static_cast<std::size_t>(src), c);
      }
      out(static_cast<std::size_t>(t), c) = s;
    }
  return make_op(std::move(out), {x, w}, [X, W, half, T](const Tensor& g, std::vector<Tensor*>& pg) {
    for (long t = 0; t < T; ++t)
      for (std::size_t c = 0; c < X.cols(); ++c) {
        const double gv = g(static_cast<std::size_t>(t), c);
        for (std::size_t j = 0; j < W.cols(); ++j) {
          const long src = t + static_cast<long>(j) - half;
          if (src < 0 || src >= T) continue;
          const auto s = static_cast<std::size_t>(src);
          if (pg[0]) (*pg[0])(s, c) += gv * W(c, j);
          if (pg[1]) (*pg[1])(c, j) += gv * X(s, c);
        }
      }
  });
}

Var topk_renormalize(const Var& p, std::size_t k, double eps,
                     std::vector<std::vector<std::size_t>>* selected) {
  const Tensor& P = p.value();
  if (k == 0 || k > P.cols()) throw ConfigError("topk: k must be in [1, E]");
  std::vector<std::vector<std::size_t>> keep(P.rows());
  std::vector<double> denom(P.rows());
  Tensor out(P.rows(), P.cols());
  for (std::size_t i = 0; i < P.rows(); ++i) {
    std::vector<std::size_t> order(P.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return P(i, a) > P(i, b); });
    keep[i].assign(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(keep[i].begin(), keep[i].end());
    double s = 0.0;
    for (std::size_t e : keep[i]) s += P(i, e);
    denom[i] = s + eps;
    for (std::size_t e : keep[i]) out(i, e) = P(i, e) / denom[i];
  }
  if (selected) *selected = keep;
  return make_op(std::move(out), {p}, [P, keep = std::move(keep), denom = std::move(denom)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      // d pi_e / d p_u = delta_eu / S - p_e / S^2 for e, u in the kept set.
      double gp = 0.0;
      for (std::size_t e : keep[i]) gp += g(i, e) * P(i, e);
      const double S = denom[i];
      for (std::size_t u : keep[i]) (*pg[0])(i, u) += g(i, u) / S - gp / (S * S);
    }
  });
}

Var standardize_cols(const Var& x, double eps) {
  const Tensor& X = x.value();
  const std::size_t T = X.rows();
  if (T == 0) throw DomainError("standardize: no rows");
  Tensor xhat(T, X.cols());
  std::vector<double> inv_std(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += X(t, c);
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t) var += (X(t, c) - mean) * (X(t, c) - mean);
    var /= static_cast<double>(T);
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    for (std::size_t t = 0; t < T; ++t) xhat(t, c) = (X(t, c) - mean) * inv_std[c];
  }
  Tensor xc = xhat;
  return make_op(std::move(xhat), {x}, [xh = std::move(xc), inv_std = std::move(inv_std)](const Tensor& g, std::vector<Tensor*>& pg) {
    if (!pg[0]) return;
    const std::size_t T = xh.rows();
    for (std::size_t c = 0; c < xh.cols(); ++c) {
      double mg = 0.0, mgx = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        mg += g(t, c);
        mgx += g(t, c) * xh(t, c);
      }
      mg /= static_cast<double>(T);
      mgx /= static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) (*pg[0])(t, c) += inv_std[c] * (g(t, c) - mg - xh(t, c) * mgx);
    }
  });
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  Tensor mask(x.rows(), x.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? s : 0.0;
  return mul(x, constant(std::move(mask)));
}

}  // namespace barfiq::ops
