#include "eeg2text/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "eeg2text/numcore/kernels.hpp"

namespace eeg2text::numcore {

namespace {

template <class T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

template <class T>
Shape shape2(const Tensor<T>& t) {
  return {t.rows(), t.cols()};
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src, T s = T{1}) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(av.shape()) + " x " +
                     shape_to_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  kernels::gemm(false, false, m, n, k, av.data(), bv.data(), out.data(), false);
  return a.tape->push(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id))
      kernels::gemm(false, true, m, k, n, g.data(), t.value(b.id).data(), t.grad(a.id).data(), true);
    if (t.needs_grad(b.id))
      kernels::gemm(true, false, k, n, m, t.value(a.id).data(), g.data(), t.grad(b.id).data(), true);
  });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(av.shape()) +
                     " x " + shape_to_string(bv.shape()) + "^T");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out({m, n});
  kernels::gemm(false, true, m, n, k, av.data(), bv.data(), out.data(), false);
  return a.tape->push(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id))
      kernels::gemm(false, false, m, k, n, g.data(), t.value(b.id).data(), t.grad(a.id).data(), true);
    if (t.needs_grad(b.id))
      kernels::gemm(true, false, n, k, m, g.data(), t.value(a.id).data(), t.grad(b.id).data(), true);
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a.value(), b.value());
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) add_into(t.grad(a.id), g);
    if (t.needs_grad(b.id)) add_into(t.grad(b.id), g);
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) add_into(t.grad(a.id), g);
    if (t.needs_grad(b.id)) add_into(t.grad(b.id), g, T{-1});
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) {
      auto& ga = t.grad(a.id);
      const auto& bv = t.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(b.id)) {
      auto& gb = t.grad(b.id);
      const auto& av = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return a.tape->push(std::move(out), {a}, [a, s](Tape<T>& t, std::size_t self) {
    add_into(t.grad(a.id), t.grad(self), s);
  });
}

template <class T>
Var<T> add_row(Var<T> a, Var<T> row) {
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: row " + shape_to_string(rv.shape()) + " does not broadcast over " +
                     shape_to_string(av.shape()));
  }
  Tensor<T> out(shape2(av));
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = av.at(r, c) + rv[c];
  return a.tape->push(std::move(out), {a, row}, [a, row, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) add_into(t.grad(a.id), g);
    if (t.needs_grad(row.id)) {
      auto& gr = t.grad(row.id);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) gr[c] += g.at(r, c);
    }
  });
}

template <class T>
Var<T> mul_row(Var<T> a, Var<T> row) {
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("mul_row: row " + shape_to_string(rv.shape()) + " does not broadcast over " +
                     shape_to_string(av.shape()));
  }
  Tensor<T> out(shape2(av));
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = av.at(r, c) * rv[c];
  return a.tape->push(std::move(out), {a, row}, [a, row, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& avv = t.value(a.id);
    const auto& rvv = t.value(row.id);
    if (t.needs_grad(a.id)) {
      auto& ga = t.grad(a.id);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) ga.at(r, c) += g.at(r, c) * rvv[c];
    }
    if (t.needs_grad(row.id)) {
      auto& gr = t.grad(row.id);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) gr[c] += g.at(r, c) * avv.at(r, c);
    }
  });
}

template <class T>
Var<T> add_constant(Var<T> a, const Tensor<T>& c) {
  require_same_shape("add_constant", a.value(), c);
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + c[i];
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    add_into(t.grad(a.id), t.grad(self));
  });
}

template <class T>
Var<T> tanh(Var<T> a) {
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T{1} - y[i] * y[i]);
  });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-a.value()[i]));
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T{1} - y[i]);
  });
}

template <class T>
Var<T> gelu(Var<T> a) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.value()[i];
    out[i] = T(0.5) * x * (T{1} + std::erf(x * inv_sqrt2));
  }
  return a.tape->push(std::move(out), {a}, [a, inv_sqrt2](Tape<T>& t, std::size_t self) {
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    const auto& g = t.grad(self);
    const auto& x = t.value(a.id);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T cdf = T(0.5) * (T{1} + std::erf(x[i] * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
}

template <class T>
Var<T> softmax_rows(Var<T> a) {
  const auto& av = a.value();
  Tensor<T> out(shape2(av));
  kernels::softmax_rows(av.data(), out.data(), av.rows(), av.cols());
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(a.id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      T dot{0};
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

template <class T>
Var<T> layer_norm(Var<T> a, Var<T> gain, Var<T> bias, T eps) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (gain.value().cols() != n || bias.value().cols() != n || gain.value().rows() != 1 ||
      bias.value().rows() != 1) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(n));
  }
  Tensor<T> xhat({m, n});
  std::vector<T> rstd(m);
  Tensor<T> out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    T mu{0};
    for (std::size_t c = 0; c < n; ++c) mu += av.at(r, c);
    mu /= static_cast<T>(n);
    T var{0};
    for (std::size_t c = 0; c < n; ++c) var += (av.at(r, c) - mu) * (av.at(r, c) - mu);
    var /= static_cast<T>(n);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat.at(r, c) = (av.at(r, c) - mu) * rstd[r];
      out.at(r, c) = xhat.at(r, c) * gain.value()[c] + bias.value()[c];
    }
  }
  auto cache = std::make_shared<std::pair<Tensor<T>, std::vector<T>>>(std::move(xhat), std::move(rstd));
  return a.tape->push(
      std::move(out), {a, gain, bias}, [a, gain, bias, cache, m, n](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto& xh = cache->first;
        const auto& rs = cache->second;
        const auto& gv = t.value(gain.id);
        if (t.needs_grad(gain.id)) {
          auto& gg = t.grad(gain.id);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gg[c] += g.at(r, c) * xh.at(r, c);
        }
        if (t.needs_grad(bias.id)) {
          auto& gb = t.grad(bias.id);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gb[c] += g.at(r, c);
        }
        if (t.needs_grad(a.id)) {
          auto& ga = t.grad(a.id);
          for (std::size_t r = 0; r < m; ++r) {
            T mean_d{0}, mean_dx{0};
            for (std::size_t c = 0; c < n; ++c) {
              const T d = g.at(r, c) * gv[c];
              mean_d += d;
              mean_dx += d * xh.at(r, c);
            }
            mean_d /= static_cast<T>(n);
            mean_dx /= static_cast<T>(n);
            for (std::size_t c = 0; c < n; ++c) {
              const T d = g.at(r, c) * gv[c];
              ga.at(r, c) += rs[r] * (d - mean_d - xh.at(r, c) * mean_dx);
            }
          }
        }
      });
}

template <class T>
Var<T> transpose(Var<T> a) {
  Tensor<T> out = a.value().transposed();
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
  });
}

template <class T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || begin + count > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(av.shape()));
  }
  const std::size_t n = av.cols();
  Tensor<T> out({count, n});
  std::copy(av.data() + begin * n, av.data() + (begin + count) * n, out.data());
  return a.tape->push(std::move(out), {a}, [a, begin, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

template <class T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || begin + count > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(av.shape()));
  }
  Tensor<T> out({av.rows(), count});
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = av.at(r, begin + c);
  return a.tape->push(std::move(out), {a}, [a, begin, count](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) ga.at(r, begin + c) += g.at(r, c);
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_to_string(parts[0].value().shape()) +
                       " vs " + shape_to_string(p.value().shape()));
    }
    total += p.rows();
  }
  Tensor<T> out({total, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return parts[0].tape->push(std::move(out), parts, [parts](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t o = 0;
    for (const auto& p : parts) {
      const std::size_t len = t.value(p.id).size();
      if (t.needs_grad(p.id)) {
        auto& gp = t.grad(p.id);
        for (std::size_t i = 0; i < len; ++i) gp[i] += g[o + i];
      }
      o += len;
    }
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_to_string(parts[0].value().shape()) +
                       " vs " + shape_to_string(p.value().shape()));
    }
    total += p.cols();
  }
  Tensor<T> out({m, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out.at(r, off + c) = pv.at(r, c);
    off += pv.cols();
  }
  return parts[0].tape->push(std::move(out), parts, [parts, m](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t o = 0;
    for (const auto& p : parts) {
      const std::size_t w = t.value(p.id).cols();
      if (t.needs_grad(p.id)) {
        auto& gp = t.grad(p.id);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) gp.at(r, c) += g.at(r, o + c);
      }
      o += w;
    }
  });
}

template <class T>
Var<T> gather_rows(Var<T> table, std::span<const int> indices) {
  const auto& tv = table.value();
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = tv.cols();
  Tensor<T> out({indices.size(), n});
  std::vector<int> idx(indices.begin(), indices.end());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= tv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(idx[r]) +
                              " out of range for table " + shape_to_string(tv.shape()));
    }
    std::copy(tv.data() + idx[r] * n, tv.data() + (idx[r] + 1) * n, out.data() + r * n);
  }
  return table.tape->push(std::move(out), {table}, [table, idx, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gt = t.grad(table.id);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) gt.at(idx[r], c) += g.at(r, c);
  });
}

template <class T>
Var<T> dropout(Var<T> a, double p) {
  if (!a.tape->training() || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const T s = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> mask(shape2(a.value()));
  for (auto& v : mask.values()) v = keep(a.tape->rng()) ? s : T{0};
  Tensor<T> out(shape2(a.value()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * mask[i];
  return a.tape->push(std::move(out), {a}, [a, mask = std::move(mask)](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

template <class T>
Var<T> sum(Var<T> a) {
  double total = 0.0;
  for (T v : a.value().values()) total += v;
  return a.tape->push(Tensor<T>::scalar(static_cast<T>(total)), {a},
                      [a](Tape<T>& t, std::size_t self) {
                        const T g = t.grad(self)[0];
                        auto& ga = t.grad(a.id);
                        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
                      });
}

template <class T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T{1} / static_cast<T>(a.value().size()));
}

template <class T>
Var<T> mse_loss(Var<T> pred, Var<T> target) {
  require_same_shape("mse_loss", pred.value(), target.value());
  const auto& p = pred.value();
  const auto& q = target.value();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(q[i]);
    total += d * d;
  }
  const std::size_t count = p.size();
  return pred.tape->push(
      Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(count))), {pred, target},
      [pred, target, count](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0] * T{2} / static_cast<T>(count);
        const auto& pv = t.value(pred.id);
        const auto& tv = t.value(target.id);
        if (t.needs_grad(pred.id)) {
          auto& gp = t.grad(pred.id);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (pv[i] - tv[i]);
        }
        if (t.needs_grad(target.id)) {
          auto& gt = t.grad(target.id);
          for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (pv[i] - tv[i]);
        }
      });
}

template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, int ignore_index,
                     Reduction reduction) {
  const auto& lv = logits.value();
  const std::size_t rows = lv.rows(), v = lv.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_to_string(lv.shape()));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  Tensor<T> probs({rows, v});
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tg[r] == ignore_index) continue;
    if (tg[r] < 0 || static_cast<std::size_t>(tg[r]) >= v) {
      throw std::out_of_range("cross_entropy: target index " + std::to_string(tg[r]) +
                              " outside vocabulary of size " + std::to_string(v));
    }
    double mx = lv.at(r, 0);
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, static_cast<double>(lv.at(r, c)));
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(static_cast<double>(lv.at(r, c)) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < v; ++c)
      probs.at(r, c) = static_cast<T>(std::exp(static_cast<double>(lv.at(r, c)) - lse));
    total += lse - static_cast<double>(lv.at(r, tg[r]));
    ++counted;
  }
  const double denom =
      reduction == Reduction::kMean ? static_cast<double>(std::max<std::size_t>(counted, 1)) : 1.0;
  return logits.tape->push(
      Tensor<T>::scalar(static_cast<T>(total / denom)), {logits},
      [logits, tg, probs = std::move(probs), denom, ignore_index, v](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0] / static_cast<T>(denom);
        auto& gl = t.grad(logits.id);
        for (std::size_t r = 0; r < tg.size(); ++r) {
          if (tg[r] == ignore_index) continue;
          for (std::size_t c = 0; c < v; ++c) gl.at(r, c) += g * probs.at(r, c);
          gl.at(r, tg[r]) -= g;
        }
      });
}

namespace {

template <class T>
struct GruCache {
  std::size_t steps = 0, hidden = 0;
  bool reverse = false;
  Tensor<T> h_prev, r, z, n, hn;  // steps x hidden, indexed by step
};

}  // namespace

template <class T>
Var<T> gru_last_state(Var<T> x, Var<T> w_x, Var<T> w_h, Var<T> b_x, Var<T> b_h, bool reverse) {
  const auto& xv = x.value();
  const auto& wx = w_x.value();
  const auto& wh = w_h.value();
  const std::size_t steps = xv.rows(), feat = xv.cols(), hidden = wh.rows(), g3 = 3 * hidden;
  if (steps == 0 || xv.empty()) throw ShapeError("gru: empty input sequence");
  if (wx.rows() != feat || wx.cols() != g3 || wh.cols() != g3 || b_x.value().size() != g3 ||
      b_h.value().size() != g3) {
    throw ShapeError("gru: inconsistent shapes x " + shape_to_string(xv.shape()) + ", w_x " +
                     shape_to_string(wx.shape()) + ", w_h " + shape_to_string(wh.shape()));
  }
  Tensor<T> gx({steps, g3});
  kernels::gemm(false, false, steps, g3, feat, xv.data(), wx.data(), gx.data(), false);
  const auto& bx = b_x.value();
  const auto& bh = b_h.value();
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t j = 0; j < g3; ++j) gx.at(s, j) += bx[j];

  auto cache = std::make_shared<GruCache<T>>();
  cache->steps = steps;
  cache->hidden = hidden;
  cache->reverse = reverse;
  cache->h_prev = Tensor<T>({steps, hidden});
  cache->r = Tensor<T>({steps, hidden});
  cache->z = Tensor<T>({steps, hidden});
  cache->n = Tensor<T>({steps, hidden});
  cache->hn = Tensor<T>({steps, hidden});

  std::vector<T> h(hidden, T{0}), hh(g3);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t row = reverse ? steps - 1 - s : s;
    for (std::size_t j = 0; j < g3; ++j) hh[j] = bh[j];
    for (std::size_t p = 0; p < hidden; ++p) {
      const T hp = h[p];
      const T* wrow = wh.data() + p * g3;
      for (std::size_t j = 0; j < g3; ++j) hh[j] += hp * wrow[j];
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      const T r = T{1} / (T{1} + std::exp(-(gx.at(row, j) + hh[j])));
      const T z = T{1} / (T{1} + std::exp(-(gx.at(row, hidden + j) + hh[hidden + j])));
      const T n = std::tanh(gx.at(row, 2 * hidden + j) + r * hh[2 * hidden + j]);
      cache->h_prev.at(s, j) = h[j];
      cache->r.at(s, j) = r;
      cache->z.at(s, j) = z;
      cache->n.at(s, j) = n;
      cache->hn.at(s, j) = hh[2 * hidden + j];
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      const T z = cache->z.at(s, j);
      h[j] = (T{1} - z) * cache->n.at(s, j) + z * h[j];
    }
  }
  Tensor<T> out({1, hidden}, std::vector<T>(h.begin(), h.end()));

  return x.tape->push(
      std::move(out), {x, w_x, w_h, b_x, b_h},
      [x, w_x, w_h, b_x, b_h, cache](Tape<T>& t, std::size_t self) {
        const std::size_t steps = cache->steps, hidden = cache->hidden, g3 = 3 * hidden;
        const auto& xv = t.value(x.id);
        const auto& wx = t.value(w_x.id);
        const auto& wh = t.value(w_h.id);
        const std::size_t feat = xv.cols();
        const auto& g = t.grad(self);
        std::vector<T> dh(g.data(), g.data() + hidden), dh_prev(hidden), dhh(g3);
        Tensor<T> dgx({steps, g3});
        const bool want_wh = t.needs_grad(w_h.id);
        const bool want_bh = t.needs_grad(b_h.id);
        for (std::size_t s = steps; s-- > 0;) {
          const std::size_t row = cache->reverse ? steps - 1 - s : s;
          for (std::size_t j = 0; j < hidden; ++j) {
            const T r = cache->r.at(s, j), z = cache->z.at(s, j), n = cache->n.at(s, j);
            const T hp = cache->h_prev.at(s, j);
            const T dn = dh[j] * (T{1} - z);
            const T dz = dh[j] * (hp - n);
            dh_prev[j] = dh[j] * z;
            const T da_n = dn * (T{1} - n * n);
            const T da_z = dz * z * (T{1} - z);
            const T da_r = da_n * cache->hn.at(s, j) * r * (T{1} - r);
            dgx.at(row, j) = da_r;
            dgx.at(row, hidden + j) = da_z;
            dgx.at(row, 2 * hidden + j) = da_n;
            dhh[j] = da_r;
            dhh[hidden + j] = da_z;
            dhh[2 * hidden + j] = da_n * r;
          }
          if (want_wh) {
            auto& gwh = t.grad(w_h.id);
            for (std::size_t p = 0; p < hidden; ++p) {
              const T hp = cache->h_prev.at(s, p);
              T* grow = gwh.data() + p * g3;
              for (std::size_t j = 0; j < g3; ++j) grow[j] += hp * dhh[j];
            }
          }
          if (want_bh) {
            auto& gbh = t.grad(b_h.id);
            for (std::size_t j = 0; j < g3; ++j) gbh[j] += dhh[j];
          }
          for (std::size_t p = 0; p < hidden; ++p) {
            const T* wrow = wh.data() + p * g3;
            T acc{0};
            for (std::size_t j = 0; j < g3; ++j) acc += wrow[j] * dhh[j];
            dh_prev[p] += acc;
          }
          dh.swap(dh_prev);
        }
        if (t.needs_grad(w_x.id))
          kernels::gemm(true, false, feat, g3, steps, xv.data(), dgx.data(), t.grad(w_x.id).data(), true);
        if (t.needs_grad(b_x.id)) {
          auto& gbx = t.grad(b_x.id);
          for (std::size_t s = 0; s < steps; ++s)
            for (std::size_t j = 0; j < g3; ++j) gbx[j] += dgx.at(s, j);
        }
        if (t.needs_grad(x.id))
          kernels::gemm(false, true, steps, feat, g3, dgx.data(), wx.data(), t.grad(x.id).data(), true);
      });
}

#define EEG2TEXT_INSTANTIATE_OPS(T)                                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                                    \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                       \
  template Var<T> sub(Var<T>, Var<T>);                                                       \
  template Var<T> mul(Var<T>, Var<T>);                                                       \
  template Var<T> scale(Var<T>, T);                                                          \
  template Var<T> add_row(Var<T>, Var<T>);                                                   \
  template Var<T> mul_row(Var<T>, Var<T>);                                                   \
  template Var<T> add_constant(Var<T>, const Tensor<T>&);                                    \
  template Var<T> tanh(Var<T>);                                                              \
  template Var<T> sigmoid(Var<T>);                                                           \
  template Var<T> gelu(Var<T>);                                                              \
  template Var<T> softmax_rows(Var<T>);                                                      \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                     \
  template Var<T> transpose(Var<T>);                                                         \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                              \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                              \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                   \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                   \
  template Var<T> gather_rows(Var<T>, std::span<const int>);                                 \
  template Var<T> dropout(Var<T>, double);                                                   \
  template Var<T> sum(Var<T>);                                                               \
  template Var<T> mean(Var<T>);                                                              \
  template Var<T> mse_loss(Var<T>, Var<T>);                                                  \
  template Var<T> cross_entropy(Var<T>, std::span<const int>, int, Reduction);               \
  template Var<T> gru_last_state(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>, bool);

EEG2TEXT_INSTANTIATE_OPS(float)
EEG2TEXT_INSTANTIATE_OPS(double)

#undef EEG2TEXT_INSTANTIATE_OPS

}  // namespace eeg2text::numcore
