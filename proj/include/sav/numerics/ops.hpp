#pragma once

// Differentiable primitives over the Tape. The set is closed on purpose: it
// covers the denoiser, autoencoder, feature extractor, deflicker network and
// the structure-loss gradient path, and nothing else.

#include <cmath>
#include <vector>

#include "sav/numerics/kernels.hpp"
#include "sav/numerics/tape.hpp"

namespace sav::ops {

namespace detail {
inline bool wants(Tape& t, const Var& v) { return t.requires_grad(v); }

inline void accumulate(Tape& t, const Var& v, const FloatGrid& g, double scale = 1.0) {
  if (!wants(t, v)) return;
  FloatGrid& dst = t.grad_buffer(v.id());
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * g[i];
}
}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ops::add");
  return a.tape().push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const FloatGrid& g) {
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ops::sub");
  return a.tape().push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const FloatGrid& g) {
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, g, -1.0);
  });
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "ops::mul");
  FloatGrid out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().push(std::move(out), {a, b}, [a, b](Tape& t, const FloatGrid& g) {
    if (detail::wants(t, a)) {
      FloatGrid& da = t.grad_buffer(a.id());
      const FloatGrid& bv = t.value(b.id());
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (detail::wants(t, b)) {
      FloatGrid& db = t.grad_buffer(b.id());
      const FloatGrid& av = t.value(a.id());
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

inline Var scale(const Var& a, double s) {
  return a.tape().push(s * a.value(), {a}, [a, s](Tape& t, const FloatGrid& g) { detail::accumulate(t, a, g, s); });
}

inline Var matmul(const Var& a, const Var& b) {
  return a.tape().push(kernels::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const FloatGrid& g) {
    if (detail::wants(t, a)) {
      detail::accumulate(t, a, kernels::matmul(g, kernels::transpose(t.value(b.id()))));
    }
    if (detail::wants(t, b)) {
      detail::accumulate(t, b, kernels::matmul(kernels::transpose(t.value(a.id())), g));
    }
  });
}

inline Var transpose(const Var& a) {
  return a.tape().push(kernels::transpose(a.value()), {a},
                       [a](Tape& t, const FloatGrid& g) { detail::accumulate(t, a, kernels::transpose(g)); });
}

inline Var reshape(const Var& a, Shape shape) {
  return a.tape().push(a.value().reshaped(std::move(shape)), {a},
                       [a](Tape& t, const FloatGrid& g) { detail::accumulate(t, a, g); });
}

inline Var conv2d_3x3(const Var& x, const Var& w, const Var& b, std::size_t stride = 1) {
  return x.tape().push(kernels::conv2d_3x3(x.value(), w.value(), b.value(), stride), {x, w, b},
                       [x, w, b, stride](Tape& t, const FloatGrid& g) {
                         FloatGrid* dx = detail::wants(t, x) ? &t.grad_buffer(x.id()) : nullptr;
                         FloatGrid* dw = detail::wants(t, w) ? &t.grad_buffer(w.id()) : nullptr;
                         FloatGrid* db = detail::wants(t, b) ? &t.grad_buffer(b.id()) : nullptr;
                         kernels::conv2d_3x3_backward(t.value(x.id()), t.value(w.id()), stride, g, dx, dw, db);
                       });
}

inline Var upsample2x(const Var& x) {
  return x.tape().push(kernels::upsample2x(x.value()), {x}, [x](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    const std::size_t c = dx.extent(0), h = dx.extent(1), w = dx.extent(2);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t i = 0; i < 2 * h; ++i)
        for (std::size_t j = 0; j < 2 * w; ++j) dx.at(k, i / 2, j / 2) += g.at(k, i, j);
  });
}

inline Var relu(const Var& x) {
  FloatGrid out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape().push(std::move(out), {x}, [x](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    const FloatGrid& xv = t.value(x.id());
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xv[i] > 0.0) dx[i] += g[i];
  });
}

// |x| with the subgradient sign(0) = 0.
inline Var abs(const Var& x) {
  FloatGrid out = x.value();
  for (auto& v : out.data()) v = std::abs(v);
  return x.tape().push(std::move(out), {x}, [x](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    const FloatGrid& xv = t.value(x.id());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * static_cast<double>((xv[i] > 0.0) - (xv[i] < 0.0));
  });
}

inline Var softmax_rows(const Var& x) {
  // The adjoint reads the node's own output, which lands at the next slot.
  const std::size_t self = x.tape().size();
  return x.tape().push(kernels::softmax_rows(x.value()), {x}, [x, self](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    const FloatGrid& y2 = t.value(self);
    FloatGrid& dx = t.grad_buffer(x.id());
    const std::size_t m = y2.extent(0), n = y2.extent(1);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y2[i * n + j];
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += y2[i * n + j] * (g[i * n + j] - s);
    }
  });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().push(FloatGrid::scalar(s), {x}, [x](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    for (auto& v : dx.data()) v += g[0];
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// Per-row mean of [R, N] -> [R].
inline Var row_means(const Var& x) {
  require(x.value().rank() == 2, "row_means: rank-2 grid required");
  const std::size_t r = x.value().extent(0), n = x.value().extent(1);
  FloatGrid out({r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x.value()[i * n + j];
    out[i] = s / static_cast<double>(n);
  }
  return x.tape().push(std::move(out), {x}, [x, r, n](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += g[i] / static_cast<double>(n);
  });
}

// Scalar cosine similarity of two equal-size grids; zero-norm -> 0 (warned).
inline Var cosine(const Var& a, const Var& b) {
  require(a.value().size() == b.value().size(), "ops::cosine: size mismatch");
  const double c = kernels::cosine(a.value(), b.value());
  return a.tape().push(FloatGrid::scalar(c), {a, b}, [a, b](Tape& t, const FloatGrid& g) {
    const FloatGrid& av = t.value(a.id());
    const FloatGrid& bv = t.value(b.id());
    const double na = std::sqrt(kernels::dot(av.data(), av.data()));
    const double nb = std::sqrt(kernels::dot(bv.data(), bv.data()));
    if (na == 0.0 || nb == 0.0) return;
    const double cs = kernels::dot(av.data(), bv.data()) / (na * nb);
    if (detail::wants(t, a)) {
      FloatGrid& da = t.grad_buffer(a.id());
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[0] * (bv[i] / (na * nb) - cs * av[i] / (na * na));
    }
    if (detail::wants(t, b)) {
      FloatGrid& db = t.grad_buffer(b.id());
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[0] * (av[i] / (na * nb) - cs * bv[i] / (nb * nb));
    }
  });
}

// Rows scaled to unit L2 norm; zero rows stay zero.
inline Var normalize_rows(const Var& x) {
  require(x.value().rank() == 2, "normalize_rows: rank-2 grid required");
  const std::size_t m = x.value().extent(0), n = x.value().extent(1);
  FloatGrid y = x.value();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += y[i * n + j] * y[i * n + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      warn("normalize_rows: zero-norm row, cosine defined as 0");
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= norms[i];
  }
  FloatGrid ycopy = y;
  return x.tape().push(std::move(y), {x}, [x, m, n, norms, ycopy](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < m; ++i) {
      if (norms[i] == 0.0) continue;
      double yg = 0.0;
      for (std::size_t j = 0; j < n; ++j) yg += ycopy[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += (g[i * n + j] - ycopy[i * n + j] * yg) / norms[i];
    }
  });
}

// Rows [begin, end) along axis 0.
inline Var slice(const Var& x, std::size_t begin, std::size_t end) {
  const FloatGrid& xv = x.value();
  require(begin < end && end <= xv.extent(0), "ops::slice: range out of bounds");
  const std::size_t inner = xv.size() / xv.extent(0);
  Shape shape = xv.shape();
  shape[0] = end - begin;
  std::vector<double> data(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * inner),
                           xv.data().begin() + static_cast<std::ptrdiff_t>(end * inner));
  return x.tape().push(FloatGrid(std::move(shape), std::move(data)), {x}, [x, begin, inner](Tape& t, const FloatGrid& g) {
    if (!detail::wants(t, x)) return;
    FloatGrid& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) dx[begin * inner + i] += g[i];
  });
}

// Concatenation along axis 0; trailing extents must agree.
inline Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "ops::concat: no inputs");
  Shape shape = parts[0].value().shape();
  std::size_t rows = 0;
  std::vector<double> data;
  for (const auto& p : parts) {
    const Shape& s = p.value().shape();
    require(s.size() == shape.size() && std::equal(s.begin() + 1, s.end(), shape.begin() + 1),
            "ops::concat: trailing extents differ");
    rows += s[0];
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  shape[0] = rows;
  return parts[0].tape().push(FloatGrid(std::move(shape), std::move(data)), parts, [parts](Tape& t, const FloatGrid& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = t.value(p.id()).size();
      if (detail::wants(t, p)) {
        FloatGrid& dp = t.grad_buffer(p.id());
        for (std::size_t i = 0; i < n; ++i) dp[i] += g[off + i];
      }
      off += n;
    }
  });
}

// x[C, ...] + v[C] broadcast over trailing axes.
inline Var add_channel_bias(const Var& x, const Var& v) {
  const FloatGrid& xv = x.value();
  require(v.value().rank() == 1 && v.value().extent(0) == xv.extent(0), "add_channel_bias: length mismatch");
  const std::size_t c = xv.extent(0), inner = xv.size() / c;
  FloatGrid out = xv;
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < inner; ++i) out[k * inner + i] += v.value()[k];
  return x.tape().push(std::move(out), {x, v}, [x, v, c, inner](Tape& t, const FloatGrid& g) {
    detail::accumulate(t, x, g);
    if (detail::wants(t, v)) {
      FloatGrid& dv = t.grad_buffer(v.id());
      for (std::size_t k = 0; k < c; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < inner; ++i) s += g[k * inner + i];
        dv[k] += s;
      }
    }
  });
}

inline Var square_mean_diff(const Var& a, const Var& b) {
  Var d = sub(a, b);
  return mean(mul(d, d));
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace sav::ops
