#pragma once

// Untaped reference kernels. The tape wraps these and adds the matching
// adjoints; every loop runs in a fixed order so results are bit-reproducible.

#include <cmath>
#include <limits>

#include "sav/numerics/grid.hpp"

namespace sav::kernels {

inline std::size_t conv_out_extent(std::size_t in, std::size_t stride) { return (in - 1) / stride + 1; }

// Zero-padded 3x3 convolution. x: [C,H,W], w: [O,C,3,3], b: [O].
inline FloatGrid conv2d_3x3(const FloatGrid& x, const FloatGrid& w, const FloatGrid& b, std::size_t stride) {
  require(x.rank() == 3 && w.rank() == 4 && b.rank() == 1, "conv2d_3x3: expects x[C,H,W], w[O,C,3,3], b[O]");
  require(w.extent(1) == x.extent(0) && w.extent(2) == 3 && w.extent(3) == 3,
          "conv2d_3x3: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  require(b.extent(0) == w.extent(0), "conv2d_3x3: bias length mismatch");
  require(stride == 1 || stride == 2, "conv2d_3x3: stride must be 1 or 2");
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2), cout = w.extent(0);
  const std::size_t ho = conv_out_extent(h, stride), wo = conv_out_extent(wd, stride);
  FloatGrid y({cout, ho, wo});
  const double* xp = x.data().data();
  const double* wp = w.data().data();
  double* yp = y.data().data();
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = yp + o * ho * wo;
    for (std::size_t i = 0; i < ho * wo; ++i) yo[i] = b[o];
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xp + c * h * wd;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wv = wp[((o * cin + c) * 3 + ky) * 3 + kx];
          // ox range with 0 <= ox*stride + kx - 1 < W
          const std::size_t ox_lo = (kx == 0) ? 1 : 0;
          std::size_t ox_hi = wo;
          while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - 1 >= wd) --ox_hi;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
            double* yrow = yo + oy * wo;
            if (stride == 1) {
              const double* xs = xrow + kx - 1;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += wv * xs[ox];
            } else {
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += wv * xrow[ox * stride + kx - 1];
            }
          }
        }
      }
    }
  }
  return y;
}

// Adjoints of conv2d_3x3 given upstream gradient gy. Any of dx/dw/db may be null.
inline void conv2d_3x3_backward(const FloatGrid& x, const FloatGrid& w, std::size_t stride, const FloatGrid& gy,
                                FloatGrid* dx, FloatGrid* dw, FloatGrid* db) {
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2), cout = w.extent(0);
  const std::size_t ho = gy.extent(1), wo = gy.extent(2);
  const double* xp = x.data().data();
  const double* wp = w.data().data();
  const double* gp = gy.data().data();
  for (std::size_t o = 0; o < cout; ++o) {
    const double* go = gp + o * ho * wo;
    if (db) {
      double s = 0.0;
      for (std::size_t i = 0; i < ho * wo; ++i) s += go[i];
      (*db)[o] += s;
    }
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xp + c * h * wd;
      double* dxc = dx ? dx->data().data() + c * h * wd : nullptr;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((o * cin + c) * 3 + ky) * 3 + kx;
          const double wv = wp[widx];
          const std::size_t ox_lo = (kx == 0) ? 1 : 0;
          std::size_t ox_hi = wo;
          while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - 1 >= wd) --ox_hi;
          double wacc = 0.0;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
            const double* grow = go + oy * wo;
            if (stride == 1) {
              const double* xs = xrow + kx - 1;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) wacc += grow[ox] * xs[ox];
              if (dxc) {
                double* dxs = dxc + static_cast<std::size_t>(iy) * wd + kx - 1;
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) dxs[ox] += wv * grow[ox];
              }
            } else {
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) wacc += grow[ox] * xrow[ox * stride + kx - 1];
              if (dxc) {
                double* dxrow = dxc + static_cast<std::size_t>(iy) * wd;
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) dxrow[ox * stride + kx - 1] += wv * grow[ox];
              }
            }
          }
          if (dw) (*dw)[widx] += wacc;
        }
      }
    }
  }
}

// [m,k] x [k,n] -> [m,n]
inline FloatGrid matmul(const FloatGrid& a, const FloatGrid& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.extent(1) == b.extent(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  FloatGrid c({m, n});
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = cp + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[i * k + p];
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline FloatGrid transpose(const FloatGrid& a) {
  require(a.rank() == 2, "transpose: rank-2 grid required");
  const std::size_t m = a.extent(0), n = a.extent(1);
  FloatGrid t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

// Row-wise softmax of a rank-2 grid, max-shifted for stability.
inline FloatGrid softmax_rows(const FloatGrid& a) {
  require(a.rank() == 2, "softmax_rows: rank-2 grid required");
  const std::size_t m = a.extent(0), n = a.extent(1);
  FloatGrid out(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.data().data() + i * n;
    double* orow = out.data().data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < n; ++j) orow[j] *= inv;
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Cosine similarity; a zero-norm operand yields 0 and a flagged warning.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine: length mismatch");
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    warn("cosine: zero-norm operand, defined as 0");
    return 0.0;
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine(const FloatGrid& a, const FloatGrid& b) {
  require(a.size() == b.size(), "cosine: size mismatch");
  return cosine(a.data(), b.data());
}

// Nearest-neighbour 2x upsample of [C,H,W].
inline FloatGrid upsample2x(const FloatGrid& x) {
  require(x.rank() == 3, "upsample2x: [C,H,W] required");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  FloatGrid y({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j) y.at(k, i, j) = x.at(k, i / 2, j / 2);
  return y;
}

}  // namespace sav::kernels
