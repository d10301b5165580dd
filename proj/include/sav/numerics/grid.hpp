#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sav/error.hpp"

namespace sav {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles. The carrier type for frames, latents,
/// features and weights. Rank-3 grids are laid out as [channels, height, width].
class FloatGrid {
 public:
  FloatGrid() = default;

  explicit FloatGrid(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(shape_size(shape_), fill);
  }

  FloatGrid(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    require(data_.size() == shape_size(shape_),
            "FloatGrid: data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_str(shape_));
  }

  static FloatGrid scalar(double v) { return FloatGrid({1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const& { return data_; }
  std::span<double> data() & { return data_; }
  std::span<const double> data() const&& = delete;  // would dangle
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  double item() const {
    require(data_.size() == 1, "FloatGrid::item on non-scalar grid " + shape_str(shape_));
    return data_[0];
  }

  FloatGrid reshaped(Shape shape) const {
    require(shape_size(shape) == data_.size(),
            "reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    return FloatGrid(std::move(shape), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool same_shape(const FloatGrid& o) const { return shape_ == o.shape_; }

  friend bool operator==(const FloatGrid& a, const FloatGrid& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    for (auto e : shape_) {
      require(e > 0, "FloatGrid: extents must be positive, got " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const FloatGrid& a, const FloatGrid& b, const char* what) {
  require(a.same_shape(b), std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
}

// Plain (untaped) element-wise helpers used by samplers and schedules.

inline FloatGrid operator+(const FloatGrid& a, const FloatGrid& b) {
  require_same_shape(a, b, "add");
  FloatGrid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline FloatGrid operator-(const FloatGrid& a, const FloatGrid& b) {
  require_same_shape(a, b, "sub");
  FloatGrid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline FloatGrid operator*(double s, const FloatGrid& a) {
  FloatGrid out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

// a*x + b*y with a single rounding order.
inline FloatGrid axpby(double a, const FloatGrid& x, double b, const FloatGrid& y) {
  require_same_shape(x, y, "axpby");
  FloatGrid out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

inline double mean(const FloatGrid& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s / static_cast<double>(a.size());
}

inline double mean_abs_diff(const FloatGrid& a, const FloatGrid& b) {
  require_same_shape(a, b, "mean_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double mse(const FloatGrid& a, const FloatGrid& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double l2_norm(const FloatGrid& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs_diff(const FloatGrid& a, const FloatGrid& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline FloatGrid clipped(const FloatGrid& a, double lo, double hi) {
  FloatGrid out = a;
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  return out;
}

inline void require_finite(const FloatGrid& a, const std::string& where) {
  if (!a.all_finite()) {
    throw NumericalError("non-finite values in " + where);
  }
}

}  // namespace sav
