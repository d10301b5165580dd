#pragma once

#include <string>
#include <vector>

#include "sav/numerics/rng.hpp"
#include "sav/numerics/tape.hpp"

namespace sav {

/// Ordered collection of named weight grids. Order is insertion order and is
/// also the on-disk order, so serialization and optimizer state line up.
class ParameterSet {
 public:
  std::size_t add(std::string name, FloatGrid value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  FloatGrid& operator[](std::size_t i) { return values_.at(i); }
  const FloatGrid& operator[](std::size_t i) const { return values_.at(i); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw ContractError("ParameterSet: no parameter named '" + name + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  std::vector<Var> bind(Tape& tape, bool requires_grad) const {
    std::vector<Var> vars;
    vars.reserve(values_.size());
    for (const auto& v : values_) vars.push_back(tape.input(v, requires_grad));
    return vars;
  }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!v.all_finite()) return false;
    return true;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<FloatGrid> values_;
};

// He-style normal init for a 3x3 conv weight [O, C, 3, 3].
inline FloatGrid conv_init(Rng& rng, std::size_t out, std::size_t in, double gain = 1.0) {
  FloatGrid w = gaussian(rng, {out, in, 3, 3});
  const double s = gain * std::sqrt(2.0 / static_cast<double>(in * 9));
  for (auto& v : w.data()) v *= s;
  return w;
}

inline FloatGrid dense_init(Rng& rng, std::size_t rows, std::size_t cols, double gain = 1.0) {
  FloatGrid w = gaussian(rng, {rows, cols});
  const double s = gain / std::sqrt(static_cast<double>(rows));
  for (auto& v : w.data()) v *= s;
  return w;
}

enum class OptimizerKind { kSgdMomentum, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double lr = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;     // Adam only
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const ParameterSet& params) : cfg_(cfg) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params[i].shape());
      if (cfg_.kind == OptimizerKind::kAdam) v_.emplace_back(params[i].shape());
    }
  }

  void step(ParameterSet& params, const std::vector<FloatGrid>& grads) {
    require(grads.size() == params.size(), "Optimizer::step: gradient count mismatch");
    ++t_;
    for (std::size_t p = 0; p < params.size(); ++p) {
      FloatGrid& w = params[p];
      const FloatGrid& g = grads[p];
      FloatGrid& m = m_[p];
      if (cfg_.kind == OptimizerKind::kSgdMomentum) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.momentum * m[i] + g[i];
          w[i] -= cfg_.lr * m[i];
        }
      } else {
        FloatGrid& v = v_[p];
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
          w[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<FloatGrid> m_;
  std::vector<FloatGrid> v_;
  std::size_t t_ = 0;
};

inline std::vector<FloatGrid> zero_grads(const ParameterSet& params) {
  std::vector<FloatGrid> g;
  for (std::size_t i = 0; i < params.size(); ++i) g.emplace_back(params[i].shape());
  return g;
}

inline void accumulate_grads(std::vector<FloatGrid>& acc, const Tape& tape, const std::vector<Var>& vars,
                             double scale = 1.0) {
  for (std::size_t p = 0; p < vars.size(); ++p) {
    const FloatGrid g = tape.grad(vars[p]);
    for (std::size_t i = 0; i < g.size(); ++i) acc[p][i] += scale * g[i];
  }
}

}  // namespace sav
