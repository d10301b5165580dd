#pragma once

#include <functional>
#include <vector>

#include "sav/numerics/ops.hpp"

namespace sav {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  FloatGrid analytic;
  std::vector<double> numeric;  // one entry per checked coordinate
};

// Builds a scalar on the given tape from a differentiable input Var.
using ScalarFn = std::function<Var(Tape&, const Var&)>;

/// Compares tape gradients against central differences. Relative error uses
/// the denominator max(|analytic|, |numeric|, 1e-8). `coords` restricts the
/// check to a subset of coordinates (all when empty).
inline GradCheckReport grad_check(const ScalarFn& f, const FloatGrid& x, double h,
                                  const std::vector<std::size_t>& coords = {}) {
  require(h >= 1e-5 && h <= 1e-3, "grad_check: step h must lie in [1e-5, 1e-3]");
  auto eval = [&f](const FloatGrid& at) {
    Tape tape;
    Var in = tape.constant(at);
    const double v = f(tape, in).value().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: function value is not finite");
    return v;
  };

  GradCheckReport report;
  {
    Tape tape;
    Var in = tape.input(x, true);
    Var out = f(tape, in);
    if (!std::isfinite(out.value().item())) throw NumericalError("grad_check: function value is not finite");
    tape.backward(out);
    report.analytic = tape.grad(in);
  }

  std::vector<std::size_t> idx = coords;
  if (idx.empty()) {
    idx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
  }
  FloatGrid probe = x;
  for (std::size_t i : idx) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    const double num = (up - down) / (2.0 * h);
    report.numeric.push_back(num);
    const double ana = report.analytic[i];
    const double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
    const double rel = std::abs(ana - num) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace sav
