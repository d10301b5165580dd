#pragma once

#include <cmath>
#include <vector>

#include "sav/numerics/grid.hpp"

namespace sav {

/// Per-timestep diffusion constants for t = 1..T. Index 0 of each array holds
/// the t = 0 convention (alpha_bar_0 = 1) so callers can index by t directly.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas) {
    require(!betas.empty(), "NoiseSchedule: need at least one step");
    const std::size_t n = betas.size();
    beta_.assign(n + 1, 0.0);
    alpha_.assign(n + 1, 1.0);
    alpha_bar_.assign(n + 1, 1.0);
    beta_tilde_.assign(n + 1, 0.0);
    for (std::size_t t = 1; t <= n; ++t) {
      const double b = betas[t - 1];
      require(b > 0.0 && b < 1.0, "NoiseSchedule: beta_t must lie in (0, 1)");
      beta_[t] = b;
      alpha_[t] = 1.0 - b;
      alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
      // Zero numerator (t = 1, or alpha_bar still exactly 1) means zero variance.
      const double num = 1.0 - alpha_bar_[t - 1];
      beta_tilde_[t] = num == 0.0 ? 0.0 : num / (1.0 - alpha_bar_[t]) * b;
    }
  }

  std::size_t steps() const { return beta_.size() - 1; }
  double beta(std::size_t t) const { return beta_.at(check(t)); }
  double alpha(std::size_t t) const { return alpha_.at(check(t)); }
  double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar_.at(check(t)); }
  double beta_tilde(std::size_t t) const { return beta_tilde_.at(check(t)); }

  std::size_t check(std::size_t t) const {
    require(t >= 1 && t <= steps(),
            "timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    return t;
  }

 private:
  std::vector<double> beta_, alpha_, alpha_bar_, beta_tilde_;
};

// Linear beta ramp, inclusive of both endpoints.
inline NoiseSchedule make_linear_schedule(std::size_t steps, double beta_start, double beta_end) {
  require(steps >= 1, "make_linear_schedule: T must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "make_linear_schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + frac * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas));
}

// q(x_t | x_0) sample: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
inline FloatGrid forward_sample(const FloatGrid& x0, std::size_t t, const FloatGrid& eps, const NoiseSchedule& s) {
  require_same_shape(x0, eps, "forward_sample");
  const double ab = s.alpha_bar(s.check(t));
  return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

// Mean of q(x_{t-1} | x_t, x_0).
inline FloatGrid posterior_mean(const FloatGrid& x_t, const FloatGrid& x0, std::size_t t, const NoiseSchedule& s) {
  require_same_shape(x_t, x0, "posterior_mean");
  s.check(t);
  const double ab = s.alpha_bar(t), ab_prev = s.alpha_bar(t - 1);
  const double c0 = std::sqrt(ab_prev) * s.beta(t) / (1.0 - ab);
  const double ct = std::sqrt(s.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
  return axpby(c0, x0, ct, x_t);
}

inline double posterior_variance(std::size_t t, const NoiseSchedule& s) { return s.beta_tilde(t); }

// Inverts forward_sample for x0 given a noise estimate.
inline FloatGrid predict_x0_from_eps(const FloatGrid& z_t, const FloatGrid& eps_hat, std::size_t t,
                                     const NoiseSchedule& s) {
  require_same_shape(z_t, eps_hat, "predict_x0_from_eps");
  const double ab = s.alpha_bar(s.check(t));
  const double inv = 1.0 / std::sqrt(ab);
  return axpby(inv, z_t, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

}  // namespace sav
