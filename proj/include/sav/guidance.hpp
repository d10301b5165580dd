#pragma once

#include <cmath>

#include "sav/numerics/grid.hpp"

namespace sav {

struct GuidanceScales {
  double content = 1.2;  // s_I
  double style = 1.5;    // s_T
  double mask = 0.5;     // s_M

  bool finite() const { return std::isfinite(content) && std::isfinite(style) && std::isfinite(mask); }
  bool any_negative() const { return content < 0.0 || style < 0.0 || mask < 0.0; }
};

// Classifier-free guidance uncond + s (cond - uncond), evaluated in the
// weighted form (1 - s) uncond + s cond so that s = 1 returns cond exactly.
inline FloatGrid cfg(const FloatGrid& eps_cond, const FloatGrid& eps_uncond, double s) {
  require_same_shape(eps_cond, eps_uncond, "cfg");
  FloatGrid out(eps_cond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - s) * eps_uncond[i] + s * eps_cond[i];
  return out;
}

/// Three-condition composition
///   (1 - s_I - s_T - s_M) eps_null + s_I eps_I + s_T eps_T + s_M eps_M.
/// The coefficients always sum to one, so the result is an affine combination.
inline FloatGrid composed_guidance(const FloatGrid& eps_null, const FloatGrid& eps_content, const FloatGrid& eps_style,
                                   const FloatGrid& eps_mask, const GuidanceScales& s) {
  require_same_shape(eps_null, eps_content, "composed_guidance");
  require_same_shape(eps_null, eps_style, "composed_guidance");
  require_same_shape(eps_null, eps_mask, "composed_guidance");
  require(s.finite(), "composed_guidance: scales must be finite");
  const double w0 = 1.0 - s.content - s.style - s.mask;
  FloatGrid out(eps_null.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = w0 * eps_null[i] + s.content * eps_content[i] + s.style * eps_style[i] + s.mask * eps_mask[i];
  }
  return out;
}

}  // namespace sav
