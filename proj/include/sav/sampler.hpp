#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "sav/autoencoder.hpp"
#include "sav/denoiser.hpp"
#include "sav/frames.hpp"
#include "sav/guidance.hpp"
#include "sav/structure.hpp"
#include "sav/temporal.hpp"

namespace sav {

// Mean of the ancestral step. kPaper divides by sqrt(abar_t); kDdpm divides
// by sqrt(alpha_t), which equals the closed-form posterior mean at
// x0 = predict_x0_from_eps.
enum class MeanConvention { kDdpm, kPaper };

inline MeanConvention parse_mean_convention(const std::string& s) {
  if (s == "ddpm") return MeanConvention::kDdpm;
  if (s == "paper") return MeanConvention::kPaper;
  throw ContractError("unknown mean convention '" + s + "' (expected ddpm|paper)");
}

inline std::string to_string(MeanConvention m) { return m == MeanConvention::kDdpm ? "ddpm" : "paper"; }

struct SamplerConfig {
  std::size_t steps = 30;
  std::uint64_t seed = 1234;
  GuidanceScales scales;
  StructureLossConfig structure;
  double noising_strength = 0.8;
  MeanConvention mean = MeanConvention::kDdpm;
  std::size_t style = 1;
  bool use_temporal = true;
};

struct Models {
  const Autoencoder& autoencoder;
  const Denoiser& denoiser;
  const FeatureExtractor& extractor;
  const DeflickerNet* deflicker = nullptr;
};

/// Optional per-step observer for latent and mask dumps. Called with the
/// frame index, timestep, z_t entering the step and the c_M mask.
struct SamplerTrace {
  std::function<void(std::size_t frame, std::size_t t, const FloatGrid& z_t, const FloatGrid& mask)> on_step;
  std::function<void(std::size_t frame, const FloatGrid& base_noise, std::uint64_t rng_draws)> on_base_noise;
};

inline FloatGrid ddpm_mean(const FloatGrid& z_t, const FloatGrid& eps_tilde, std::size_t t, const NoiseSchedule& s,
                           MeanConvention conv) {
  require_same_shape(z_t, eps_tilde, "ddpm_step");
  s.check(t);
  const double coef = (1.0 - s.alpha(t)) / std::sqrt(1.0 - s.alpha_bar(t));
  const double inv = 1.0 / std::sqrt(conv == MeanConvention::kDdpm ? s.alpha(t) : s.alpha_bar(t));
  return axpby(inv, z_t, -coef * inv, eps_tilde);
}

/// One ancestral step: mean plus sqrt(beta_tilde_t) noise for t > 1; the t = 1
/// step is deterministic and draws nothing from the rng.
inline FloatGrid ddpm_step(const FloatGrid& z_t, const FloatGrid& eps_tilde, std::size_t t, const NoiseSchedule& s,
                           Rng& rng, MeanConvention conv = MeanConvention::kDdpm) {
  FloatGrid mean = ddpm_mean(z_t, eps_tilde, t, s, conv);
  if (t == 1) return mean;
  const FloatGrid noise = gaussian(rng, z_t.shape());
  return axpby(1.0, mean, std::sqrt(s.beta_tilde(t)), noise);
}

inline std::size_t start_timestep(const SamplerConfig& cfg) {
  const auto t = static_cast<std::size_t>(std::lround(cfg.noising_strength * static_cast<double>(cfg.steps)));
  return std::max<std::size_t>(1, t);
}

inline void validate(const SamplerConfig& cfg, const NoiseSchedule& schedule) {
  require(cfg.steps >= 1 && cfg.steps <= schedule.steps(), "sampler: steps must lie in [1, schedule T]");
  require(cfg.noising_strength > 0.0 && cfg.noising_strength <= 1.0, "sampler: noising_strength must lie in (0, 1]");
  require(cfg.structure.lambda >= 0.0, "sampler: lambda must be >= 0");
  require(cfg.scales.finite(), "sampler: guidance scales must be finite");
}

/// Guided denoising of a single frame. The base noise comes from a fresh rng
/// at (seed, sampler stream), so every frame of a video shares it.
inline FloatGrid stylize_frame(const FloatGrid& frame, const SamplerConfig& cfg, const Models& m,
                               const NoiseSchedule& schedule, const SamplerTrace* trace = nullptr,
                               std::size_t frame_index = 0) {
  validate(cfg, schedule);
  const Autoencoder& ae = m.autoencoder;
  const Denoiser& net = m.denoiser;
  require(net.config.timesteps == schedule.steps(), "sampler: denoiser/schedule T mismatch");

  Rng rng(cfg.seed, streams::kSampler);
  const FloatGrid content = ae.encode(frame);
  const std::size_t t0 = start_timestep(cfg);
  const FloatGrid base = gaussian(rng, content.shape());
  if (trace && trace->on_base_noise) trace->on_base_noise(frame_index, base, rng.draws());

  FloatGrid z = forward_sample(content, t0, base, schedule);
  ConditionSet content_only;
  content_only.content = content;
  ConditionSet style_only;
  style_only.style = cfg.style;

  for (std::size_t t = t0; t >= 1; --t) {
    ConditionSet observed;
    observed.content = content;
    observed.style = cfg.style;
    const DenoiserOutput first = net.forward(z, t, observed);
    ConditionSet mask_only;
    mask_only.mask = mask_condition_from_attention(first.attention);
    if (trace && trace->on_step) trace->on_step(frame_index, t, z, *mask_only.mask);

    FloatGrid guided_input = z;
    if (cfg.structure.lambda != 0.0) {
      const FloatGrid dz = latent_gradient(z, t, first.eps, frame, ae, m.extractor, cfg.structure, schedule);
      guided_input = axpby(1.0, z, -cfg.structure.lambda, dz);
    }

    const FloatGrid eps_null = net.forward(guided_input, t, ConditionSet::null()).eps;
    // A zero-scale term contributes exactly nothing, so its pass is skipped.
    auto pass = [&](const ConditionSet& c, double scale) {
      return scale == 0.0 ? eps_null : net.forward(guided_input, t, c).eps;
    };
    const FloatGrid eps_content = pass(content_only, cfg.scales.content);
    const FloatGrid eps_style = pass(style_only, cfg.scales.style);
    const FloatGrid eps_mask = pass(mask_only, cfg.scales.mask);
    const FloatGrid eps_tilde = composed_guidance(eps_null, eps_content, eps_style, eps_mask, cfg.scales);

    z = ddpm_step(z, eps_tilde, t, schedule, rng, cfg.mean);
    if (!z.all_finite()) {
      throw NumericalError("sampler: non-finite latent at step t=" + std::to_string(t) + " (frame " +
                           std::to_string(frame_index) + ")");
    }
  }
  FloatGrid out = ae.decode(z);
  require_finite(out, "sampler: decoded frame " + std::to_string(frame_index));
  return clipped(out, 0.0, 1.0);
}

struct VideoResult {
  FrameSequence output;  // after temporal refinement (== raw when disabled)
  FrameSequence raw;     // per-frame sampler outputs
};

/// Stylizes every frame independently (optionally on `workers` threads), then
/// chains the temporal refinement: frame 1 passes through, frame f >= 2 is
/// refined from (raw^f, raw^{f-1}, y^{f-1}).
inline VideoResult stylize_video(const FrameSequence& seq, const SamplerConfig& cfg, const Models& m,
                                 const NoiseSchedule& schedule, std::size_t workers = 1,
                                 const SamplerTrace* trace = nullptr) {
  require(!seq.empty(), "stylize_video: empty sequence");
  seq.validate(false);
  VideoResult result;
  result.raw.fps = seq.fps;
  result.raw.frames.resize(seq.size());
  workers = std::max<std::size_t>(1, std::min(workers, seq.size()));
  if (workers == 1) {
    for (std::size_t f = 0; f < seq.size(); ++f) result.raw[f] = stylize_frame(seq[f], cfg, m, schedule, trace, f);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t f = w; f < seq.size(); f += workers)
            result.raw[f] = stylize_frame(seq[f], cfg, m, schedule, nullptr, f);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  if (cfg.use_temporal && m.deflicker != nullptr && seq.size() >= 2) {
    result.output = deflicker_sequence(result.raw, *m.deflicker);
  } else {
    result.output = result.raw;
  }
  return result;
}

}  // namespace sav
