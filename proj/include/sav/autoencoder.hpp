#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sav/numerics/ops.hpp"
#include "sav/numerics/params.hpp"

namespace sav {

enum class AutoencoderMode { kIdentity, kLearned };

struct AutoencoderConfig {
  AutoencoderMode mode = AutoencoderMode::kLearned;
  std::size_t pixel_channels = 3;
  std::size_t latent_channels = 4;
  std::size_t hidden = 16;
};

/// Latent stage E/D. Learned mode: conv+relu then a stride-2 conv down to the
/// latent, and the mirror image (nearest upsample, conv+relu, conv) back up.
/// Latents are multiplied by `latent_scale` so the diffusion sees roughly unit
/// RMS values.
struct Autoencoder {
  enum Param : std::size_t { kEncW1, kEncB1, kEncW2, kEncB2, kDecW1, kDecB1, kDecW2, kDecB2 };

  AutoencoderConfig config;
  ParameterSet params;
  double latent_scale = 1.0;

  static Autoencoder identity(std::size_t pixel_channels = 3) {
    Autoencoder ae;
    ae.config.mode = AutoencoderMode::kIdentity;
    ae.config.pixel_channels = pixel_channels;
    ae.config.latent_channels = pixel_channels;
    return ae;
  }

  static Autoencoder initialize(const AutoencoderConfig& cfg, Rng& rng) {
    Autoencoder ae;
    ae.config = cfg;
    if (cfg.mode == AutoencoderMode::kIdentity) {
      ae.config.latent_channels = cfg.pixel_channels;
      return ae;
    }
    const std::size_t p = cfg.pixel_channels, l = cfg.latent_channels, h = cfg.hidden;
    ae.params.add("enc.w1", conv_init(rng, h, p));
    ae.params.add("enc.b1", FloatGrid({h}));
    ae.params.add("enc.w2", conv_init(rng, l, h, 0.5));
    ae.params.add("enc.b2", FloatGrid({l}));
    ae.params.add("dec.w1", conv_init(rng, h, l));
    ae.params.add("dec.b1", FloatGrid({h}));
    ae.params.add("dec.w2", conv_init(rng, p, h, 0.5));
    ae.params.add("dec.b2", FloatGrid({p}));
    return ae;
  }

  bool learned() const { return config.mode == AutoencoderMode::kLearned; }

  Shape latent_shape(const Shape& pixel) const {
    require(pixel.size() == 3, "Autoencoder: frames are [C,H,W]");
    if (!learned()) return pixel;
    return {config.latent_channels, (pixel[1] + 1) / 2, (pixel[2] + 1) / 2};
  }

  void check_pixel(const Shape& s) const {
    require(s.size() == 3 && s[0] == config.pixel_channels,
            "Autoencoder: frame shape " + shape_str(s) + " does not match " +
                std::to_string(config.pixel_channels) + " channels");
  }

  void check_latent(const Shape& s) const {
    require(s.size() == 3 && s[0] == config.latent_channels,
            "Autoencoder: latent shape " + shape_str(s) + " does not match " +
                std::to_string(config.latent_channels) + " channels");
  }

  // Taped versions; `w` comes from params.bind().
  Var encode(const Var& x, const std::vector<Var>& w) const {
    check_pixel(x.shape());
    if (!learned()) return x;
    Var h = ops::relu(ops::conv2d_3x3(x, w[kEncW1], w[kEncB1], 1));
    return ops::scale(ops::conv2d_3x3(h, w[kEncW2], w[kEncB2], 2), latent_scale);
  }

  Var decode(const Var& z, const std::vector<Var>& w) const {
    check_latent(z.shape());
    if (!learned()) return z;
    Var u = ops::upsample2x(ops::scale(z, 1.0 / latent_scale));
    Var h = ops::relu(ops::conv2d_3x3(u, w[kDecW1], w[kDecB1], 1));
    return ops::conv2d_3x3(h, w[kDecW2], w[kDecB2], 1);
  }

  FloatGrid encode(const FloatGrid& x) const {
    if (!learned()) {
      check_pixel(x.shape());
      return x;
    }
    Tape tape;
    auto w = params.bind(tape, false);
    return encode(tape.constant(x), w).value();
  }

  FloatGrid decode(const FloatGrid& z) const {
    if (!learned()) {
      check_latent(z.shape());
      return z;
    }
    Tape tape;
    auto w = params.bind(tape, false);
    return decode(tape.constant(z), w).value();
  }
};

struct AutoencoderTrainConfig {
  std::size_t steps = 600;
  std::size_t batch = 8;
  double lr = 3e-3;
};

struct AutoencoderTrainResult {
  Autoencoder model;
  std::vector<double> losses;  // per-step batch MSE
};

// Full-frame MSE reconstruction training with Adam. The latent scale is fixed
// afterwards from the RMS of the training latents.
inline AutoencoderTrainResult train_autoencoder(std::span<const FloatGrid> frames, const AutoencoderConfig& cfg,
                                                const AutoencoderTrainConfig& tc, Rng& rng) {
  require(!frames.empty(), "train_autoencoder: empty dataset");
  AutoencoderTrainResult result;
  result.model = Autoencoder::initialize(cfg, rng);
  Autoencoder& ae = result.model;
  if (!ae.learned()) return result;

  Optimizer opt({OptimizerKind::kAdam, tc.lr}, ae.params);
  for (std::size_t step = 0; step < tc.steps; ++step) {
    auto grads = zero_grads(ae.params);
    double loss = 0.0;
    for (std::size_t b = 0; b < tc.batch; ++b) {
      const FloatGrid& x = frames[rng.below(static_cast<std::uint32_t>(frames.size()))];
      Tape tape;
      auto w = ae.params.bind(tape, true);
      Var in = tape.constant(x);
      Var rec = ae.decode(ae.encode(in, w), w);
      Var l = ops::square_mean_diff(rec, in);
      tape.backward(l);
      loss += l.value().item();
      accumulate_grads(grads, tape, w, 1.0 / static_cast<double>(tc.batch));
    }
    loss /= static_cast<double>(tc.batch);
    if (!std::isfinite(loss)) throw NumericalError("autoencoder: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(loss);
    opt.step(ae.params, grads);
  }

  double sq = 0.0;
  std::size_t n = 0;
  ae.latent_scale = 1.0;
  for (const auto& x : frames) {
    const FloatGrid z = ae.encode(x);
    for (double v : z.data()) sq += v * v;
    n += z.size();
  }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  ae.latent_scale = rms > 0.0 ? 1.0 / rms : 1.0;
  return result;
}

inline double reconstruction_mse(const Autoencoder& ae, std::span<const FloatGrid> frames) {
  double s = 0.0;
  for (const auto& x : frames) s += mse(ae.decode(ae.encode(x)), x);
  return s / static_cast<double>(frames.size());
}

}  // namespace sav
