#pragma once

#include <string>

#include "sav/autoencoder.hpp"
#include "sav/numerics/ops.hpp"
#include "sav/numerics/params.hpp"
#include "sav/schedule.hpp"

namespace sav {

enum class StructureMode { kSelfSimilarity, kPooledCosine };

inline StructureMode parse_structure_mode(const std::string& s) {
  if (s == "self-similarity") return StructureMode::kSelfSimilarity;
  if (s == "pooled-cosine") return StructureMode::kPooledCosine;
  throw ContractError("unknown structure mode '" + s + "' (expected self-similarity|pooled-cosine)");
}

inline std::string to_string(StructureMode m) {
  return m == StructureMode::kSelfSimilarity ? "self-similarity" : "pooled-cosine";
}

/// Fixed random two-layer stride-2 conv network. Each spatial cell of the
/// output is one patch feature vector. The first layer holds sign-paired,
/// zero-sum edge filters (k, -k), so an intensity flip 1 - x only swaps the
/// members of each pair, plus a few non-negative colour filters that keep
/// per-channel intensity visible.
struct FeatureExtractor {
  enum Param : std::size_t { kW1, kB1, kW2, kB2 };

  ParameterSet params;
  std::size_t pixel_channels = 3;

  static FeatureExtractor initialize(std::size_t pixel_channels, std::uint64_t seed, std::size_t edge_pairs = 6,
                                     std::size_t colour = 4, std::size_t width2 = 16) {
    require(pixel_channels >= 1 && edge_pairs + colour >= 1 && width2 >= 1, "FeatureExtractor: empty layer");
    Rng rng(seed, streams::kFeature);
    FeatureExtractor fe;
    fe.pixel_channels = pixel_channels;
    const std::size_t taps = pixel_channels * 9, width1 = 2 * edge_pairs + colour;
    FloatGrid w1({width1, pixel_channels, 3, 3});
    for (std::size_t p = 0; p < edge_pairs; ++p) {
      std::vector<double> k(taps);
      double sum = 0.0, norm = 0.0;
      for (auto& v : k) {
        v = rng.gaussian_pair().first;
        sum += v;
      }
      for (auto& v : k) {
        v -= sum / static_cast<double>(taps);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < taps; ++i) {
        w1[2 * p * taps + i] = k[i] / norm;
        w1[(2 * p + 1) * taps + i] = -k[i] / norm;
      }
    }
    for (std::size_t c = 0; c < colour; ++c) {
      const std::size_t row = 2 * edge_pairs + c;
      for (std::size_t i = 0; i < taps; ++i) {
        const double focus = i / 9 == c % pixel_channels ? 1.0 : 0.1;
        w1[row * taps + i] = std::abs(rng.gaussian_pair().first) * focus / 3.0;
      }
    }
    fe.params.add("w1", w1);
    fe.params.add("b1", FloatGrid({width1}));
    fe.params.add("w2", conv_init(rng, width2, width1));
    fe.params.add("b2", FloatGrid({width2}, 0.05));
    return fe;
  }

  std::size_t feature_dim() const { return params[kW2].extent(0); }

  // [D, K] feature map, one column per patch.
  Var feature_map(const Var& x, const std::vector<Var>& w) const {
    require(x.shape().size() == 3 && x.shape()[0] == pixel_channels,
            "FeatureExtractor: frame must be [" + std::to_string(pixel_channels) + ",H,W]");
    Var h = ops::relu(ops::conv2d_3x3(x, w[kW1], w[kB1], 2));
    Var f = ops::relu(ops::conv2d_3x3(h, w[kW2], w[kB2], 2));
    const Shape& s = f.shape();
    return ops::reshape(f, {s[0], s[1] * s[2]});
  }

  // Patch features [K, D].
  Var patches(const Var& x, const std::vector<Var>& w) const { return ops::transpose(feature_map(x, w)); }

  // Mean-pooled feature vector [D].
  Var pooled(const Var& x, const std::vector<Var>& w) const { return ops::row_means(feature_map(x, w)); }

  FloatGrid patches(const FloatGrid& x) const {
    Tape tape;
    auto w = params.bind(tape, false);
    return patches(tape.constant(x), w).value();
  }

  FloatGrid pooled(const FloatGrid& x) const {
    Tape tape;
    auto w = params.bind(tape, false);
    return pooled(tape.constant(x), w).value();
  }
};

struct StructureLossConfig {
  StructureMode mode = StructureMode::kSelfSimilarity;
  double lambda = 0.1;
};

// S_ij = cos(f_i, f_j) over patch features, taped.
inline Var self_similarity(const Var& x, const FeatureExtractor& fe, const std::vector<Var>& w) {
  Var n = ops::normalize_rows(fe.patches(x, w));
  return ops::matmul(n, ops::transpose(n));
}

inline FloatGrid self_similarity(const FloatGrid& x, const FeatureExtractor& fe) {
  Tape tape;
  auto w = fe.params.bind(tape, false);
  return self_similarity(tape.constant(x), fe, w).value();
}

/// Structure loss between the input frame and a predicted frame.
/// Self-similarity mode: mean |S(x_in) - S(x_pred)|. Pooled-cosine mode:
/// 1 - cos(pool f(x_in), pool f(x_pred)). Both lie in [0, 2].
inline Var structure_loss(const Var& x_in, const Var& x_pred, const FeatureExtractor& fe, const std::vector<Var>& w,
                          StructureMode mode) {
  require(x_in.shape() == x_pred.shape(), "structure_loss: shape mismatch " + shape_str(x_in.shape()) + " vs " +
                                              shape_str(x_pred.shape()));
  Tape& tape = x_in.tape();
  if (mode == StructureMode::kSelfSimilarity) {
    return ops::mean(ops::abs(ops::sub(self_similarity(x_in, fe, w), self_similarity(x_pred, fe, w))));
  }
  Var one = tape.constant(FloatGrid::scalar(1.0));
  return ops::sub(one, ops::cosine(fe.pooled(x_in, w), fe.pooled(x_pred, w)));
}

inline double structure_loss(const FloatGrid& x_in, const FloatGrid& x_pred, const FeatureExtractor& fe,
                             StructureMode mode) {
  Tape tape;
  auto w = fe.params.bind(tape, false);
  return structure_loss(tape.constant(x_in), tape.constant(x_pred), fe, w, mode).value().item();
}

// x0_hat(z_t) = decode((z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)) with eps_hat held constant.
inline Var predicted_frame(const Var& z_t, const FloatGrid& eps_hat, std::size_t t, const Autoencoder& ae,
                           const std::vector<Var>& ae_w, const NoiseSchedule& schedule) {
  const double ab = schedule.alpha_bar(schedule.check(t));
  Tape& tape = z_t.tape();
  Var noise = tape.constant(std::sqrt(1.0 - ab) * eps_hat);
  Var x0 = ops::scale(ops::sub(z_t, noise), 1.0 / std::sqrt(ab));
  return ae.decode(x0, ae_w);
}

/// Delta z_t = grad_{z_t} L_s(x_in, x_pred(z_t)), the steering direction
/// applied as z_t - lambda * Delta z_t before the guided passes.
inline FloatGrid latent_gradient(const FloatGrid& z_t, std::size_t t, const FloatGrid& eps_hat, const FloatGrid& x_in,
                                 const Autoencoder& ae, const FeatureExtractor& fe, const StructureLossConfig& cfg,
                                 const NoiseSchedule& schedule) {
  require_same_shape(z_t, eps_hat, "latent_gradient");
  Tape tape;
  auto ae_w = ae.params.bind(tape, false);
  auto fe_w = fe.params.bind(tape, false);
  Var z = tape.input(z_t, true);
  Var x_pred = predicted_frame(z, eps_hat, t, ae, ae_w, schedule);
  Var loss = structure_loss(tape.constant(x_in), x_pred, fe, fe_w, cfg.mode);
  tape.backward(loss);
  FloatGrid g = tape.grad(z);
  if (!g.all_finite()) {
    throw NumericalError("structure: non-finite latent gradient at step t=" + std::to_string(t));
  }
  return g;
}

}  // namespace sav
