#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sav/frames.hpp"
#include "sav/numerics/ops.hpp"
#include "sav/numerics/params.hpp"

namespace sav {

/// Local deflicker network: two bias-free 3x3 convs over the differences
/// [x_raw^f - x_raw^{f-1} | y^{f-1} - x_raw^{f-1}] predicting a residual on
/// x_raw^f. Without biases a static stretch (both differences zero) gets a zero
/// residual, so constant video passes through unchanged. The residual head
/// starts at zero, so an untrained network is the identity on x_raw^f.
struct DeflickerNet {
  enum Param : std::size_t { kW1, kW2 };

  ParameterSet params;
  std::size_t channels = 3;

  static DeflickerNet initialize(std::size_t channels, std::size_t hidden, Rng& rng) {
    DeflickerNet net;
    net.channels = channels;
    net.params.add("fuse.w1", conv_init(rng, hidden, 2 * channels));
    net.params.add("head.w2", FloatGrid({channels, hidden, 3, 3}));
    return net;
  }

  // Unclipped refined frame, taped.
  Var predict(const Var& raw, const Var& raw_prev, const Var& y_prev, const std::vector<Var>& w) const {
    Tape& tape = raw.tape();
    const std::size_t hidden = w[kW1].shape()[0];
    Var in = ops::concat({ops::sub(raw, raw_prev), ops::sub(y_prev, raw_prev)});
    Var h = ops::relu(ops::conv2d_3x3(in, w[kW1], tape.constant(FloatGrid({hidden}))));
    return ops::add(raw, ops::conv2d_3x3(h, w[kW2], tape.constant(FloatGrid({channels}))));
  }
};

/// y^1 = x_raw^1 (passthrough); otherwise the network output clipped to [0, 1].
inline FloatGrid refine_frame(const FloatGrid& raw, const FloatGrid* raw_prev, const FloatGrid* y_prev,
                              const DeflickerNet& net) {
  if (raw_prev == nullptr || y_prev == nullptr) {
    require(raw_prev == nullptr && y_prev == nullptr, "refine_frame: previous raw and refined frames go together");
    return raw;
  }
  require(raw.shape() == raw_prev->shape() && raw.shape() == y_prev->shape(), "refine_frame: shape mismatch");
  require(raw.rank() == 3 && raw.extent(0) == net.channels, "refine_frame: channel mismatch");
  Tape tape;
  auto w = net.params.bind(tape, false);
  Var y = net.predict(tape.constant(raw), tape.constant(*raw_prev), tape.constant(*y_prev), w);
  return clipped(y.value(), 0.0, 1.0);
}

// Runs the recurrent refinement over a whole sequence.
inline FrameSequence deflicker_sequence(const FrameSequence& raw, const DeflickerNet& net) {
  raw.validate(false);
  FrameSequence out;
  out.fps = raw.fps;
  for (std::size_t f = 0; f < raw.size(); ++f) {
    if (f == 0) {
      out.frames.push_back(refine_frame(raw[0], nullptr, nullptr, net));
    } else {
      out.frames.push_back(refine_frame(raw[f], &raw[f - 1], &out.frames[f - 1], net));
    }
  }
  return out;
}

// 1 where any channel changes by more than tau between consecutive originals.
inline FloatGrid change_mask(const FloatGrid& cur, const FloatGrid& prev, double tau) {
  require_same_shape(cur, prev, "change_mask");
  const std::size_t c = cur.extent(0), hw = cur.size() / c;
  FloatGrid m(cur.shape());
  for (std::size_t p = 0; p < hw; ++p) {
    bool moved = false;
    for (std::size_t k = 0; k < c; ++k) moved = moved || std::abs(cur[k * hw + p] - prev[k * hw + p]) > tau;
    if (moved)
      for (std::size_t k = 0; k < c; ++k) m[k * hw + p] = 1.0;
  }
  return m;
}

/// Mean |frame_f - frame_{f-1}| over pixels static in `original` (all pixels
/// when no original is given), averaged over consecutive pairs.
inline double flicker_score(const FrameSequence& seq, const FrameSequence* original = nullptr, double tau = 0.1) {
  require(seq.size() >= 2, "flicker_score: need at least two frames");
  if (original) require(original->size() == seq.size(), "flicker_score: original length mismatch");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t f = 1; f < seq.size(); ++f) {
    require_same_shape(seq[f], seq[f - 1], "flicker_score");
    const FloatGrid moving = original ? change_mask((*original)[f], (*original)[f - 1], tau) : FloatGrid(seq[f].shape());
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < seq[f].size(); ++i) {
      if (moving[i] != 0.0) continue;
      s += std::abs(seq[f][i] - seq[f - 1][i]);
      ++n;
    }
    if (n == 0) continue;
    total += s / static_cast<double>(n);
    ++pairs;
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

struct FlickerExample {
  FrameSequence raw;       // flickering stylized frames
  FrameSequence original;  // clean content, used for the change mask
};

struct DeflickerTrainConfig {
  std::size_t steps = 400;
  std::size_t window = 4;
  std::size_t hidden = 16;
  double lr = 2e-3;
  double alpha = 1.0;
  double beta = 2.0;
  double tau = 0.1;
};

struct DeflickerTrainResult {
  DeflickerNet net;
  std::vector<double> losses;
};

/// Minimizes alpha |y^f - x_raw^f|_1 + beta |(y^f - y^{f-1}) (1 - change)|_1 over
/// short windows with y^{f-1} detached (truncated recurrence). Adam.
inline DeflickerTrainResult train_deflicker(std::span<const FlickerExample> data, const DeflickerTrainConfig& cfg,
                                            Rng& rng) {
  require(!data.empty(), "train_deflicker: empty dataset");
  for (const auto& ex : data) {
    require(ex.raw.size() >= 2 && ex.raw.size() == ex.original.size(), "train_deflicker: sequences need >= 2 frames");
  }
  DeflickerTrainResult result;
  const std::size_t channels = data[0].raw.frame_shape()[0];
  result.net = DeflickerNet::initialize(channels, cfg.hidden, rng);
  DeflickerNet& net = result.net;
  Optimizer opt({OptimizerKind::kAdam, cfg.lr}, net.params);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const FlickerExample& ex = data[rng.below(static_cast<std::uint32_t>(data.size()))];
    const std::size_t len = std::min(cfg.window, ex.raw.size());
    const std::size_t start = rng.below(static_cast<std::uint32_t>(ex.raw.size() - len + 1));
    auto grads = zero_grads(net.params);
    double loss = 0.0;
    FloatGrid y_prev = ex.raw[start];
    for (std::size_t f = start + 1; f < start + len; ++f) {
      Tape tape;
      auto w = net.params.bind(tape, true);
      Var raw = tape.constant(ex.raw[f]);
      Var yp = tape.constant(y_prev);
      Var y = net.predict(raw, tape.constant(ex.raw[f - 1]), yp, w);
      FloatGrid keep = change_mask(ex.original[f], ex.original[f - 1], cfg.tau);
      for (auto& v : keep.data()) v = 1.0 - v;
      Var fidelity = ops::mean(ops::abs(ops::sub(y, raw)));
      Var temporal = ops::mean(ops::abs(ops::mul(ops::sub(y, yp), tape.constant(keep))));
      Var l = ops::add(ops::scale(fidelity, cfg.alpha), ops::scale(temporal, cfg.beta));
      tape.backward(l);
      loss += l.value().item();
      accumulate_grads(grads, tape, w, 1.0 / static_cast<double>(len - 1));
      y_prev = clipped(y.value(), 0.0, 1.0);
    }
    loss /= static_cast<double>(len - 1);
    if (!std::isfinite(loss)) throw NumericalError("deflicker: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(loss);
    opt.step(net.params, grads);
  }
  return result;
}

}  // namespace sav
