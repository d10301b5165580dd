#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sav/attention.hpp"
#include "sav/numerics/params.hpp"
#include "sav/schedule.hpp"

namespace sav {

/// Guidance conditions. An absent condition is fed to the network as zeros
/// with its presence flag cleared.
struct ConditionSet {
  std::optional<FloatGrid> content;  // c_I: latent channels at z_t resolution
  std::optional<std::size_t> style;  // c_T: style token id
  std::optional<FloatGrid> mask;     // c_M: [1, H, W] binary channel

  static ConditionSet null() { return {}; }
};

struct DenoiserConfig {
  std::size_t latent_channels = 4;
  std::size_t hidden = 16;
  std::size_t heads = 2;
  std::size_t head_dim = 8;
  std::size_t timesteps = 30;
  std::size_t vocab = 5;
};

struct DenoiserOutput {
  FloatGrid eps;
  AttentionRecord attention;
};

struct TapedDenoiserOutput {
  Var eps;
  AttentionRecord attention;
};

/// Conditional noise predictor: conv -> (+ timestep, + style embedding) ->
/// conv -> N-head self-attention (residual) -> conv -> conv.
/// Input channels are [z_t | c_I | flag_I | c_M | flag_M]; the weight slices
/// on every channel after z_t start at exactly zero.
struct Denoiser {
  DenoiserConfig config;
  ParameterSet params;

  enum Fixed : std::size_t { kW1, kB1, kTimeEmb, kStyleEmb, kW2, kB2, kW3, kB3, kW4, kB4, kFirstHead };
  static constexpr std::size_t kPerHead = 4;  // wq, wk, wv, wo

  std::size_t input_channels() const { return 2 * config.latent_channels + 3; }

  static Denoiser initialize(const DenoiserConfig& cfg, Rng& rng) {
    require(cfg.heads >= 1 && cfg.head_dim >= 1 && cfg.hidden >= 1, "Denoiser: need N >= 1 heads");
    Denoiser d;
    d.config = cfg;
    const std::size_t l = cfg.latent_channels, c = cfg.hidden, cin = d.input_channels();
    FloatGrid w1 = conv_init(rng, c, cin);
    for (std::size_t o = 0; o < c; ++o)
      for (std::size_t i = l; i < cin; ++i)
        for (std::size_t k = 0; k < 9; ++k) w1[(o * cin + i) * 9 + k] = 0.0;
    d.params.add("conv1.w", std::move(w1));
    d.params.add("conv1.b", FloatGrid({c}));
    d.params.add("time_emb", 0.1 * gaussian(rng, {cfg.timesteps, c}));
    d.params.add("style_emb", 0.1 * gaussian(rng, {cfg.vocab, c}));
    d.params.add("conv2.w", conv_init(rng, c, c));
    d.params.add("conv2.b", FloatGrid({c}));
    d.params.add("conv3.w", conv_init(rng, c, c));
    d.params.add("conv3.b", FloatGrid({c}));
    d.params.add("conv4.w", conv_init(rng, l, c, 0.05));
    d.params.add("conv4.b", FloatGrid({l}));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string p = "attn.h" + std::to_string(h) + ".";
      d.params.add(p + "wq", dense_init(rng, c, cfg.head_dim));
      d.params.add(p + "wk", dense_init(rng, c, cfg.head_dim));
      d.params.add(p + "wv", dense_init(rng, c, cfg.head_dim));
      d.params.add(p + "wo", dense_init(rng, cfg.head_dim, c, 0.5));
    }
    return d;
  }

  std::size_t head_param(std::size_t head, std::size_t which) const { return kFirstHead + head * kPerHead + which; }

  void check_inputs(const Shape& z, std::size_t t, const ConditionSet& conds) const {
    require(z.size() == 3 && z[0] == config.latent_channels,
            "denoiser: z_t must be [" + std::to_string(config.latent_channels) + ",H,W], got " + shape_str(z));
    require(t >= 1 && t <= config.timesteps, "denoiser: timestep " + std::to_string(t) + " out of range");
    if (conds.content) {
      require(conds.content->shape() == z, "denoiser: c_I shape " + shape_str(conds.content->shape()) +
                                               " does not match z_t " + shape_str(z));
    }
    if (conds.mask) {
      require(conds.mask->shape() == Shape{1, z[1], z[2]}, "denoiser: c_M must be [1,H,W] at latent resolution");
    }
    if (conds.style) require(*conds.style < config.vocab, "denoiser: unknown style id");
  }

  TapedDenoiserOutput forward(Tape& tape, const Var& z_t, std::size_t t, const ConditionSet& conds,
                              const std::vector<Var>& w) const {
    const Shape& zs = z_t.shape();
    check_inputs(zs, t, conds);
    const std::size_t h = zs[1], wd = zs[2], c = config.hidden;
    const Shape plane{1, h, wd};

    Var content = tape.constant(conds.content ? *conds.content : FloatGrid(zs));
    Var content_flag = tape.constant(FloatGrid(plane, conds.content ? 1.0 : 0.0));
    Var mask = tape.constant(conds.mask ? *conds.mask : FloatGrid(plane));
    Var mask_flag = tape.constant(FloatGrid(plane, conds.mask ? 1.0 : 0.0));
    Var in = ops::concat({z_t, content, content_flag, mask, mask_flag});

    Var h1 = ops::conv2d_3x3(in, w[kW1], w[kB1]);
    h1 = ops::add_channel_bias(h1, ops::reshape(ops::slice(w[kTimeEmb], t - 1, t), {c}));
    if (conds.style) {
      h1 = ops::add_channel_bias(h1, ops::reshape(ops::slice(w[kStyleEmb], *conds.style, *conds.style + 1), {c}));
    }
    h1 = ops::relu(h1);
    Var h2 = ops::relu(ops::conv2d_3x3(h1, w[kW2], w[kB2]));

    Var tokens = ops::transpose(ops::reshape(h2, {c, h * wd}));
    std::vector<Var> wq, wk, wv, wo;
    for (std::size_t k = 0; k < config.heads; ++k) {
      wq.push_back(w[head_param(k, 0)]);
      wk.push_back(w[head_param(k, 1)]);
      wv.push_back(w[head_param(k, 2)]);
      wo.push_back(w[head_param(k, 3)]);
    }
    AttentionOutput att = multi_head_self_attention(tokens, wq, wk, wv, wo, h, wd);
    Var h3 = ops::add(h2, ops::reshape(ops::transpose(att.mixed), {c, h, wd}));

    Var h4 = ops::relu(ops::conv2d_3x3(h3, w[kW3], w[kB3]));
    Var eps = ops::conv2d_3x3(h4, w[kW4], w[kB4]);
    return {eps, std::move(att.record)};
  }

  DenoiserOutput forward(const FloatGrid& z_t, std::size_t t, const ConditionSet& conds) const {
    Tape tape;
    auto w = params.bind(tape, false);
    auto out = forward(tape, tape.constant(z_t), t, conds, w);
    return {out.eps.value(), std::move(out.attention)};
  }
};

// Reshapes a saliency mask [H, W] into the c_M channel [1, H, W].
inline FloatGrid mask_condition_from_attention(const AttentionRecord& rec) {
  return saliency_mask(rec).mask.reshaped({1, rec.height, rec.width});
}

/// One training pair: clean target latent (stylized frame), content latent and
/// style token.
struct TrainingExample {
  FloatGrid target;
  FloatGrid content;
  std::size_t style = 0;
};

struct DenoiserTrainConfig {
  std::size_t batch = 8;
  double p_drop = 0.1;
  OptimizerConfig optimizer{OptimizerKind::kSgdMomentum, 1e-3, 0.9};
};

// Counts how often each condition was nulled by dropout.
struct DropoutAudit {
  std::size_t samples = 0;
  std::size_t content_dropped = 0;
  std::size_t style_dropped = 0;
  std::size_t mask_dropped = 0;
};

// Noise-prediction MSE on one example for fixed (t, eps, conditions).
inline Var denoiser_sample_loss(const Denoiser& model, Tape& tape, const std::vector<Var>& w, const FloatGrid& target,
                                std::size_t t, const FloatGrid& eps, const ConditionSet& conds,
                                const NoiseSchedule& schedule) {
  const FloatGrid z_t = forward_sample(target, t, eps, schedule);
  auto out = model.forward(tape, tape.constant(z_t), t, conds, w);
  return ops::square_mean_diff(out.eps, tape.constant(eps));
}

// Full conditions for an example, with c_M read off the model's own attention
// on a pass without the mask.
inline ConditionSet full_conditions(const Denoiser& model, const FloatGrid& z_t, std::size_t t,
                                    const TrainingExample& ex) {
  ConditionSet conds;
  conds.content = ex.content;
  conds.style = ex.style;
  conds.mask = mask_condition_from_attention(model.forward(z_t, t, conds).attention);
  return conds;
}

class DenoiserTrainer {
 public:
  DenoiserTrainer(Denoiser& model, const NoiseSchedule& schedule, DenoiserTrainConfig cfg)
      : model_(model), schedule_(schedule), cfg_(cfg), opt_(cfg.optimizer, model.params) {
    require(schedule.steps() == model.config.timesteps, "DenoiserTrainer: schedule/model T mismatch");
  }

  // One SGD step on a batch; each condition is independently nulled with
  // probability p_drop before the taped forward pass.
  double train_step(std::span<const TrainingExample> batch, Rng& rng) {
    require(!batch.empty(), "train_step: empty batch");
    auto grads = zero_grads(model_.params);
    double loss = 0.0;
    for (const auto& ex : batch) {
      const std::size_t t = 1 + rng.below(static_cast<std::uint32_t>(schedule_.steps()));
      const FloatGrid eps = gaussian(rng, ex.target.shape());
      const FloatGrid z_t = forward_sample(ex.target, t, eps, schedule_);
      ConditionSet conds = full_conditions(model_, z_t, t, ex);
      ++audit_.samples;
      if (rng.bernoulli(cfg_.p_drop)) {
        conds.content.reset();
        ++audit_.content_dropped;
      }
      if (rng.bernoulli(cfg_.p_drop)) {
        conds.style.reset();
        ++audit_.style_dropped;
      }
      if (rng.bernoulli(cfg_.p_drop)) {
        conds.mask.reset();
        ++audit_.mask_dropped;
      }
      Tape tape;
      auto w = model_.params.bind(tape, true);
      Var l = denoiser_sample_loss(model_, tape, w, ex.target, t, eps, conds, schedule_);
      tape.backward(l);
      loss += l.value().item();
      accumulate_grads(grads, tape, w, 1.0 / static_cast<double>(batch.size()));
    }
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
      throw NumericalError("denoiser: non-finite training loss at step " + std::to_string(opt_.steps()));
    }
    opt_.step(model_.params, grads);
    if (!model_.params.all_finite()) {
      throw NumericalError("denoiser: non-finite weights after step " + std::to_string(opt_.steps()));
    }
    return loss;
  }

  const DropoutAudit& audit() const { return audit_; }
  std::size_t steps() const { return opt_.steps(); }

 private:
  Denoiser& model_;
  const NoiseSchedule& schedule_;
  DenoiserTrainConfig cfg_;
  Optimizer opt_;
  DropoutAudit audit_;
};

/// Fixed evaluation draws (t, eps) for a held-out set so losses before and
/// after training are comparable.
struct HeldoutProbe {
  std::vector<std::size_t> timesteps;
  std::vector<FloatGrid> noise;
};

inline HeldoutProbe make_heldout_probe(std::span<const TrainingExample> examples, std::size_t steps, Rng& rng) {
  HeldoutProbe p;
  for (const auto& ex : examples) {
    p.timesteps.push_back(1 + rng.below(static_cast<std::uint32_t>(steps)));
    p.noise.push_back(gaussian(rng, ex.target.shape()));
  }
  return p;
}

inline double heldout_loss(const Denoiser& model, std::span<const TrainingExample> examples, const HeldoutProbe& probe,
                           const NoiseSchedule& schedule) {
  require(!examples.empty() && probe.timesteps.size() == examples.size(), "heldout_loss: probe/example mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::size_t t = probe.timesteps[i];
    const FloatGrid z_t = forward_sample(ex.target, t, probe.noise[i], schedule);
    const ConditionSet conds = full_conditions(model, z_t, t, ex);
    total += mse(model.forward(z_t, t, conds).eps, probe.noise[i]);
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace sav
