#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace sav;

namespace {

struct Rig {
  Autoencoder ae = Autoencoder::identity(3);
  Denoiser net;
  FeatureExtractor fe = FeatureExtractor::initialize(3, 3);
  NoiseSchedule schedule = make_linear_schedule(10, 1e-3, 0.2);

  Rig() {
    DenoiserConfig c;
    c.latent_channels = 3;
    c.hidden = 8;
    c.heads = 2;
    c.head_dim = 4;
    c.timesteps = 10;
    Rng rng(1, streams::kInit);
    net = Denoiser::initialize(c, rng);
    // Non-zero content and mask slices so every condition path matters.
    Rng perturb(2, 2);
    for (auto& v : net.params[Denoiser::kW1].data()) v += 0.05 * perturb.gaussian_pair().first;
    for (auto& v : net.params[Denoiser::kW4].data()) v += 0.05 * perturb.gaussian_pair().first;
  }

  Models models(const DeflickerNet* d = nullptr) const { return {ae, net, fe, d}; }

  SamplerConfig config() const {
    SamplerConfig cfg;
    cfg.steps = 10;
    cfg.seed = 99;
    cfg.structure.lambda = 0.1;
    return cfg;
  }
};

FrameSequence clip(std::size_t n, std::size_t size = 8) {
  Rng rng(5, 5);
  FrameSequence seq;
  for (std::size_t f = 0; f < n; ++f) seq.frames.push_back(test::random_grid(rng, {3, size, size}, 0.0, 1.0));
  return seq;
}

}  // namespace

TEST(DdpmStep, LastStepIsDeterministicAndDrawsNothing) {
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  Rng data(1, 1);
  const FloatGrid z = gaussian(data, {3, 4, 4}), eps = gaussian(data, {3, 4, 4});
  Rng a(7, 7), b(8, 8);
  EXPECT_EQ(ddpm_step(z, eps, 1, s, a), ddpm_step(z, eps, 1, s, b));
  EXPECT_EQ(a.draws(), 0u);
  EXPECT_EQ(ddpm_step(z, eps, 1, s, a), ddpm_mean(z, eps, 1, s, MeanConvention::kDdpm));
  ddpm_step(z, eps, 2, s, a);
  EXPECT_EQ(a.draws(), 48u);
}

TEST(DdpmStep, NoiseHasPosteriorVariance) {
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  const FloatGrid z({20000}), eps({20000});
  Rng rng(3, 3);
  const FloatGrid x = ddpm_step(z, eps, 6, s, rng);
  double v = 0.0;
  for (double e : x.data()) v += e * e;
  v /= 20000.0;
  EXPECT_NEAR(v, s.beta_tilde(6), 4.0 * s.beta_tilde(6) * std::sqrt(2.0 / 20000.0));
}

// The ddpm mean equals the closed-form posterior mean evaluated at the x0
// implied by the noise estimate.
TEST(DdpmMean, MatchesPosteriorMeanAtPredictedX0) {
  const NoiseSchedule s = make_linear_schedule(30, 1e-3, 0.2);
  Rng rng(4, 4);
  for (std::size_t t = 2; t <= 30; ++t) {
    const FloatGrid z = gaussian(rng, {16}), eps = gaussian(rng, {16});
    const FloatGrid ref = posterior_mean(z, predict_x0_from_eps(z, eps, t, s), t, s);
    EXPECT_LT(max_abs_diff(ddpm_mean(z, eps, t, s, MeanConvention::kDdpm), ref), 1e-12 * (1.0 + max_abs_diff(ref, FloatGrid({16})))) << t;
    const FloatGrid paper = ddpm_mean(z, eps, t, s, MeanConvention::kPaper);
    const FloatGrid ddpm = ddpm_mean(z, eps, t, s, MeanConvention::kDdpm);
    const double ratio = std::sqrt(s.alpha(t) / s.alpha_bar(t));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(paper[i], ratio * ddpm[i], 1e-12 * (1.0 + std::abs(paper[i])));
  }
  EXPECT_EQ(parse_mean_convention("ddpm"), MeanConvention::kDdpm);
  EXPECT_THROW(parse_mean_convention("ddim"), ContractError);
}

TEST(Sampler, StartTimestep) {
  SamplerConfig cfg;
  EXPECT_EQ(start_timestep(cfg), 24u);
  cfg.noising_strength = 0.01;
  EXPECT_EQ(start_timestep(cfg), 1u);
  cfg.noising_strength = 1.0;
  EXPECT_EQ(start_timestep(cfg), 30u);
}

TEST(Sampler, RejectsBadConfigs) {
  const Rig rig;
  const FloatGrid frame({3, 8, 8}, 0.5);
  SamplerConfig cfg = rig.config();
  cfg.steps = 11;
  EXPECT_THROW(stylize_frame(frame, cfg, rig.models(), rig.schedule), ContractError);
  cfg = rig.config();
  cfg.noising_strength = 0.0;
  EXPECT_THROW(stylize_frame(frame, cfg, rig.models(), rig.schedule), ContractError);
  cfg = rig.config();
  cfg.structure.lambda = -1.0;
  EXPECT_THROW(stylize_frame(frame, cfg, rig.models(), rig.schedule), ContractError);
  cfg = rig.config();
  cfg.scales.style = std::nan("");
  EXPECT_THROW(stylize_frame(frame, cfg, rig.models(), rig.schedule), ContractError);
}

TEST(Sampler, OutputInUnitRangeAndDeterministic) {
  const Rig rig;
  const FrameSequence seq = clip(3);
  const SamplerConfig cfg = rig.config();
  const VideoResult a = stylize_video(seq, cfg, rig.models(), rig.schedule);
  const VideoResult b = stylize_video(seq, cfg, rig.models(), rig.schedule);
  const VideoResult c = stylize_video(seq, cfg, rig.models(), rig.schedule, 3);
  ASSERT_EQ(a.output.size(), 3u);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(a.output[f], b.output[f]);
    EXPECT_EQ(a.output[f], c.output[f]);
    EXPECT_EQ(a.output[f].shape(), seq[f].shape());
    for (double v : a.output[f].data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  SamplerConfig other = cfg;
  other.seed = 100;
  EXPECT_NE(stylize_video(seq, other, rig.models(), rig.schedule).output[0], a.output[0]);
}

TEST(Sampler, EveryFrameStartsFromTheSameBaseNoise) {
  const Rig rig;
  const FrameSequence seq = clip(4);
  std::vector<FloatGrid> bases;
  std::vector<std::uint64_t> draws;
  std::vector<std::size_t> steps;
  SamplerTrace trace;
  trace.on_base_noise = [&](std::size_t, const FloatGrid& b, std::uint64_t d) {
    bases.push_back(b);
    draws.push_back(d);
  };
  trace.on_step = [&](std::size_t, std::size_t t, const FloatGrid&, const FloatGrid& mask) {
    steps.push_back(t);
    EXPECT_EQ(mask.shape(), (Shape{1, 8, 8}));
  };
  stylize_video(seq, rig.config(), rig.models(), rig.schedule, 1, &trace);
  ASSERT_EQ(bases.size(), 4u);
  for (std::size_t f = 1; f < 4; ++f) {
    EXPECT_EQ(bases[f], bases[0]);
    EXPECT_EQ(draws[f], draws[0]);
  }
  EXPECT_EQ(draws[0], 192u);
  EXPECT_EQ(steps.size(), 4u * 8u);
  EXPECT_EQ(steps.front(), 8u);
  EXPECT_EQ(steps[7], 1u);
}

TEST(Sampler, SingleFrameSkipsTemporalStage) {
  const Rig rig;
  Rng rng(6, streams::kInit);
  DeflickerNet net = DeflickerNet::initialize(3, 4, rng);
  for (auto& v : net.params[DeflickerNet::kW2].data()) v = 0.3;
  const FrameSequence one = clip(1);
  const VideoResult r = stylize_video(one, rig.config(), rig.models(&net), rig.schedule);
  EXPECT_EQ(r.output[0], r.raw[0]);
  const FrameSequence two = clip(2);
  const VideoResult r2 = stylize_video(two, rig.config(), rig.models(&net), rig.schedule);
  EXPECT_EQ(r2.output[0], r2.raw[0]);
  EXPECT_NE(r2.output[1], r2.raw[1]);
  SamplerConfig off = rig.config();
  off.use_temporal = false;
  const VideoResult r3 = stylize_video(two, off, rig.models(&net), rig.schedule);
  EXPECT_EQ(r3.output[1], r3.raw[1]);
}

TEST(Sampler, LambdaZeroIgnoresStructureGradient) {
  const Rig rig;
  const FloatGrid frame = clip(1)[0];
  SamplerConfig cfg = rig.config();
  cfg.structure.lambda = 0.0;
  const FloatGrid a = stylize_frame(frame, cfg, rig.models(), rig.schedule);
  cfg.structure.mode = StructureMode::kPooledCosine;
  EXPECT_EQ(stylize_frame(frame, cfg, rig.models(), rig.schedule), a);
  cfg.structure.lambda = 0.5;
  EXPECT_NE(stylize_frame(frame, cfg, rig.models(), rig.schedule), a);
}

TEST(Sampler, NonFiniteLatentRaisesNumericalError) {
  Rig rig;
  rig.net.params[Denoiser::kB4][0] = std::numeric_limits<double>::infinity();
  SamplerConfig cfg = rig.config();
  cfg.structure.lambda = 0.0;
  EXPECT_THROW(stylize_frame(clip(1)[0], cfg, rig.models(), rig.schedule), NumericalError);
}
