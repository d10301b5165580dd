#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace sav;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.latent_channels = 3;
  c.hidden = 8;
  c.heads = 2;
  c.head_dim = 4;
  c.timesteps = 10;
  c.vocab = 5;
  return c;
}

std::vector<TrainingExample> random_examples(Rng& rng, std::size_t n, std::size_t size = 4) {
  std::vector<TrainingExample> ex;
  for (std::size_t i = 0; i < n; ++i) {
    ex.push_back({test::random_grid(rng, {3, size, size}), test::random_grid(rng, {3, size, size}), i % kStyleCount});
  }
  return ex;
}

}  // namespace

TEST(Denoiser, FreshWeightsIgnoreContentAndMask) {
  Rng rng(1, streams::kInit);
  const Denoiser d = Denoiser::initialize(small_config(), rng);
  Rng data(2, 2);
  const FloatGrid z = gaussian(data, {3, 6, 6});
  for (std::size_t t : {1u, 5u, 10u}) {
    ConditionSet bare;
    bare.style = 2;
    const DenoiserOutput ref = d.forward(z, t, bare);
    for (int trial = 0; trial < 3; ++trial) {
      ConditionSet c = bare;
      c.content = gaussian(data, {3, 6, 6});
      FloatGrid m({1, 6, 6});
      for (auto& v : m.data()) v = data.bernoulli(0.5) ? 1.0 : 0.0;
      c.mask = m;
      const DenoiserOutput out = d.forward(z, t, c);
      EXPECT_EQ(out.eps, ref.eps);
      EXPECT_EQ(out.attention.heads, ref.attention.heads);
    }
  }
}

TEST(Denoiser, NullConditionsAndAttentionRecord) {
  Rng rng(1, streams::kInit);
  const Denoiser d = Denoiser::initialize(small_config(), rng);
  Rng data(3, 3);
  const FloatGrid z = gaussian(data, {3, 4, 5});
  const DenoiserOutput out = d.forward(z, 4, ConditionSet::null());
  EXPECT_EQ(out.eps.shape(), z.shape());
  EXPECT_TRUE(out.eps.all_finite());
  ASSERT_EQ(out.attention.heads.size(), 2u);
  EXPECT_EQ(out.attention.height, 4u);
  EXPECT_EQ(out.attention.width, 5u);
  for (const auto& a : out.attention.heads)
    for (std::size_t i = 0; i < 20; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 20; ++j) s += a.at(i, j);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  EXPECT_EQ(d.forward(z, 4, ConditionSet::null()).eps, out.eps);
  ConditionSet styled;
  styled.style = 1;
  EXPECT_NE(d.forward(z, 4, styled).eps, out.eps);
}

TEST(Denoiser, InputContracts) {
  Rng rng(1, streams::kInit);
  const Denoiser d = Denoiser::initialize(small_config(), rng);
  const FloatGrid z({3, 4, 4});
  EXPECT_THROW(d.forward(z, 0, {}), ContractError);
  EXPECT_THROW(d.forward(z, 11, {}), ContractError);
  EXPECT_THROW(d.forward(FloatGrid({2, 4, 4}), 1, {}), ContractError);
  ConditionSet bad;
  bad.content = FloatGrid({3, 2, 2});
  EXPECT_THROW(d.forward(z, 1, bad), ContractError);
  ConditionSet bad_mask;
  bad_mask.mask = FloatGrid({1, 4, 3});
  EXPECT_THROW(d.forward(z, 1, bad_mask), ContractError);
  ConditionSet bad_style;
  bad_style.style = 5;
  EXPECT_THROW(d.forward(z, 1, bad_style), ContractError);
}

// With a near-zero output head the loss is about E[eps^2] = 1 per element.
TEST(Denoiser, InitialLossNearUnitVariance) {
  Rng rng(1, streams::kInit);
  const Denoiser d = Denoiser::initialize(small_config(), rng);
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  Rng data(4, 4);
  const auto ex = random_examples(data, 64, 8);
  HeldoutProbe probe = make_heldout_probe(ex, 10, data);
  EXPECT_NEAR(heldout_loss(d, ex, probe, s), 1.0, 0.1);
}

TEST(Denoiser, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(5, streams::kInit);
  const Denoiser d = Denoiser::initialize(small_config(), rng);
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  Rng data(6, 6);
  const TrainingExample ex = random_examples(data, 1)[0];
  const FloatGrid eps = gaussian(data, {3, 4, 4});
  const std::size_t t = 6;
  const ConditionSet conds = full_conditions(d, forward_sample(ex.target, t, eps, s), t, ex);

  Rng pick(7, 7);
  for (std::size_t p = 0; p < d.params.size(); ++p) {
    auto f = [&](Tape& tape, const Var& x) {
      std::vector<Var> w;
      for (std::size_t q = 0; q < d.params.size(); ++q) w.push_back(q == p ? x : tape.constant(d.params[q]));
      return denoiser_sample_loss(d, tape, w, ex.target, t, eps, conds, s);
    };
    const auto coords = test::random_coords(pick, d.params[p].size(), 6);
    const auto r = grad_check(f, d.params[p], 1e-5, coords);
    EXPECT_LT(r.max_rel_error, 1e-4) << d.params.name(p);
  }
}

TEST(DenoiserTrainer, ZeroDropoutNeverNullsConditions) {
  Rng rng(1, streams::kInit);
  Denoiser d = Denoiser::initialize(small_config(), rng);
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  DenoiserTrainConfig cfg;
  cfg.p_drop = 0.0;
  DenoiserTrainer trainer(d, s, cfg);
  Rng data(8, 8);
  const auto ex = random_examples(data, 10, 2);
  for (int step = 0; step < 100; ++step) trainer.train_step(ex, data);
  EXPECT_EQ(trainer.audit().samples, 1000u);
  EXPECT_EQ(trainer.audit().content_dropped, 0u);
  EXPECT_EQ(trainer.audit().style_dropped, 0u);
  EXPECT_EQ(trainer.audit().mask_dropped, 0u);
}

TEST(DenoiserTrainer, DropoutFrequencyWithinFourSigma) {
  Rng rng(1, streams::kInit);
  Denoiser d = Denoiser::initialize(small_config(), rng);
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  DenoiserTrainer trainer(d, s, DenoiserTrainConfig{});
  Rng data(9, 9);
  const auto ex = random_examples(data, 10, 2);
  for (int step = 0; step < 100; ++step) trainer.train_step(ex, data);
  const auto& a = trainer.audit();
  const double n = static_cast<double>(a.samples), p = 0.1, sigma = std::sqrt(n * p * (1 - p));
  for (std::size_t dropped : {a.content_dropped, a.style_dropped, a.mask_dropped}) {
    EXPECT_LE(std::abs(static_cast<double>(dropped) - n * p), 4.0 * sigma);
  }
}

TEST(DenoiserTrainer, FixedSeedGivesIdenticalWeights) {
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  auto run = [&] {
    Rng rng(1, streams::kInit);
    Denoiser d = Denoiser::initialize(small_config(), rng);
    DenoiserTrainer trainer(d, s, DenoiserTrainConfig{});
    Rng data(10, 10);
    const auto ex = random_examples(data, 4, 4);
    for (int step = 0; step < 5; ++step) trainer.train_step(ex, data);
    return d.params;
  };
  EXPECT_TRUE(run() == run());
}

TEST(DenoiserTrainer, LossDecreasesOnAFixedBatch) {
  Rng rng(1, streams::kInit);
  Denoiser d = Denoiser::initialize(small_config(), rng);
  const NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.2);
  DenoiserTrainConfig cfg;
  cfg.optimizer = {OptimizerKind::kAdam, 3e-3};
  DenoiserTrainer trainer(d, s, cfg);
  Rng data(11, 11);
  const auto ex = random_examples(data, 8, 4);
  Rng probe_rng(12, 12);
  const HeldoutProbe probe = make_heldout_probe(ex, 10, probe_rng);
  const double before = heldout_loss(d, ex, probe, s);
  for (int step = 0; step < 150; ++step) trainer.train_step(ex, data);
  EXPECT_LT(heldout_loss(d, ex, probe, s), before);
}

TEST(MaskCondition, ReshapesSaliencyMask) {
  AttentionRecord r;
  r.height = 1;
  r.width = 4;
  FloatGrid a({4, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    a.at(i, 0) = 0.1;
    a.at(i, 1) = 0.2;
    a.at(i, 2) = 0.3;
    a.at(i, 3) = 0.4;
  }
  r.heads.push_back(a);
  const FloatGrid m = mask_condition_from_attention(r);
  EXPECT_EQ(m.shape(), (Shape{1, 1, 4}));
  EXPECT_EQ(m.values(), (std::vector<double>{0, 0, 1, 1}));
}
