#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace sav;

namespace {

// Two channels routed straight through both layers via the centre tap.
FeatureExtractor pass_through_extractor() {
  FeatureExtractor fe;
  fe.pixel_channels = 2;
  FloatGrid w({2, 2, 3, 3});
  w[0 * 18 + 0 * 9 + 4] = 1.0;
  w[1 * 18 + 1 * 9 + 4] = 1.0;
  fe.params.add("w1", w);
  fe.params.add("b1", FloatGrid({2}));
  fe.params.add("w2", w);
  fe.params.add("b2", FloatGrid({2}));
  return fe;
}

double cosine_ref(const FloatGrid& p, std::size_t i, std::size_t j) {
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (std::size_t d = 0; d < p.extent(1); ++d) {
    dot += p.at(i, d) * p.at(j, d);
    ni += p.at(i, d) * p.at(i, d);
    nj += p.at(j, d) * p.at(j, d);
  }
  return dot / std::sqrt(ni * nj);
}

}  // namespace

TEST(FeatureExtractor, ShapesAndDeterminism) {
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  Rng rng(1, 1);
  const FloatGrid x = test::random_grid(rng, {3, 32, 32}, 0.0, 1.0);
  EXPECT_EQ(fe.patches(x).shape(), (Shape{64, 16}));
  EXPECT_EQ(fe.pooled(x).shape(), (Shape{16}));
  EXPECT_EQ(fe.feature_dim(), 16u);
  EXPECT_TRUE(FeatureExtractor::initialize(3, 11).params == fe.params);
  EXPECT_FALSE(FeatureExtractor::initialize(3, 12).params == fe.params);
}

TEST(SelfSimilarity, SymmetricWithUnitDiagonal) {
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  Rng rng(2, 2);
  const FloatGrid s = self_similarity(test::random_grid(rng, {3, 16, 16}, 0.0, 1.0), fe);
  ASSERT_EQ(s.shape(), (Shape{16, 16}));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(s.at(i, i), 1.0, 1e-12);
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_EQ(s.at(i, j), s.at(j, i));
      EXPECT_LE(std::abs(s.at(i, j)), 1.0 + 1e-12);
    }
  }
}

TEST(SelfSimilarity, IdenticalPatchesGiveAllOnes) {
  FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  for (std::size_t p : {FeatureExtractor::kW1, FeatureExtractor::kW2})
    for (auto& v : fe.params[p].data()) v = 0.0;
  Rng rng(3, 3);
  const FloatGrid s = self_similarity(test::random_grid(rng, {3, 16, 16}), fe);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(SelfSimilarity, MatchesBruteForcePairwiseCosine) {
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 5);
  Rng rng(4, 4);
  const FloatGrid x = test::random_grid(rng, {3, 24, 16}, 0.0, 1.0);
  const FloatGrid p = fe.patches(x);
  const FloatGrid s = self_similarity(x, fe);
  for (std::size_t i = 0; i < p.extent(0); ++i)
    for (std::size_t j = 0; j < p.extent(0); ++j) EXPECT_NEAR(s.at(i, j), cosine_ref(p, i, j), 1e-12);
}

TEST(StructureLoss, ZeroOnIdenticalFrames) {
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  Rng rng(5, 5);
  const FloatGrid x = test::random_grid(rng, {3, 16, 16}, 0.0, 1.0);
  EXPECT_EQ(structure_loss(x, x, fe, StructureMode::kSelfSimilarity), 0.0);
  EXPECT_NEAR(structure_loss(x, x, fe, StructureMode::kPooledCosine), 0.0, 1e-12);
  const FloatGrid y = test::random_grid(rng, {3, 16, 16}, 0.0, 1.0);
  for (auto m : {StructureMode::kSelfSimilarity, StructureMode::kPooledCosine}) {
    const double l = structure_loss(x, y, fe, m);
    EXPECT_GT(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
  EXPECT_THROW(structure_loss(x, FloatGrid({3, 8, 8}), fe, StructureMode::kSelfSimilarity), ContractError);
}

TEST(StructureLoss, OrthogonalPooledFeaturesGiveOne) {
  const FeatureExtractor fe = pass_through_extractor();
  FloatGrid a({2, 8, 8}), b({2, 8, 8});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      a.at(0, y, x) = 0.7;
      b.at(1, y, x) = 0.3;
    }
  EXPECT_NEAR(structure_loss(a, b, fe, StructureMode::kPooledCosine), 1.0, 1e-15);
}

TEST(StructureMode, ParsesNames) {
  EXPECT_EQ(parse_structure_mode("self-similarity"), StructureMode::kSelfSimilarity);
  EXPECT_EQ(parse_structure_mode("pooled-cosine"), StructureMode::kPooledCosine);
  EXPECT_THROW(parse_structure_mode("gram"), ContractError);
  EXPECT_EQ(to_string(StructureMode::kPooledCosine), "pooled-cosine");
}

class LatentGradient : public ::testing::TestWithParam<StructureMode> {};

// Finite differences on 16x16 latents, one random coordinate per trial.
TEST_P(LatentGradient, MatchesFiniteDifferences) {
  Rng init(6, streams::kInit);
  Autoencoder ae = Autoencoder::initialize(AutoencoderConfig{}, init);
  ae.latent_scale = 2.5;
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  const NoiseSchedule s = make_linear_schedule(30, 1e-3, 0.2);
  StructureLossConfig cfg;
  cfg.mode = GetParam();
  Rng rng(7, 7);
  int checked = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t t = 1 + rng.below(30);
    const FloatGrid z = gaussian(rng, {4, 16, 16}), eps = gaussian(rng, {4, 16, 16});
    const FloatGrid x_in = test::random_grid(rng, {3, 32, 32}, 0.0, 1.0);
    const FloatGrid g = latent_gradient(z, t, eps, x_in, ae, fe, cfg, s);
    auto f = [&](Tape& tape, const Var& zz) {
      auto ae_w = ae.params.bind(tape, false);
      auto fe_w = fe.params.bind(tape, false);
      return structure_loss(tape.constant(x_in), predicted_frame(zz, eps, t, ae, ae_w, s), fe, fe_w, cfg.mode);
    };
    const auto coords = test::random_coords(rng, z.size(), 1);
    const auto r = grad_check(f, z, 1e-5, coords);
    EXPECT_EQ(r.analytic, g);
    EXPECT_LT(r.max_rel_error, 1e-4) << "trial " << trial << " t=" << t;
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST_P(LatentGradient, VanishesWhenPredictionMatchesInput) {
  Rng init(8, streams::kInit);
  const Autoencoder ae = Autoencoder::initialize(AutoencoderConfig{}, init);
  const FeatureExtractor fe = FeatureExtractor::initialize(3, 11);
  const NoiseSchedule s = make_linear_schedule(30, 1e-3, 0.2);
  StructureLossConfig cfg;
  cfg.mode = GetParam();
  Rng rng(9, 9);
  const FloatGrid z = gaussian(rng, {4, 8, 8}), eps = gaussian(rng, {4, 8, 8});
  Tape tape;
  auto w = ae.params.bind(tape, false);
  const FloatGrid x_in = predicted_frame(tape.constant(z), eps, 12, ae, w, s).value();
  const FloatGrid g = latent_gradient(z, 12, eps, x_in, ae, fe, cfg, s);
  EXPECT_LT(max_abs_diff(g, FloatGrid(g.shape())), 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Modes, LatentGradient,
                         ::testing::Values(StructureMode::kSelfSimilarity, StructureMode::kPooledCosine),
                         [](const auto& info) {
                           return info.param == StructureMode::kSelfSimilarity ? std::string("SelfSimilarity")
                                                                               : std::string("PooledCosine");
                         });
