#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace sav;

namespace {

std::vector<FloatGrid> frames_of(const std::vector<StyleTriple>& triples) {
  std::vector<FloatGrid> out;
  for (const auto& t : triples) out.push_back(t.styled);
  return out;
}

}  // namespace

TEST(Autoencoder, IdentityModeIsExactPassthrough) {
  const Autoencoder ae = Autoencoder::identity(3);
  Rng rng(1, 1);
  const FloatGrid x = test::random_grid(rng, {3, 5, 7});
  EXPECT_EQ(ae.encode(x), x);
  EXPECT_EQ(ae.decode(x), x);
  EXPECT_EQ(ae.latent_shape({3, 5, 7}), (Shape{3, 5, 7}));
  EXPECT_THROW(ae.encode(FloatGrid({1, 4, 4})), ContractError);
}

TEST(Autoencoder, LearnedShapes) {
  Rng rng(1, streams::kInit);
  const Autoencoder ae = Autoencoder::initialize(AutoencoderConfig{}, rng);
  EXPECT_EQ(ae.params.size(), 8u);
  const FloatGrid x({3, 16, 16}, 0.5);
  const FloatGrid z = ae.encode(x);
  EXPECT_EQ(z.shape(), (Shape{4, 8, 8}));
  EXPECT_EQ(ae.decode(z).shape(), x.shape());
  EXPECT_THROW(ae.decode(FloatGrid({3, 8, 8})), ContractError);
}

TEST(Autoencoder, ConstantDatasetIsLearnedAlmostPerfectly) {
  const std::vector<FloatGrid> frames(4, FloatGrid({3, 8, 8}, 0.6));
  Rng rng(2, streams::kInit);
  AutoencoderTrainConfig tc;
  tc.steps = 200;
  const auto r = train_autoencoder(frames, AutoencoderConfig{}, tc, rng);
  EXPECT_LT(r.losses.back(), 1e-3);
  EXPECT_LT(r.losses.back(), 0.01 * r.losses.front());
}

TEST(Autoencoder, HeldoutReconstructionAndScale) {
  SceneRanges ranges;
  ranges.size = 16;
  ranges.frames = 4;
  Rng data(3, streams::kData);
  const Corpus corpus = build_dataset(10, ranges, data);
  Rng rng(3, streams::kInit);
  AutoencoderTrainConfig tc;
  const auto r = train_autoencoder(frames_of(corpus.train), AutoencoderConfig{}, tc, rng);
  const auto held = frames_of(corpus.heldout);
  EXPECT_LT(reconstruction_mse(r.model, held), 0.01);

  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames_of(corpus.train)) {
    const FloatGrid z = r.model.encode(f);
    for (double v : z.data()) sq += v * v;
    n += r.model.latent_shape(f.shape())[0] * 8 * 8;
  }
  EXPECT_NEAR(sq / static_cast<double>(n), 1.0, 1e-9);
}

TEST(Autoencoder, FixedSeedGivesIdenticalWeights) {
  const std::vector<FloatGrid> frames{FloatGrid({3, 8, 8}, 0.2), FloatGrid({3, 8, 8}, 0.7)};
  AutoencoderTrainConfig tc;
  tc.steps = 10;
  auto run = [&] {
    Rng rng(4, streams::kInit);
    return train_autoencoder(frames, AutoencoderConfig{}, tc, rng);
  };
  const auto a = run(), b = run();
  EXPECT_TRUE(a.model.params == b.model.params);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.model.latent_scale, b.model.latent_scale);
}

TEST(Autoencoder, EncodeDecodeGradientsMatchFiniteDifferences) {
  Rng rng(5, streams::kInit);
  const Autoencoder ae = Autoencoder::initialize(AutoencoderConfig{}, rng);
  Rng data(6, 6);
  const FloatGrid x = test::random_grid(data, {3, 6, 6}, 0.0, 1.0);
  auto f = [&](Tape& tape, const Var& in) {
    auto w = ae.params.bind(tape, false);
    return ops::square_mean_diff(ae.decode(ae.encode(in, w), w), tape.constant(x));
  };
  const auto r = grad_check(f, test::random_grid(data, {3, 6, 6}, 0.0, 1.0), 1e-5, test::random_coords(data, 108, 20));
  EXPECT_LT(r.max_rel_error, 1e-5);
}
