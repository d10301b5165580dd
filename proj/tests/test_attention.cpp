#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

using namespace sav;

namespace {

AttentionRecord single_head(const FloatGrid& a, std::size_t h, std::size_t w) {
  AttentionRecord r;
  r.heads.push_back(a);
  r.height = h;
  r.width = w;
  r.head_dim = 1;
  return r;
}

AttentionRecord random_record(Rng& rng, std::size_t heads, std::size_t h, std::size_t w) {
  AttentionRecord r;
  r.height = h;
  r.width = w;
  r.head_dim = 4;
  for (std::size_t k = 0; k < heads; ++k) r.heads.push_back(kernels::softmax_rows(gaussian(rng, {h * w, h * w})));
  return r;
}

}  // namespace

TEST(ComputeAttention, ZeroFeaturesGiveUniformMaps) {
  Rng rng(1, 1);
  const std::vector<FloatGrid> wq{gaussian(rng, {3, 2}), gaussian(rng, {3, 2})};
  const std::vector<FloatGrid> wk{gaussian(rng, {3, 2}), gaussian(rng, {3, 2})};
  const AttentionRecord rec = compute_attention(FloatGrid({6, 3}), wq, wk, 2, 3);
  ASSERT_EQ(rec.heads.size(), 2u);
  for (const auto& a : rec.heads)
    for (double v : a.data()) EXPECT_EQ(v, 1.0 / 6.0);
}

TEST(ComputeAttention, RowsSumToOneAndEntriesInUnitInterval) {
  Rng rng(2, 2);
  const std::vector<FloatGrid> wq{gaussian(rng, {5, 4})}, wk{gaussian(rng, {5, 4})};
  const AttentionRecord rec = compute_attention(gaussian(rng, {12, 5}), wq, wk, 3, 4);
  for (std::size_t i = 0; i < 12; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 12; ++j) {
      const double v = rec.heads[0].at(i, j);
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

// 2x2 map, identity projections: Q = K = X, so A = softmax(X X^T / sqrt(2)).
TEST(ComputeAttention, HandSetProjectionsMatchSoftmaxOracle) {
  const FloatGrid x({4, 2}, std::vector<double>{1, 0, 0, 1, 1, 1, -1, 2});
  const std::vector<FloatGrid> eye{FloatGrid({2, 2}, std::vector<double>{1, 0, 0, 1})};
  const AttentionRecord rec = compute_attention(x, eye, eye, 2, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    double logits[4], z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      logits[j] = (x.at(i, 0) * x.at(j, 0) + x.at(i, 1) * x.at(j, 1)) / std::sqrt(2.0);
      z += std::exp(logits[j]);
    }
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(rec.heads[0].at(i, j), std::exp(logits[j]) / z, 1e-9);
  }
}

TEST(ComputeAttention, ShapeErrors) {
  const std::vector<FloatGrid> w{FloatGrid({3, 2})};
  EXPECT_THROW(compute_attention(FloatGrid({5, 3}), w, w, 2, 2), ContractError);
  const std::vector<FloatGrid> bad{FloatGrid({4, 2})};
  EXPECT_THROW(compute_attention(FloatGrid({4, 3}), bad, bad, 2, 2), ContractError);
}

TEST(SaliencyMask, UniformAttentionGivesEmptyMask) {
  const SaliencyMask m = saliency_mask(single_head(FloatGrid({9, 9}, 1.0 / 9.0), 3, 3));
  for (double v : m.mask.data()) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(m.psi, 1.0 / 9.0, 1e-15);
}

TEST(SaliencyMask, ThresholdsAtTheMean) {
  FloatGrid a({4, 4});
  const double row[] = {0.1, 0.2, 0.3, 0.4};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) a.at(i, j) = row[j];
  const SaliencyMask m = saliency_mask(single_head(a, 2, 2));
  EXPECT_NEAR(m.psi, 0.25, 1e-15);
  EXPECT_EQ(m.mask.values(), (std::vector<double>{0, 0, 1, 1}));
  EXPECT_EQ(m.mask.shape(), (Shape{2, 2}));
}

TEST(SaliencyMask, NonConstantSaliencyHasBothValues) {
  Rng rng(3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const SaliencyMask m = saliency_mask(random_record(rng, 2, 3, 4));
    const double ones = std::accumulate(m.mask.data().begin(), m.mask.data().end(), 0.0);
    EXPECT_GE(ones, 1.0);
    EXPECT_LT(ones, 12.0);
    EXPECT_NEAR(m.psi, mean(m.saliency), 1e-15);
    for (double v : m.mask.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
}

TEST(SaliencyMask, HeadPermutationInvariant) {
  Rng rng(4, 4);
  for (int trial = 0; trial < 10; ++trial) {
    AttentionRecord rec = random_record(rng, 3, 4, 4);
    const SaliencyMask ref = saliency_mask(rec);
    std::vector<std::size_t> perm{0, 1, 2};
    while (std::next_permutation(perm.begin(), perm.end())) {
      AttentionRecord p = rec;
      for (std::size_t k = 0; k < 3; ++k) p.heads[k] = rec.heads[perm[k]];
      const SaliencyMask m = saliency_mask(p);
      EXPECT_EQ(m.mask, ref.mask);
      EXPECT_EQ(m.saliency, ref.saliency);
      EXPECT_EQ(m.psi, ref.psi);
    }
  }
}

TEST(SaliencyMask, PureFunctionOfScaledFeatures) {
  Rng rng(5, 5);
  const std::vector<FloatGrid> wq{gaussian(rng, {3, 2})}, wk{gaussian(rng, {3, 2})};
  const FloatGrid x = gaussian(rng, {9, 3});
  const AttentionRecord a = compute_attention(x, wq, wk, 3, 3);
  const AttentionRecord b = compute_attention(3.0 * x, wq, wk, 3, 3);
  EXPECT_NE(a.heads[0], b.heads[0]);
  EXPECT_EQ(saliency_mask(b).mask, saliency_mask(b).mask);
}

TEST(MultiHeadAttention, TapedMapsMatchUntaped) {
  Rng rng(6, 6);
  const FloatGrid x = gaussian(rng, {6, 4});
  std::vector<FloatGrid> q, k, v, o;
  for (int h = 0; h < 2; ++h) {
    q.push_back(gaussian(rng, {4, 3}));
    k.push_back(gaussian(rng, {4, 3}));
    v.push_back(gaussian(rng, {4, 3}));
    o.push_back(gaussian(rng, {3, 4}));
  }
  Tape t;
  std::vector<Var> vq, vk, vv, vo;
  for (int h = 0; h < 2; ++h) {
    vq.push_back(t.constant(q[h]));
    vk.push_back(t.constant(k[h]));
    vv.push_back(t.constant(v[h]));
    vo.push_back(t.constant(o[h]));
  }
  const AttentionOutput out = multi_head_self_attention(t.constant(x), vq, vk, vv, vo, 2, 3);
  const AttentionRecord ref = compute_attention(x, q, k, 2, 3);
  ASSERT_EQ(out.record.heads.size(), 2u);
  for (int h = 0; h < 2; ++h) EXPECT_EQ(out.record.heads[h], ref.heads[h]);
  EXPECT_EQ(out.mixed.shape(), (Shape{6, 4}));
}
