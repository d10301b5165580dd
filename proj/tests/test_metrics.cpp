#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

using namespace sav;

namespace {

struct Fixture {
  Corpus corpus;
  Embedder emb;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    SceneRanges ranges;
    ranges.size = 32;
    ranges.frames = 6;
    Rng rng(1, streams::kData);
    Fixture out;
    out.corpus = build_dataset(20, ranges, rng);
    out.emb = fit_embedder(FeatureExtractor::initialize(3, 8), identity_style_table(kStyleCount), out.corpus.train);
    return out;
  }();
  return f;
}

double cos_ref(const FloatGrid& a, const FloatGrid& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

}  // namespace

TEST(Embedder, TextRowsAreStyleCentroids) {
  const auto& f = fixture();
  EXPECT_EQ(f.emb.dim(), 16u);
  EXPECT_EQ(f.emb.vocab(), kStyleCount);
  EXPECT_THROW(f.emb.text_embedding(5), ContractError);
  for (std::size_t s = 0; s < kStyleCount; ++s) {
    FloatGrid mean({16});
    double n = 0.0;
    for (const auto& t : f.corpus.train)
      if (t.style == s) {
        mean = mean + f.emb.extractor.pooled(t.styled);
        n += 1.0;
      }
    mean = (1.0 / n) * mean;
    EXPECT_LT(max_abs_diff(mean, f.emb.text_embedding(s)), 1e-6);
  }
}

TEST(TemporalConsistency, ConstantVideoScoresOne) {
  const auto& f = fixture();
  const FrameSequence still = test::constant_sequence(f.corpus.videos[0][0], 5);
  EXPECT_NEAR(temporal_consistency(still, f.emb), 1.0, 1e-12);
  EXPECT_THROW(temporal_consistency(test::constant_sequence(f.corpus.videos[0][0], 1), f.emb), ContractError);
}

TEST(TemporalConsistency, MatchesBruteForceAndIsReversalInvariant) {
  const auto& f = fixture();
  const FrameSequence& v = f.corpus.videos[3];
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    s += cos_ref(f.emb.extractor.pooled(v[i - 1]), f.emb.extractor.pooled(v[i]));
  }
  EXPECT_NEAR(temporal_consistency(v, f.emb), s / static_cast<double>(v.size() - 1), 1e-12);
  FrameSequence rev = v;
  std::reverse(rev.frames.begin(), rev.frames.end());
  EXPECT_NEAR(temporal_consistency(rev, f.emb), temporal_consistency(v, f.emb), 1e-12);
}

TEST(FrameAccuracy, IdentityScoresOneAndNoiseScoresLower) {
  const auto& f = fixture();
  const FrameSequence& v = f.corpus.videos[1];
  EXPECT_NEAR(frame_accuracy(v, v, f.emb), 1.0, 1e-12);
  Rng rng(2, 2);
  FrameSequence noisy = v;
  for (auto& frame : noisy.frames)
    for (auto& x : frame.data()) x = std::clamp(x + 0.3 * rng.gaussian_pair().first, 0.0, 1.0);
  EXPECT_LT(frame_accuracy(v, noisy, f.emb), 1.0 - 1e-3);
  EXPECT_THROW(frame_accuracy(v, test::constant_sequence(v[0], 2), f.emb), ContractError);
}

TEST(FrameAccuracy, JointPermutationInvariant) {
  const auto& f = fixture();
  const FrameSequence& a = f.corpus.videos[2];
  const FrameSequence b = apply_style(a, 2);
  FrameSequence pa, pb;
  for (std::size_t i : {4u, 0u, 5u, 2u, 1u, 3u}) {
    pa.frames.push_back(a[i]);
    pb.frames.push_back(b[i]);
  }
  EXPECT_NEAR(frame_accuracy(pa, pb, f.emb), frame_accuracy(a, b, f.emb), 1e-12);
}

// Mosaic is left out: block averaging barely moves the pooled features.
TEST(PromptConsistency, StyledVideosScoreAboveUnstyled) {
  const auto& f = fixture();
  for (const char* name : {"invert", "stripes", "warm"}) {
    const std::size_t s = style_id(name);
    double gap = 0.0;
    for (std::size_t v : f.corpus.heldout_videos) {
      const FrameSequence& content = f.corpus.videos[v];
      const double styled = prompt_consistency(apply_style(content, s), s, f.emb);
      EXPECT_LE(styled, 1.0);
      gap += styled - prompt_consistency(content, s, f.emb);
    }
    EXPECT_GT(gap, 0.0) << name;
  }
}

TEST(Evaluate, TriadMatchesComponents) {
  const auto& f = fixture();
  const FrameSequence& in = f.corpus.videos[0];
  const FrameSequence out = apply_style(in, 1);
  const MetricTriad m = evaluate(in, out, 1, f.emb);
  EXPECT_EQ(m.temporal_consistency, temporal_consistency(out, f.emb));
  EXPECT_EQ(m.prompt_consistency, prompt_consistency(out, 1, f.emb));
  EXPECT_EQ(m.frame_accuracy, frame_accuracy(in, out, f.emb));
}
