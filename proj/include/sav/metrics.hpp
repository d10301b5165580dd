#pragma once

#include <span>
#include <vector>

#include "sav/dataset.hpp"
#include "sav/frames.hpp"
#include "sav/structure.hpp"

namespace sav {

/// Shared image/text embedder standing in for a pretrained joint model.
/// Image branch: mean-pooled extractor features minus the corpus mean.
/// Text branch: a style table row mapped to the image space by a fitted
/// linear projection.
struct Embedder {
  FeatureExtractor extractor;
  FloatGrid projection;   // [d_e, d_style]
  FloatGrid style_table;  // [V, d_style]

  std::size_t dim() const { return projection.extent(0); }
  std::size_t vocab() const { return style_table.extent(0); }

  FloatGrid image_embedding(const FloatGrid& frame) const { return extractor.pooled(frame); }

  FloatGrid text_embedding(std::size_t style) const {
    require(style < vocab(), "Embedder: unknown style id " + std::to_string(style));
    const std::size_t ds = style_table.extent(1);
    FloatGrid row({ds, 1});
    for (std::size_t j = 0; j < ds; ++j) row[j] = style_table.at(style, j);
    return kernels::matmul(projection, row).reshaped({dim()});
  }
};

namespace detail {
// Solves A X = B for square A by Gauss-Jordan with partial pivoting.
inline FloatGrid solve(FloatGrid a, FloatGrid b) {
  const std::size_t n = a.extent(0), m = b.extent(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    require(std::abs(a.at(piv, col)) > 1e-300, "Embedder: singular projection system");
    for (std::size_t j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
    for (std::size_t j = 0; j < m; ++j) std::swap(b.at(col, j), b.at(piv, j));
    const double inv = 1.0 / a.at(col, col);
    for (std::size_t j = 0; j < n; ++j) a.at(col, j) *= inv;
    for (std::size_t j = 0; j < m; ++j) b.at(col, j) *= inv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      for (std::size_t j = 0; j < m; ++j) b.at(r, j) -= f * b.at(col, j);
    }
  }
  return b;
}
}  // namespace detail

/// Fits the embedder on stylized triples: the projection maps each style row
/// onto the mean pooled feature of that style's frames (ridge-regularized
/// minimum-norm least squares). Pooled relu features are not centered, so
/// cosines sit close to 1 and only paired comparisons carry meaning.
inline Embedder fit_embedder(const FeatureExtractor& fe, const FloatGrid& style_table,
                             std::span<const StyleTriple> triples, double ridge = 1e-8) {
  require(!triples.empty(), "fit_embedder: no triples");
  require(style_table.rank() == 2, "fit_embedder: style table must be [V, d]");
  Embedder emb;
  emb.extractor = fe;
  emb.style_table = style_table;
  const std::size_t de = fe.feature_dim(), v = style_table.extent(0);

  FloatGrid centroids({de, v});
  std::vector<std::size_t> counts(v, 0);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const std::size_t s = triples[i].style;
    require(s < v, "fit_embedder: triple style outside table");
    ++counts[s];
    const FloatGrid pooled = fe.pooled(triples[i].styled);
    for (std::size_t k = 0; k < de; ++k) centroids.at(k, s) += pooled[k];
  }
  for (std::size_t s = 0; s < v; ++s) {
    require(counts[s] > 0, "fit_embedder: style " + std::to_string(s) + " has no frames");
    for (std::size_t k = 0; k < de; ++k) centroids.at(k, s) /= static_cast<double>(counts[s]);
  }

  // P = C (E^T E + ridge I)^{-1} E^T with E = style_table^T.
  const FloatGrid e = kernels::transpose(style_table);  // [ds, V]
  FloatGrid gram = kernels::matmul(style_table, e);     // [V, V]
  for (std::size_t i = 0; i < v; ++i) gram.at(i, i) += ridge;
  const FloatGrid coef = detail::solve(gram, kernels::transpose(centroids));  // [V, de]
  emb.projection = kernels::transpose(kernels::matmul(e, coef));             // [de, ds]
  return emb;
}

// Mean cosine of embeddings of consecutive frame pairs.
inline double temporal_consistency(const FrameSequence& seq, const Embedder& emb) {
  require(seq.size() >= 2, "temporal_consistency: need at least two frames");
  std::vector<FloatGrid> e;
  for (const auto& f : seq.frames) e.push_back(emb.image_embedding(f));
  double s = 0.0;
  for (std::size_t i = 1; i < e.size(); ++i) s += kernels::cosine(e[i - 1], e[i]);
  return s / static_cast<double>(e.size() - 1);
}

// Mean cosine between each frame embedding and the style token embedding.
inline double prompt_consistency(const FrameSequence& seq, std::size_t style, const Embedder& emb) {
  require(!seq.empty(), "prompt_consistency: empty sequence");
  const FloatGrid text = emb.text_embedding(style);
  double s = 0.0;
  for (const auto& f : seq.frames) s += kernels::cosine(emb.image_embedding(f), text);
  return s / static_cast<double>(seq.size());
}

// Mean cosine between corresponding input and output frame embeddings.
inline double frame_accuracy(const FrameSequence& input, const FrameSequence& output, const Embedder& emb) {
  require(input.size() == output.size() && !input.empty(), "frame_accuracy: sequence length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    s += kernels::cosine(emb.image_embedding(input[i]), emb.image_embedding(output[i]));
  }
  return s / static_cast<double>(input.size());
}

struct MetricTriad {
  double temporal_consistency = 0.0;
  double prompt_consistency = 0.0;
  double frame_accuracy = 0.0;
};

inline MetricTriad evaluate(const FrameSequence& input, const FrameSequence& output, std::size_t style,
                            const Embedder& emb) {
  MetricTriad m;
  m.temporal_consistency = output.size() >= 2 ? temporal_consistency(output, emb) : 1.0;
  m.prompt_consistency = prompt_consistency(output, style, emb);
  m.frame_accuracy = frame_accuracy(input, output, emb);
  return m;
}

}  // namespace sav
