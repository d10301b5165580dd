#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sav/numerics/ops.hpp"

namespace sav {

/// Per-head (HW)x(HW) row-stochastic attention maps from one self-attention
/// block, plus the spatial extent they were computed over.
struct AttentionRecord {
  std::vector<FloatGrid> heads;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t head_dim = 0;

  std::size_t tokens() const { return height * width; }
};

struct SaliencyMask {
  FloatGrid mask;      // [H, W] with entries in {0, 1}
  FloatGrid saliency;  // [H, W] attention received per patch
  double psi = 0.0;    // threshold: mean of `saliency`
};

struct AttentionOutput {
  Var mixed;  // [HW, C] = sum_h softmax(Q_h K_h^T / sqrt(d)) V_h Wo_h
  AttentionRecord record;
};

/// N-head self-attention over token features X [HW, C]. wq/wk/wv are [C, d]
/// per head and wo is [d, C] per head.
inline AttentionOutput multi_head_self_attention(const Var& x, std::span<const Var> wq, std::span<const Var> wk,
                                                 std::span<const Var> wv, std::span<const Var> wo,
                                                 std::size_t height, std::size_t width) {
  const FloatGrid& xv = x.value();
  require(xv.rank() == 2 && xv.extent(0) == height * width && height * width >= 1,
          "attention: features must be [HW, C], got " + shape_str(xv.shape()));
  require(!wq.empty() && wq.size() == wk.size() && wq.size() == wv.size() && wq.size() == wo.size(),
          "attention: need matching per-head projections (N >= 1)");
  const std::size_t d = wq[0].value().extent(1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  AttentionOutput out;
  out.record.height = height;
  out.record.width = width;
  out.record.head_dim = d;
  for (std::size_t h = 0; h < wq.size(); ++h) {
    require(wq[h].value().rank() == 2 && wq[h].value().extent(0) == xv.extent(1) && wk[h].shape() == wq[h].shape(),
            "attention: projection shape must be [C, d]");
    Var q = ops::matmul(x, wq[h]);
    Var k = ops::matmul(x, wk[h]);
    Var v = ops::matmul(x, wv[h]);
    Var a = ops::softmax_rows(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d));
    out.record.heads.push_back(a.value());
    Var head_out = ops::matmul(ops::matmul(a, v), wo[h]);
    out.mixed = h == 0 ? head_out : ops::add(out.mixed, head_out);
  }
  return out;
}

// Attention maps only, for the record; X is [HW, C], projections [C, d].
inline AttentionRecord compute_attention(const FloatGrid& x, std::span<const FloatGrid> wq,
                                         std::span<const FloatGrid> wk, std::size_t height, std::size_t width) {
  require(x.rank() == 2 && x.extent(0) == height * width, "compute_attention: X must be [HW, C]");
  require(!wq.empty() && wq.size() == wk.size(), "compute_attention: need N >= 1 heads");
  AttentionRecord rec;
  rec.height = height;
  rec.width = width;
  rec.head_dim = wq[0].extent(1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(rec.head_dim));
  for (std::size_t h = 0; h < wq.size(); ++h) {
    require(wq[h].rank() == 2 && wq[h].extent(0) == x.extent(1) && wk[h].shape() == wq[h].shape(),
            "compute_attention: projection shape mismatch");
    const FloatGrid q = kernels::matmul(x, wq[h]);
    const FloatGrid k = kernels::matmul(x, wk[h]);
    rec.heads.push_back(kernels::softmax_rows(inv_sqrt_d * kernels::matmul(q, kernels::transpose(k))));
  }
  return rec;
}

/// Binary saliency mask: s_j is the attention received by patch j, averaged
/// over heads and query rows; psi = mean(s); M_j = 1 iff s_j > psi.
inline SaliencyMask saliency_mask(const AttentionRecord& rec) {
  const std::size_t n = rec.tokens();
  require(n >= 1 && !rec.heads.empty(), "saliency_mask: empty attention record");
  SaliencyMask out;
  const std::size_t nh = rec.heads.size();
  // Column sums per head, then heads summed in sorted order so the result is
  // bitwise independent of head order.
  std::vector<double> per_head(nh * n, 0.0);
  for (std::size_t h = 0; h < nh; ++h) {
    const FloatGrid& a = rec.heads[h];
    require(a.rank() == 2 && a.extent(0) == n && a.extent(1) == n, "saliency_mask: head shape mismatch");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) per_head[h * n + j] += a[i * n + j];
  }
  out.saliency = FloatGrid({rec.height, rec.width});
  std::vector<double> col(nh);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t h = 0; h < nh; ++h) col[h] = per_head[h * n + j];
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (double v : col) s += v;
    out.saliency[j] = s / static_cast<double>(n * nh);
  }

  out.psi = mean(out.saliency);
  out.mask = FloatGrid({rec.height, rec.width});
  const auto [lo, hi] = std::minmax_element(out.saliency.data().begin(), out.saliency.data().end());
  // A constant map has no patch strictly above its own mean.
  if (*lo == *hi) return out;
  for (std::size_t j = 0; j < n; ++j) out.mask[j] = out.saliency[j] > out.psi ? 1.0 : 0.0;
  return out;
}

}  // namespace sav
