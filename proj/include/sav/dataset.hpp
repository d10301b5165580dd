#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "sav/frames.hpp"
#include "sav/numerics/rng.hpp"

namespace sav {

// Closed style vocabulary; each token is bound to a pure pixel transform.
enum class Style : std::size_t { kPlain = 0, kInvert = 1, kStripes = 2, kWarm = 3, kMosaic = 4 };

inline constexpr std::array<std::string_view, 5> kStyleNames{"plain", "invert", "stripes", "warm", "mosaic"};
inline constexpr std::size_t kStyleCount = kStyleNames.size();
inline constexpr std::size_t kMosaicBlock = 4;
inline constexpr std::size_t kStripePeriod = 8;

inline std::size_t style_id(std::string_view name) {
  for (std::size_t i = 0; i < kStyleNames.size(); ++i)
    if (kStyleNames[i] == name) return i;
  throw ContractError("unknown style token '" + std::string(name) + "'");
}

inline std::string_view style_name(std::size_t id) {
  require(id < kStyleCount, "unknown style id " + std::to_string(id));
  return kStyleNames[id];
}

// Stripes: multiplicative diagonal sinusoid in [0.2, 1]. Warm: lifts red,
// damps blue. Mosaic: 4x4 block means. All map [0,1] into [0,1].
inline FloatGrid apply_style(const FloatGrid& x, std::size_t token) {
  require(x.rank() == 3, "apply_style: frame must be [C,H,W]");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  FloatGrid y = x;
  switch (static_cast<Style>(token)) {
    case Style::kPlain:
      break;
    case Style::kInvert:
      for (auto& v : y.data()) v = 1.0 - v;
      break;
    case Style::kStripes:
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(i + j) / kStripePeriod;
            y.at(k, i, j) = x.at(k, i, j) * (0.6 + 0.4 * std::cos(phase));
          }
      break;
    case Style::kWarm: {
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t p = 0; p < h * w; ++p) {
          double& v = y[k * h * w + p];
          if (c >= 3 && k == 0) v = 0.3 + 0.7 * v;
          else if (c >= 3 && k == 1) v = 0.9 * v;
          else if (c >= 3 && k == 2) v = 0.6 * v;
          else v = 0.2 + 0.8 * v;
        }
      }
      break;
    }
    case Style::kMosaic:
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t bi = 0; bi < h; bi += kMosaicBlock)
          for (std::size_t bj = 0; bj < w; bj += kMosaicBlock) {
            const std::size_t ie = std::min(h, bi + kMosaicBlock), je = std::min(w, bj + kMosaicBlock);
            double s = 0.0;
            for (std::size_t i = bi; i < ie; ++i)
              for (std::size_t j = bj; j < je; ++j) s += x.at(k, i, j);
            s /= static_cast<double>((ie - bi) * (je - bj));
            for (std::size_t i = bi; i < ie; ++i)
              for (std::size_t j = bj; j < je; ++j) y.at(k, i, j) = s;
          }
      break;
    default:
      throw ContractError("unknown style id " + std::to_string(token));
  }
  return y;
}

inline FrameSequence apply_style(const FrameSequence& seq, std::size_t token) {
  FrameSequence out;
  out.fps = seq.fps;
  for (const auto& f : seq.frames) out.frames.push_back(apply_style(f, token));
  return out;
}

enum class ShapeKind { kDisk, kSquare };

struct MovingShape {
  ShapeKind kind = ShapeKind::kDisk;
  double x0 = 0.0, y0 = 0.0;  // center at frame 0, in pixels
  double vx = 0.0, vy = 0.0;  // pixels per frame
  double radius = 4.0;        // disk radius or square half-side
  std::array<double, 3> color{1.0, 1.0, 1.0};
};

struct SceneSpec {
  std::size_t size = 32;
  std::size_t channels = 3;
  std::size_t frames = 16;
  std::vector<MovingShape> shapes;
  std::array<double, 3> bg_start{0.2, 0.2, 0.2};  // top-left
  std::array<double, 3> bg_end{0.5, 0.5, 0.5};    // bottom-right
  double texture = 0.03;                          // static background noise amplitude
};

inline std::array<double, 2> shape_center(const MovingShape& s, std::size_t f) {
  return {s.x0 + static_cast<double>(f) * s.vx, s.y0 + static_cast<double>(f) * s.vy};
}

inline void validate_scene(const SceneSpec& spec) {
  require(spec.size >= 4 && spec.frames >= 1 && spec.channels >= 1, "SceneSpec: degenerate canvas");
  const double lim = static_cast<double>(spec.size);
  for (const auto& s : spec.shapes) {
    require(s.radius > 0.0, "SceneSpec: shape radius must be positive");
    for (std::size_t f : {std::size_t{0}, spec.frames - 1}) {
      const auto [cx, cy] = shape_center(s, f);
      require(cx - s.radius >= 0.0 && cx + s.radius <= lim && cy - s.radius >= 0.0 && cy + s.radius <= lim,
              "SceneSpec: shape leaves the canvas at frame " + std::to_string(f));
    }
  }
}

/// Renders shapes translating at constant velocity over a static gradient
/// background. The rng only drives the static background texture.
inline FrameSequence generate_video(const SceneSpec& spec, Rng& rng) {
  validate_scene(spec);
  const std::size_t n = spec.size, c = spec.channels;
  FloatGrid background({c, n, n});
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t kc = std::min<std::size_t>(k, 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double a = static_cast<double>(i + j) / static_cast<double>(2 * (n - 1));
        background.at(k, i, j) = spec.bg_start[kc] + a * (spec.bg_end[kc] - spec.bg_start[kc]);
      }
  }
  for (auto& v : background.data()) v = std::clamp(v + spec.texture * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);

  FrameSequence seq;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    FloatGrid frame = background;
    for (const auto& s : spec.shapes) {
      const auto [cx, cy] = shape_center(s, f);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double dx = static_cast<double>(j) + 0.5 - cx;
          const double dy = static_cast<double>(i) + 0.5 - cy;
          const bool inside = s.kind == ShapeKind::kDisk ? dx * dx + dy * dy <= s.radius * s.radius
                                                         : std::abs(dx) <= s.radius && std::abs(dy) <= s.radius;
          if (!inside) continue;
          for (std::size_t k = 0; k < c; ++k) frame.at(k, i, j) = s.color[std::min<std::size_t>(k, 2)];
        }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

struct SceneRanges {
  std::size_t size = 32;
  std::size_t channels = 3;
  std::size_t frames = 16;
  double radius_min = 3.0, radius_max = 7.0;
  double speed_max = 1.0;  // pixels per frame, per axis
  std::size_t max_shapes = 2;
};

inline SceneSpec random_scene(const SceneRanges& r, Rng& rng) {
  SceneSpec spec;
  spec.size = r.size;
  spec.channels = r.channels;
  spec.frames = r.frames;
  for (std::size_t k = 0; k < 3; ++k) {
    spec.bg_start[k] = 0.1 + 0.4 * rng.uniform();
    spec.bg_end[k] = 0.1 + 0.4 * rng.uniform();
  }
  const std::size_t count = 1 + rng.below(static_cast<std::uint32_t>(std::max<std::size_t>(r.max_shapes, 1)));
  const double lim = static_cast<double>(r.size);
  const double span = static_cast<double>(r.frames - 1);
  for (std::size_t s = 0; s < count; ++s) {
    MovingShape m;
    m.kind = rng.bernoulli(0.5) ? ShapeKind::kDisk : ShapeKind::kSquare;
    m.radius = r.radius_min + (r.radius_max - r.radius_min) * rng.uniform();
    const double room = lim - 2.0 * m.radius;
    require(room > 0.0, "random_scene: radius too large for canvas");
    const double vmax = span > 0.0 ? std::min(r.speed_max, 0.9 * room / span) : 0.0;
    m.vx = vmax * (2.0 * rng.uniform() - 1.0);
    m.vy = vmax * (2.0 * rng.uniform() - 1.0);
    // Start positions that keep the whole trajectory on the canvas.
    auto pick = [&](double v) {
      const double lo = m.radius + std::max(0.0, -v * span);
      const double hi = lim - m.radius - std::max(0.0, v * span);
      return lo + (hi - lo) * rng.uniform();
    };
    m.x0 = pick(m.vx);
    m.y0 = pick(m.vy);
    for (auto& col : m.color) col = 0.55 + 0.45 * rng.uniform();
    if (rng.bernoulli(0.5)) {
      for (auto& col : m.color) col = 1.0 - col;
    }
    spec.shapes.push_back(m);
  }
  return spec;
}

struct StyleTriple {
  std::size_t video = 0;
  std::size_t frame = 0;
  std::size_t style = 0;
  FloatGrid content;
  FloatGrid styled;
};

struct Corpus {
  std::vector<FrameSequence> videos;
  std::vector<std::size_t> train_videos;
  std::vector<std::size_t> heldout_videos;
  std::vector<StyleTriple> train;
  std::vector<StyleTriple> heldout;
};

// Every (frame, style) pair of the listed videos.
inline std::vector<StyleTriple> make_triples(const std::vector<FrameSequence>& videos,
                                             const std::vector<std::size_t>& ids) {
  std::vector<StyleTriple> out;
  for (std::size_t v : ids) {
    require(v < videos.size(), "make_triples: video index out of range");
    for (std::size_t f = 0; f < videos[v].size(); ++f)
      for (std::size_t s = 0; s < kStyleCount; ++s) out.push_back({v, f, s, videos[v][f], apply_style(videos[v][f], s)});
  }
  return out;
}

/// n content videos, every (frame, style) pair materialized, split 80/20 by
/// video with a seeded permutation.
inline Corpus build_dataset(std::size_t n_videos, const SceneRanges& ranges, Rng& rng) {
  require(n_videos >= 1, "build_dataset: need at least one video");
  Corpus corpus;
  for (std::size_t v = 0; v < n_videos; ++v) {
    const SceneSpec spec = random_scene(ranges, rng);
    corpus.videos.push_back(generate_video(spec, rng));
  }
  std::vector<std::size_t> order(n_videos);
  for (std::size_t i = 0; i < n_videos; ++i) order[i] = i;
  for (std::size_t i = n_videos; i > 1; --i) std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
  const std::size_t n_train = n_videos == 1 ? 1 : static_cast<std::size_t>(std::lround(0.8 * n_videos));
  corpus.train_videos.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.heldout_videos.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(corpus.train_videos.begin(), corpus.train_videos.end());
  std::sort(corpus.heldout_videos.begin(), corpus.heldout_videos.end());

  corpus.train = make_triples(corpus.videos, corpus.train_videos);
  corpus.heldout = make_triples(corpus.videos, corpus.heldout_videos);
  return corpus;
}

/// Epoch-shuffled index stream: every item appears once per epoch, so style
/// tokens stay balanced over any window of whole epochs.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, Rng& rng) : rng_(rng), order_(n) {
    require(n >= 1, "EpochSampler: empty population");
    reshuffle();
  }

  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[rng_.below(static_cast<std::uint32_t>(i))]);
    pos_ = 0;
  }

  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Global per-frame brightness flicker: x' = clip(g_f x + o_f).
inline FrameSequence add_flicker(const FrameSequence& seq, double amplitude, Rng& rng) {
  FrameSequence out;
  out.fps = seq.fps;
  for (const auto& f : seq.frames) {
    const double gain = 1.0 + amplitude * (2.0 * rng.uniform() - 1.0);
    const double offset = 0.5 * amplitude * (2.0 * rng.uniform() - 1.0);
    FloatGrid g = f;
    for (auto& v : g.data()) v = std::clamp(gain * v + offset, 0.0, 1.0);
    out.frames.push_back(std::move(g));
  }
  return out;
}

}  // namespace sav
