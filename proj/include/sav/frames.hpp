#pragma once

#include <vector>

#include "sav/numerics/grid.hpp"

namespace sav {

/// Ordered video frames sharing one [C,H,W] shape with values in [0, 1].
struct FrameSequence {
  std::vector<FloatGrid> frames;
  double fps = 8.0;  // informational

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  const FloatGrid& operator[](std::size_t i) const { return frames.at(i); }
  FloatGrid& operator[](std::size_t i) { return frames.at(i); }
  const Shape& frame_shape() const { return frames.at(0).shape(); }

  void validate(bool check_range = true) const {
    require(!frames.empty(), "FrameSequence: no frames");
    for (const auto& f : frames) {
      require(f.shape() == frames[0].shape() && f.rank() == 3, "FrameSequence: frames must share one [C,H,W] shape");
      require_finite(f, "frame sequence");
      if (check_range) {
        for (double v : f.data()) require(v >= 0.0 && v <= 1.0, "FrameSequence: values must lie in [0,1]");
      }
    }
  }
};

}  // namespace sav
