#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sav/frames.hpp"
#include "sav/io/container.hpp"

namespace sav::io {

// round(x * 255) with halves rounded up; out-of-range input is clipped.
inline unsigned char to_byte(double x, bool& clipped_any) {
  if (x < 0.0 || x > 1.0) {
    clipped_any = true;
    x = std::clamp(x, 0.0, 1.0);
  }
  return static_cast<unsigned char>(std::floor(x * 255.0 + 0.5));
}

/// Binary P5 image of one frame. Channels are tiled left to right, so a
/// [C,H,W] frame becomes an H x (C*W) grayscale image.
inline std::vector<unsigned char> encode_pgm(const FloatGrid& frame) {
  require(frame.rank() == 3 || frame.rank() == 2, "encode_pgm: frame must be [C,H,W] or [H,W]");
  const FloatGrid f = frame.rank() == 2 ? frame.reshaped({1, frame.extent(0), frame.extent(1)}) : frame;
  const std::size_t c = f.extent(0), h = f.extent(1), w = f.extent(2);
  const std::string header = "P5\n" + std::to_string(c * w) + " " + std::to_string(h) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  bool clipped_any = false;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t j = 0; j < w; ++j) out.push_back(to_byte(f.at(k, i, j), clipped_any));
  if (clipped_any) warn("export_pgm: values outside [0,1] were clipped");
  return out;
}

// Parses a P5 image produced by encode_pgm back into [channels, H, W/channels].
inline FloatGrid decode_pgm(const std::vector<unsigned char>& bytes, std::size_t channels = 1) {
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 255 || width == 0 || height == 0) throw FormatError("pgm: unsupported header");
  in.get();
  const auto start = static_cast<std::size_t>(in.tellg());
  if (bytes.size() != start + width * height) throw FormatError("pgm: payload size mismatch");
  require(channels >= 1 && width % channels == 0, "decode_pgm: width not divisible by channel count");
  const std::size_t w = width / channels;
  FloatGrid f({channels, height, w});
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t k = 0; k < channels; ++k)
      for (std::size_t j = 0; j < w; ++j) f.at(k, i, j) = bytes[start + i * width + k * w + j] / 255.0;
  return f;
}

inline std::string frame_filename(const std::string& prefix, std::size_t index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return prefix + buf + ext;
}

// One P5 file per frame: <dir>/<prefix>0000.pgm, ...
inline std::vector<std::filesystem::path> export_pgm(const FrameSequence& seq, const std::filesystem::path& dir,
                                                     const std::string& prefix = "frame_") {
  std::vector<std::filesystem::path> paths;
  for (std::size_t f = 0; f < seq.size(); ++f) {
    const auto bytes = encode_pgm(seq[f]);
    const auto path = dir / frame_filename(prefix, f, ".pgm");
    write_bytes_atomic(path, bytes.data(), bytes.size());
    paths.push_back(path);
  }
  return paths;
}

// A sequence is stored as one rank-4 [F, C, H, W] container.
inline void save_sequence(const std::filesystem::path& path, const FrameSequence& seq) {
  seq.validate(false);
  const Shape fs = seq.frame_shape();
  std::vector<double> data;
  data.reserve(seq.size() * shape_size(fs));
  for (const auto& f : seq.frames) data.insert(data.end(), f.data().begin(), f.data().end());
  save_grid(path, FloatGrid({seq.size(), fs[0], fs[1], fs[2]}, std::move(data)));
}

inline FrameSequence load_sequence(const std::filesystem::path& path) {
  const FloatGrid g = load_grid(path);
  if (g.rank() != 4) throw FormatError(path.string() + ": expected a rank-4 [F,C,H,W] sequence");
  FrameSequence seq;
  const Shape fs{g.extent(1), g.extent(2), g.extent(3)};
  const std::size_t n = shape_size(fs);
  for (std::size_t f = 0; f < g.extent(0); ++f) {
    std::vector<double> d(g.data().begin() + static_cast<std::ptrdiff_t>(f * n),
                          g.data().begin() + static_cast<std::ptrdiff_t>((f + 1) * n));
    seq.frames.emplace_back(fs, std::move(d));
  }
  return seq;
}

}  // namespace sav::io
