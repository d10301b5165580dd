#pragma once

// SAVT tensor container, little-endian throughout:
//   "SAVT" | u16 version (=1) | u16 rank | u32 extents[rank] |
//   f32 payload[prod(extents)] | u32 CRC32(payload bytes)

#include <zlib.h>

#include <array>
#include <cmath>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "sav/numerics/grid.hpp"

namespace sav::io {

inline constexpr std::array<char, 4> kMagic{'S', 'A', 'V', 'T'};
inline constexpr std::uint16_t kVersion = 1;

namespace detail {
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xffu));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}
}  // namespace detail

inline std::vector<unsigned char> encode_container(const FloatGrid& g) {
  require(g.rank() >= 1 && g.rank() <= std::numeric_limits<std::uint16_t>::max(), "container: bad rank");
  require_finite(g, "container payload");
  for (double v : g.data()) {
    require(std::abs(v) <= static_cast<double>(std::numeric_limits<float>::max()),
            "container: value outside float32 range");
  }
  std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
  detail::put_u16(out, kVersion);
  detail::put_u16(out, static_cast<std::uint16_t>(g.rank()));
  for (auto e : g.shape()) {
    require(e <= std::numeric_limits<std::uint32_t>::max(), "container: extent exceeds u32");
    detail::put_u32(out, static_cast<std::uint32_t>(e));
  }
  const std::size_t payload_start = out.size();
  for (double v : g.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  detail::put_u32(out, detail::crc32_of(out.data() + payload_start, out.size() - payload_start));
  return out;
}

inline FloatGrid decode_container(const std::vector<unsigned char>& bytes, const std::string& what = "container") {
  auto fail = [&](const std::string& why) { return FormatError(what + ": " + why); };
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) throw fail("bad magic");
  const std::uint16_t version = detail::get_u16(bytes.data() + 4);
  if (version != kVersion) throw fail("unsupported version " + std::to_string(version));
  const std::uint16_t rank = detail::get_u16(bytes.data() + 6);
  if (rank == 0) throw fail("rank 0");
  std::size_t pos = 8;
  if (bytes.size() < pos + 4u * rank) throw fail("truncated header");
  Shape shape;
  for (std::uint16_t i = 0; i < rank; ++i, pos += 4) {
    const std::uint32_t e = detail::get_u32(bytes.data() + pos);
    if (e == 0) throw fail("zero extent");
    shape.push_back(e);
  }
  const std::size_t n = shape_size(shape);
  if (bytes.size() != pos + 4 * n + 4) throw fail("payload length does not match extents");
  const std::uint32_t stored = detail::get_u32(bytes.data() + pos + 4 * n);
  if (detail::crc32_of(bytes.data() + pos, 4 * n) != stored) throw fail("CRC32 mismatch");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32(bytes.data() + pos + 4 * i)));
  }
  FloatGrid g(std::move(shape), std::move(data));
  if (!g.all_finite()) throw fail("non-finite payload");
  return g;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Writes to a sibling temp file and renames it into place.
inline void write_bytes_atomic(const std::filesystem::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_grid(const std::filesystem::path& path, const FloatGrid& g) {
  const auto bytes = encode_container(g);
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

inline FloatGrid load_grid(const std::filesystem::path& path) { return decode_container(read_bytes(path), path.string()); }

}  // namespace sav::io
