#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "irisseg/grid.hpp"

namespace irisseg {

namespace io {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline void put_f32(std::vector<std::uint8_t>& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(float(v))); }

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

// ---------------------------------------------------------------------------
// Binary PGM (P5), maxval 255.

struct RawPgm {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

inline std::vector<std::uint8_t> encode_pgm(int height, int width, const std::vector<std::uint8_t>& pixels) {
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

inline RawPgm decode_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw FormatError("PGM: malformed header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("PGM: bad magic (expected P5)");
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w < 1 || h < 1) throw FormatError("PGM: non-positive dimensions");
  if (maxval < 1 || maxval > 255) throw FormatError("PGM: only 8-bit maxval is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PGM: malformed header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos != n)
    throw FormatError("PGM: payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                      std::to_string(n));
  return {static_cast<int>(h), static_cast<int>(w), std::vector<std::uint8_t>(bytes.begin() + pos, bytes.end())};
}

// ---------------------------------------------------------------------------
// FLD1 float fields: "FLD1", u32 height, width, channels (LE), then f32 LE, channel-last.

inline constexpr char kFieldMagic[4] = {'F', 'L', 'D', '1'};

template <typename Tag>
std::vector<std::uint8_t> encode_field(const Grid<double, Tag>& g) {
  std::vector<std::uint8_t> out(std::begin(kFieldMagic), std::end(kFieldMagic));
  put_u32(out, static_cast<std::uint32_t>(g.height()));
  put_u32(out, static_cast<std::uint32_t>(g.width()));
  put_u32(out, static_cast<std::uint32_t>(g.channels()));
  out.reserve(out.size() + 4 * g.size());
  for (double v : g.values()) put_f32(out, v);
  return out;
}

template <typename Tag>
Grid<double, Tag> decode_field(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFieldMagic, 4) != 0)
    throw FormatError("FLD1: bad magic or truncated header");
  const std::uint32_t h = get_u32(&bytes[4]), w = get_u32(&bytes[8]), k = get_u32(&bytes[12]);
  if (h == 0 || w == 0 || k == 0 || h > (1u << 16) || w > (1u << 16) || k > (1u << 10))
    throw FormatError("FLD1: implausible dimensions");
  const std::uint64_t n = std::uint64_t(h) * w * k;
  if (bytes.size() - 16 != n * 4)
    throw FormatError("FLD1: header dims do not match payload length");
  std::vector<double> values(n);
  for (std::uint64_t t = 0; t < n; ++t) values[t] = get_f32(&bytes[16 + 4 * t]);
  return Grid<double, Tag>(int(h), int(w), int(k), std::move(values));
}

}  // namespace io

// ---------------------------------------------------------------------------

inline void store_image(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> px(img.pixel_count());
  for (std::size_t n = 0; n < px.size(); ++n)
    px[n] = static_cast<std::uint8_t>(std::lround(std::clamp(img.values()[n], 0.0, 1.0) * 255.0));
  io::write_bytes(path, io::encode_pgm(img.height(), img.width(), px));
}

inline Image load_image(const std::filesystem::path& path) {
  auto raw = io::decode_pgm(io::read_bytes(path));
  Image img(raw.height, raw.width);
  for (std::size_t n = 0; n < raw.pixels.size(); ++n) img.values()[n] = raw.pixels[n] / 255.0;
  return img;
}

/// Geometry masks are stored with raw label values 0..3.
inline void store_labels(const std::filesystem::path& path, const LabelMask& m) {
  auto v = m.values();
  io::write_bytes(path, io::encode_pgm(m.height(), m.width(), {v.begin(), v.end()}));
}

inline LabelMask load_labels(const std::filesystem::path& path) {
  auto raw = io::decode_pgm(io::read_bytes(path));
  for (auto v : raw.pixels)
    if (v >= kGeometryClasses) throw FormatError(path.string() + ": label value " + std::to_string(v) + " > 3");
  return LabelMask(raw.height, raw.width, 1, std::move(raw.pixels));
}

/// Binary masks are stored as 0 / 255.
inline void store_binary(const std::filesystem::path& path, const BinaryMask& m) {
  std::vector<std::uint8_t> px(m.pixel_count());
  for (std::size_t n = 0; n < px.size(); ++n) px[n] = m.values()[n] ? 255 : 0;
  io::write_bytes(path, io::encode_pgm(m.height(), m.width(), px));
}

inline BinaryMask load_binary(const std::filesystem::path& path) {
  auto raw = io::decode_pgm(io::read_bytes(path));
  for (auto& v : raw.pixels) {
    if (v != 0 && v != 255) throw FormatError(path.string() + ": binary mask value " + std::to_string(v));
    v = v ? 1 : 0;
  }
  return BinaryMask(raw.height, raw.width, 1, std::move(raw.pixels));
}

template <typename Tag>
void store_field(const std::filesystem::path& path, const Grid<double, Tag>& g) {
  io::write_bytes(path, io::encode_field(g));
}

template <typename Tag>
Grid<double, Tag> load_field(const std::filesystem::path& path) {
  return io::decode_field<Tag>(io::read_bytes(path));
}

}  // namespace irisseg
