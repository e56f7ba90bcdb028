#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "irisseg/fields.hpp"
#include "irisseg/grid.hpp"
#include "irisseg/rng.hpp"

namespace irisseg {

/// One training example: image, geometry labels and eyelash mask, pixel-registered.
struct EyeSample {
  Image image;
  LabelMask geometry;
  BinaryMask lashes;
};

/// Rendering intensities of the synthetic near-infrared eye.
struct EyePalette {
  double skin = 0.60;
  double sclera = 0.85;
  double iris = 0.40;
  double pupil = 0.08;
  double lash = 0.20;
  double noise_sigma = 0.03;
  double brightness_jitter = 0.05;
};

namespace detail {

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

struct EyeShape {
  double cx, cy, a, b;                  // eyeball ellipse
  bool clipped;                          // upper lid cuts into the eyeball
  double lid_cx, lid_cy, lid_r;          // lid disc removed from the eyeball
  double icx, icy, iris_r, pupil_r;      // iris and pupil discs, concentric
};

inline EyeShape draw_shape(Rng& rng, int size) {
  const double s = size;
  EyeShape e{};
  e.cx = s / 2 + rng.uniform(-0.06, 0.06) * s;
  e.cy = s / 2 + rng.uniform(-0.06, 0.06) * s;
  e.a = rng.uniform(0.36, 0.44) * s;
  e.b = rng.uniform(0.24, 0.32) * s;
  e.clipped = rng.bernoulli(0.5);
  e.lid_r = rng.uniform(0.5, 0.9) * s;
  e.lid_cx = e.cx + rng.uniform(-0.2, 0.2) * e.a;
  e.lid_cy = e.cy - e.b - e.lid_r + rng.uniform(0.04, 0.10) * s;
  e.iris_r = rng.uniform(0.15, 0.20) * s;
  e.pupil_r = rng.uniform(0.30, 0.50) * e.iris_r;
  e.icx = e.cx + rng.uniform(-0.08, 0.08) * s;
  e.icy = e.cy + rng.uniform(-0.04, 0.04) * s;
  return e;
}

inline bool in_eyeball(const EyeShape& e, double x, double y) {
  const double u = (x - e.cx) / e.a, v = (y - e.cy) / e.b;
  if (u * u + v * v > 1.0) return false;
  if (e.clipped) {
    const double dx = x - e.lid_cx, dy = y - e.lid_cy;
    if (dx * dx + dy * dy < e.lid_r * e.lid_r) return false;
  }
  return true;
}

inline double iris_distance(const EyeShape& e, double x, double y) { return std::hypot(x - e.icx, y - e.icy); }

}  // namespace detail

/// Renders a synthetic eye: an eyeball ellipse (optionally cut by an upper lid
/// arc, which makes it non-convex), a concentric iris and pupil nested inside
/// it, and 3-8 eyelash strokes of width 1-3 crossing the upper eyeball edge.
/// The geometry mask is the exact rasterization (pixel centers). Deterministic in seed.
inline EyeSample generate_eye(std::uint64_t seed, int size = 64, const EyePalette& palette = {}) {
  if (size < 32) throw ParameterError("generate_eye: size must be >= 32");
  Rng rng(seed);
  LabelMask geo(size, size);
  detail::EyeShape e{};
  for (;;) {
    e = detail::draw_shape(rng, size);
    bool nested = true;
    std::array<std::size_t, kGeometryClasses> counts{};
    for (int i = 0; i < size && nested; ++i) {
      for (int j = 0; j < size; ++j) {
        const bool eye = detail::in_eyeball(e, j, i);
        const double r = detail::iris_distance(e, j, i);
        std::uint8_t l = label_of(ClassId::background);
        if (r <= e.pupil_r)
          l = label_of(ClassId::pupil);
        else if (r <= e.iris_r)
          l = label_of(ClassId::iris);
        else if (eye)
          l = label_of(ClassId::eyeball);
        // the disc keeps a sclera rim on all four sides
        const bool rimmed = eye && detail::in_eyeball(e, j - 1, i) && detail::in_eyeball(e, j + 1, i) &&
                            detail::in_eyeball(e, j, i - 1) && detail::in_eyeball(e, j, i + 1);
        if (r <= e.iris_r && !rimmed) {
          nested = false;
          break;
        }
        geo(i, j) = l;
        ++counts[l];
      }
    }
    if (nested && std::all_of(counts.begin(), counts.end(), [](auto c) { return c > 0; })) break;
  }

  // Eyelashes: anchored on the top edge of the eyeball, growing outwards.
  BinaryMask lashes(size, size);
  const int strokes = rng.uniform_int(3, 8);
  for (int n = 0; n < strokes; ++n) {
    const double x0 = e.cx + rng.uniform(-0.8, 0.8) * e.a;
    int col = std::clamp(static_cast<int>(std::lround(x0)), 0, size - 1);
    int top = -1;
    for (int i = 0; i < size; ++i)
      if (geo(i, col) != label_of(ClassId::background)) {
        top = i;
        break;
      }
    if (top < 0) {
      col = static_cast<int>(std::lround(e.cx));
      top = static_cast<int>(std::lround(e.cy - e.b));
    }
    const double width = rng.uniform_int(1, 3);
    const double len = rng.uniform(0.08, 0.16) * size;
    const double tilt = rng.uniform(-0.6, 0.6) + (col - e.cx) / e.a * 0.5;
    const double bend = rng.uniform(-0.3, 0.3);
    const double ax = col, ay = top + rng.uniform(1.0, 3.0);
    const double bx = ax + std::sin(tilt) * len * 0.5, by = ay - std::cos(tilt) * len * 0.5;
    const double cx = bx + std::sin(tilt + bend) * len * 0.5, cy = by - std::cos(tilt + bend) * len * 0.5;
    const double reach = width / 2.0;
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        if (detail::segment_distance(j, i, ax, ay, bx, by) <= reach ||
            detail::segment_distance(j, i, bx, by, cx, cy) <= reach)
          lashes(i, j) = 1;
  }

  Image img(size, size);
  const double shift = rng.uniform(-palette.brightness_jitter, palette.brightness_jitter);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      double v = palette.skin;
      switch (static_cast<ClassId>(geo(i, j))) {
        case ClassId::background: v = palette.skin; break;
        case ClassId::eyeball: v = palette.sclera; break;
        case ClassId::pupil: v = palette.pupil; break;
        case ClassId::iris: v = palette.iris; break;
      }
      if (lashes(i, j)) v = palette.lash;
      v += shift + palette.noise_sigma * rng.normal();
      img(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return {std::move(img), std::move(geo), std::move(lashes)};
}

enum class AugmentKind {
  crop,
  pad,
  hflip,
  vflip,
  translate,
  scale,
  brightness,
  contrast,
  noise,
  add,
  multiply,
  blur
};

constexpr bool is_geometric(AugmentKind k) {
  return k == AugmentKind::crop || k == AugmentKind::pad || k == AugmentKind::hflip || k == AugmentKind::vflip ||
         k == AugmentKind::translate || k == AugmentKind::scale;
}

/// One augmentation with explicit parameters. Which fields are read depends on kind:
///   crop: row, col, height, width      pad: amount (zeros on every side)
///   translate: dx (columns), dy (rows) scale: amount (factor about the center)
///   brightness: amount (added)         contrast: amount (factor about the mean)
///   noise: amount (gaussian sigma)     add / multiply: amount (half-range of per-pixel draws)
///   blur: amount (gaussian sigma)      noise, add, multiply also use seed
struct AugmentOp {
  AugmentKind kind = AugmentKind::hflip;
  double amount = 0.0;
  int row = 0, col = 0, height = 0, width = 0;
  int dx = 0, dy = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Resamples all three grids with out(i, j) = in(src(i, j)); out-of-range sources become 0.
template <typename SourceFn>
EyeSample remap(const EyeSample& in, int out_h, int out_w, SourceFn src) {
  EyeSample out{Image(out_h, out_w), LabelMask(out_h, out_w), BinaryMask(out_h, out_w)};
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      const auto [si, sj] = src(i, j);
      if (!in.image.in_bounds(si, sj)) continue;
      out.image(i, j) = in.image(si, sj);
      out.geometry(i, j) = in.geometry(si, sj);
      out.lashes(i, j) = in.lashes(si, sj);
    }
  }
  return out;
}

struct Src {
  int i, j;
};

}  // namespace detail

/// Applies the ops in order. Geometric ops move image and masks together
/// (nearest-neighbour); photometric ops touch the image only. The image is
/// clamped to [0, 1] after every op.
inline EyeSample augment(const EyeSample& sample, const std::vector<AugmentOp>& ops) {
  require_same_shape(sample.image, sample.geometry, "augment");
  require_same_shape(sample.image, sample.lashes, "augment");
  EyeSample cur = sample;
  for (const auto& op : ops) {
    const int h = cur.image.height(), w = cur.image.width();
    switch (op.kind) {
      case AugmentKind::crop:
        if (op.height < 1 || op.width < 1 || op.row < 0 || op.col < 0 || op.row + op.height > h ||
            op.col + op.width > w)
          throw ParameterError("augment: crop window exceeds the image");
        cur = detail::remap(cur, op.height, op.width, [&](int i, int j) { return detail::Src{i + op.row, j + op.col}; });
        break;
      case AugmentKind::pad: {
        const int p = static_cast<int>(op.amount);
        if (p < 0) throw ParameterError("augment: negative padding");
        cur = detail::remap(cur, h + 2 * p, w + 2 * p, [&](int i, int j) { return detail::Src{i - p, j - p}; });
        break;
      }
      case AugmentKind::hflip:
        cur = detail::remap(cur, h, w, [&](int i, int j) { return detail::Src{i, w - 1 - j}; });
        break;
      case AugmentKind::vflip:
        cur = detail::remap(cur, h, w, [&](int i, int j) { return detail::Src{h - 1 - i, j}; });
        break;
      case AugmentKind::translate:
        cur = detail::remap(cur, h, w, [&](int i, int j) { return detail::Src{i - op.dy, j - op.dx}; });
        break;
      case AugmentKind::scale: {
        if (!(op.amount > 0.0)) throw ParameterError("augment: scale factor must be positive");
        const double ci = (h - 1) / 2.0, cj = (w - 1) / 2.0;
        cur = detail::remap(cur, h, w, [&](int i, int j) {
          return detail::Src{static_cast<int>(std::floor((i - ci) / op.amount + ci + 0.5)),
                             static_cast<int>(std::floor((j - cj) / op.amount + cj + 0.5))};
        });
        break;
      }
      case AugmentKind::brightness:
        for (auto& v : cur.image.values()) v += op.amount;
        break;
      case AugmentKind::contrast: {
        double mean = 0.0;
        for (double v : cur.image.values()) mean += v;
        mean /= static_cast<double>(cur.image.size());
        for (auto& v : cur.image.values()) v = (v - mean) * op.amount + mean;
        break;
      }
      case AugmentKind::noise: {
        Rng rng(op.seed);
        for (auto& v : cur.image.values()) v += op.amount * rng.normal();
        break;
      }
      case AugmentKind::add: {
        Rng rng(op.seed);
        for (auto& v : cur.image.values()) v += rng.uniform(-op.amount, op.amount);
        break;
      }
      case AugmentKind::multiply: {
        Rng rng(op.seed);
        for (auto& v : cur.image.values()) v *= 1.0 + rng.uniform(-op.amount, op.amount);
        break;
      }
      case AugmentKind::blur:
        if (op.amount > 0.0) cur.image = gaussian_blur(cur.image, op.amount);
        break;
    }
    for (auto& v : cur.image.values()) v = std::clamp(v, 0.0, 1.0);
  }
  return cur;
}

/// Draws a random augmentation sequence over `kinds`, each applied with
/// probability 1/2. Magnitudes are config defaults: crop keeps >= 85% per side,
/// pad <= 4 px, translate <= 4 px, scale in [0.9, 1.1], brightness +-0.1,
/// contrast [0.8, 1.2], noise sigma <= 0.03, add +-0.03, multiply +-0.05, blur sigma [0.3, 1].
inline std::vector<AugmentOp> random_augmentation(std::uint64_t seed, int height, int width,
                                                  const std::vector<AugmentKind>& kinds) {
  Rng rng(seed);
  std::vector<AugmentOp> ops;
  for (auto k : kinds) {
    if (!rng.bernoulli(0.5)) continue;
    AugmentOp op;
    op.kind = k;
    op.seed = rng.next();
    switch (k) {
      case AugmentKind::crop:
        op.height = rng.uniform_int((height * 85 + 99) / 100, height);
        op.width = rng.uniform_int((width * 85 + 99) / 100, width);
        op.row = rng.uniform_int(0, height - op.height);
        op.col = rng.uniform_int(0, width - op.width);
        break;
      case AugmentKind::pad: op.amount = rng.uniform_int(1, 4); break;
      case AugmentKind::translate:
        op.dx = rng.uniform_int(-4, 4);
        op.dy = rng.uniform_int(-4, 4);
        break;
      case AugmentKind::scale: op.amount = rng.uniform(0.9, 1.1); break;
      case AugmentKind::brightness: op.amount = rng.uniform(-0.1, 0.1); break;
      case AugmentKind::contrast: op.amount = rng.uniform(0.8, 1.2); break;
      case AugmentKind::noise: op.amount = rng.uniform(0.0, 0.03); break;
      case AugmentKind::add: op.amount = 0.03; break;
      case AugmentKind::multiply: op.amount = 0.05; break;
      case AugmentKind::blur: op.amount = rng.uniform(0.3, 1.0); break;
      case AugmentKind::hflip:
      case AugmentKind::vflip: break;
    }
    ops.push_back(op);
  }
  return ops;
}

/// Size-preserving augmentation kinds (crop and pad change the image size).
inline std::vector<AugmentKind> size_preserving_kinds() {
  return {AugmentKind::hflip,      AugmentKind::vflip,    AugmentKind::translate, AugmentKind::scale,
          AugmentKind::brightness, AugmentKind::contrast, AugmentKind::noise,     AugmentKind::add,
          AugmentKind::multiply,   AugmentKind::blur};
}

}  // namespace irisseg
