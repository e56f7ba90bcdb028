#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "irisseg/grid.hpp"

namespace irisseg {

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform of one row/column: out[q] = min_p (q - p)^2 + f[p].
// Lower envelope of parabolas (Felzenszwalb & Huttenlocher). Infinite sites are
// skipped so the envelope is built from finite samples only; if there are none
// the output is +inf. With integer-valued f the result is exact.
inline void squared_edt_1d(std::span<const double> f, std::span<double> out, std::vector<int>& v,
                           std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;  // z[0] is -inf, so k never drops below 0 here
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from every pixel center to the nearest set
/// pixel center of `seeds` (+inf everywhere when `seeds` is empty). Two separable
/// passes, columns then rows.
inline Grid<double, DistanceTag> squared_distance_to(const BinaryMask& seeds) {
  const int h = seeds.height(), w = seeds.width();
  Grid<double, DistanceTag> d(h, w, 1, detail::kInf);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (seeds(i, j)) d(i, j) = 0.0;

  std::vector<double> f(std::max(h, w)), out(std::max(h, w)), z;
  std::vector<int> v;
  for (int j = 0; j < w; ++j) {
    for (int i = 0; i < h; ++i) f[i] = d(i, j);
    detail::squared_edt_1d(std::span<const double>(f.data(), h), std::span<double>(out.data(), h), v, z);
    for (int i = 0; i < h; ++i) d(i, j) = out[i];
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) f[j] = d(i, j);
    detail::squared_edt_1d(std::span<const double>(f.data(), w), std::span<double>(out.data(), w), v, z);
    for (int j = 0; j < w; ++j) d(i, j) = out[j];
  }
  return d;
}

/// Region pixels with a 4-neighbor (inside the image) of a different label.
///
/// A region covering the whole image has no such pixels; its boundary is then
/// taken to be the image frame, so that every nonempty region has a boundary to
/// measure distances from.
inline BinaryMask boundary_pixels(const BinaryMask& region) {
  const int h = region.height(), w = region.width();
  BinaryMask out(h, w);
  constexpr int di[4] = {-1, 1, 0, 0};
  constexpr int dj[4] = {0, 0, -1, 1};
  bool any_outside = false;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!region(i, j)) {
        any_outside = true;
        continue;
      }
      for (int n = 0; n < 4; ++n) {
        const int a = i + di[n], b = j + dj[n];
        if (region.in_bounds(a, b) && !region(a, b)) {
          out(i, j) = 1;
          break;
        }
      }
    }
  }
  if (!any_outside) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        if (i == 0 || j == 0 || i == h - 1 || j == w - 1) out(i, j) = 1;
  }
  return out;
}

inline BinaryMask boundary_pixels(const LabelMask& mask, ClassId k) {
  return boundary_pixels(region_of(mask, label_of(k)));
}

/// Unsigned distance to the boundary of a binary region, for every pixel.
/// Returns +inf everywhere when the region is empty.
inline Grid<double, DistanceTag> distance_to_boundary(const BinaryMask& region) {
  auto d = squared_distance_to(boundary_pixels(region));
  for (auto& v : d.values()) v = std::sqrt(v);
  return d;
}

/// Distance assigned to every pixel of the channel of an absent class.
inline double empty_region_distance(int height, int width) { return double(height) + double(width); }

/// Per-class signed distance: -d inside the region, +d outside, 0 on the
/// boundary. Absent classes get +empty_region_distance everywhere.
inline SignedDistanceField signed_distance_field(const LabelMask& mask, int num_classes) {
  validate_labels(mask, num_classes);
  const int h = mask.height(), w = mask.width();
  SignedDistanceField s(h, w, num_classes, 0.0);
  for (int k = 0; k < num_classes; ++k) {
    const BinaryMask region = region_of(mask, static_cast<std::uint8_t>(k));
    if (count_set(region) == 0) {
      const double dmax = empty_region_distance(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) s(i, j, k) = dmax;
      continue;
    }
    const auto d = distance_to_boundary(region);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double v = d(i, j);
        s(i, j, k) = v == 0.0 ? 0.0 : (region(i, j) ? -v : v);
      }
    }
  }
  return s;
}

inline SignedDistanceField signed_distance_field(const BinaryMask& mask) {
  return signed_distance_field(to_labels(mask), kNoiseClasses);
}

/// Normalized 1D Gaussian taps with radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    taps[t + radius] = std::exp(-0.5 * (t * t) / (sigma * sigma));
    sum += taps[t + radius];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

/// Separable Gaussian blur with zero padding outside the image.
template <typename Tag>
Grid<double, Tag> gaussian_blur(const Grid<double, Tag>& in, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  const int r = static_cast<int>(taps.size() / 2);
  const int h = in.height(), w = in.width(), c = in.channels();
  Grid<double, Tag> tmp(h, w, c, 0.0), out(h, w, c, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < c; ++k) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          if (j + t >= 0 && j + t < w) acc += taps[t + r] * in(i, j + t, k);
        tmp(i, j, k) = acc;
      }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < c; ++k) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          if (i + t >= 0 && i + t < h) acc += taps[t + r] * tmp(i + t, j, k);
        out(i, j, k) = acc;
      }
  return out;
}

struct BoundaryMapParams {
  int width = 3;
  double blur_sigma = 1.0;
};

/// Weights b_{i,j}: 1 on pixels whose label differs from a 4-neighbor, dilated
/// (8-connected) by width-1 rounds, then optionally blurred and rescaled to peak 1.
inline BoundaryMap boundary_map(const LabelMask& mask, BoundaryMapParams params = {}) {
  if (params.width < 1) throw ParameterError("boundary width must be >= 1");
  if (params.blur_sigma < 0.0) throw ParameterError("blur sigma must be >= 0");
  const int h = mask.height(), w = mask.width();
  BoundaryMap b(h, w, 1, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto l = mask(i, j);
      if ((i > 0 && mask(i - 1, j) != l) || (i + 1 < h && mask(i + 1, j) != l) ||
          (j > 0 && mask(i, j - 1) != l) || (j + 1 < w && mask(i, j + 1) != l))
        b(i, j) = 1.0;
    }
  }
  for (int round = 1; round < params.width; ++round) {
    BoundaryMap grown = b;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        if (b(i, j) == 0.0) continue;
        for (int a = std::max(0, i - 1); a <= std::min(h - 1, i + 1); ++a)
          for (int c = std::max(0, j - 1); c <= std::min(w - 1, j + 1); ++c) grown(a, c) = 1.0;
      }
    b = std::move(grown);
  }
  if (params.blur_sigma > 0.0) {
    b = gaussian_blur(b, params.blur_sigma);
    double peak = 0.0;
    for (double v : b.values()) peak = std::max(peak, v);
    if (peak > 0.0)
      for (auto& v : b.values()) v /= peak;
  }
  return b;
}

}  // namespace irisseg
