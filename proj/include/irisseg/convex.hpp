#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "irisseg/grid.hpp"

namespace irisseg {

/// Pixel center in integer image coordinates.
struct PixelPoint {
  std::int64_t row = 0;
  std::int64_t col = 0;

  friend auto operator<=>(const PixelPoint&, const PixelPoint&) = default;
};

/// z-component of (a - o) x (b - o); positive for a counter-clockwise turn in (col, row) axes.
inline std::int64_t cross(const PixelPoint& o, const PixelPoint& a, const PixelPoint& b) {
  return (a.col - o.col) * (b.row - o.row) - (a.row - o.row) * (b.col - o.col);
}

/// Monotone chain. Returns hull vertices in counter-clockwise order with
/// collinear points dropped; 1 vertex for a single point, 2 for a collinear set.
inline std::vector<PixelPoint> convex_hull(std::vector<PixelPoint> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;

  std::vector<PixelPoint> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Center-in-polygon test with inclusive edges. Exact on integer coordinates.
inline bool hull_contains(const std::vector<PixelPoint>& hull, const PixelPoint& q) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return hull[0] == q;
  if (hull.size() == 2) {
    const auto& a = hull[0];
    const auto& b = hull[1];
    return cross(a, b, q) == 0 && q.row >= std::min(a.row, b.row) && q.row <= std::max(a.row, b.row) &&
           q.col >= std::min(a.col, b.col) && q.col <= std::max(a.col, b.col);
  }
  for (std::size_t i = 0; i < hull.size(); ++i)
    if (cross(hull[i], hull[(i + 1) % hull.size()], q) < 0) return false;
  return true;
}

/// Rasterized convex hull: a pixel is set iff its center lies in the hull of
/// the set pixels' centers.
inline BinaryMask convex_hull_mask(const BinaryMask& region) {
  std::vector<PixelPoint> pts;
  for (int i = 0; i < region.height(); ++i)
    for (int j = 0; j < region.width(); ++j)
      if (region(i, j)) pts.push_back({i, j});
  BinaryMask out(region.height(), region.width());
  if (pts.empty()) return out;

  const auto hull = convex_hull(std::move(pts));
  std::int64_t r0 = hull[0].row, r1 = hull[0].row, c0 = hull[0].col, c1 = hull[0].col;
  for (const auto& v : hull) {
    r0 = std::min(r0, v.row);
    r1 = std::max(r1, v.row);
    c0 = std::min(c0, v.col);
    c1 = std::max(c1, v.col);
  }
  for (auto i = r0; i <= r1; ++i)
    for (auto j = c0; j <= c1; ++j)
      if (hull_contains(hull, {i, j})) out(static_cast<int>(i), static_cast<int>(j)) = 1;
  return out;
}

enum class PriorMode { off, plugin, trained };

constexpr std::string_view to_string(PriorMode m) {
  switch (m) {
    case PriorMode::off: return "off";
    case PriorMode::plugin: return "plugin";
    case PriorMode::trained: return "trained";
  }
  return "off";
}

struct ConvexPriorConfig {
  PriorMode mode = PriorMode::off;
  bool exempt_eyeball = false;
};

/// Replaces the eye structures by their convex hulls.
///
/// Structures are nested (pupil inside iris inside eyeball), so each one is
/// hulled together with everything it encloses: pupil, pupil+iris and
/// pupil+iris+eyeball. The hulls are painted outermost first, which gives the
/// priority pupil > iris > eyeball > background. With exempt_eyeball the
/// eyeball keeps its original pixels and only the inner hulls are painted.
/// Background is never hulled.
inline LabelMask convexify_labels(const LabelMask& mask, const ConvexPriorConfig& cfg) {
  validate_labels(mask, kGeometryClasses);
  const int h = mask.height(), w = mask.width();
  const auto pupil = label_of(ClassId::pupil);
  const auto iris = label_of(ClassId::iris);
  const auto eyeball = label_of(ClassId::eyeball);

  BinaryMask inner(h, w), iris_disc(h, w), eye(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const auto l = mask(i, j);
      inner(i, j) = l == pupil;
      iris_disc(i, j) = l == pupil || l == iris;
      eye(i, j) = l != label_of(ClassId::background);
    }
  }

  LabelMask out(h, w);
  if (cfg.exempt_eyeball) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        if (mask(i, j) == eyeball) out(i, j) = eyeball;
  } else {
    const auto hull = convex_hull_mask(eye);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        if (hull(i, j)) out(i, j) = eyeball;
  }
  const auto iris_hull = convex_hull_mask(iris_disc);
  const auto pupil_hull = convex_hull_mask(inner);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (pupil_hull(i, j))
        out(i, j) = pupil;
      else if (iris_hull(i, j))
        out(i, j) = iris;
    }
  }
  return out;
}

/// Record of what the convex projection changed, needed for the backward pass.
struct ProjectionRoute {
  LabelMask labels;                  // convexified argmax labels
  std::vector<std::uint8_t> changed;  // per pixel, 1 where the label was replaced
};

/// Forward of the trained convex prior: argmax, convexify, then re-emit the
/// input distribution where the label survived and the one-hot of the new
/// label where it changed.
inline std::pair<ProbMap, ProjectionRoute> convex_project_probs(const ProbMap& p, const ConvexPriorConfig& cfg) {
  if (p.channels() != kGeometryClasses) throw DimensionError("convex_project_probs expects 4 channels");
  if (cfg.mode != PriorMode::trained) throw ParameterError("convex_project_probs requires prior mode 'trained'");
  const auto before = argmax_labels(p);
  ProjectionRoute route{convexify_labels(before, cfg), std::vector<std::uint8_t>(p.pixel_count(), 0)};
  ProbMap q = p;
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) {
      const auto l = route.labels(i, j);
      if (l == before(i, j)) continue;
      route.changed[static_cast<std::size_t>(i) * p.width() + j] = 1;
      auto px = q.pixel(i, j);
      std::fill(px.begin(), px.end(), 0.0);
      px[l] = 1.0;
    }
  }
  return {std::move(q), std::move(route)};
}

/// Straight-through backward: identity at unchanged pixels; at changed pixels
/// only the channel of the new label receives the upstream gradient.
inline ProbGrad route_gradient(const ProjectionRoute& route, const ProbGrad& upstream) {
  require_same_plane(route.labels, upstream, "route_gradient");
  ProbGrad g = upstream;
  for (int i = 0; i < g.height(); ++i) {
    for (int j = 0; j < g.width(); ++j) {
      if (!route.changed[static_cast<std::size_t>(i) * g.width() + j]) continue;
      const auto l = route.labels(i, j);
      auto px = g.pixel(i, j);
      for (int k = 0; k < g.channels(); ++k)
        if (k != l) px[k] = 0.0;
    }
  }
  return g;
}

}  // namespace irisseg
