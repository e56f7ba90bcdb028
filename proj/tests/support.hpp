#pragma once

// Random generators and brute-force oracles shared by the unit tests and the
// acceptance runner. The oracles deliberately avoid the library algorithms:
// distances are all-pairs scans, hulls are triangle-membership tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "irisseg/irisseg.hpp"

namespace irisseg::oracle {

inline LabelMask random_labels(Rng& rng, int h, int w, int k) {
  LabelMask m(h, w);
  for (auto& v : m.values()) v = static_cast<std::uint8_t>(rng.uniform_int(0, k - 1));
  return m;
}

inline BinaryMask random_bits(Rng& rng, int h, int w, double density) {
  BinaryMask m(h, w);
  for (auto& v : m.values()) v = rng.bernoulli(density) ? 1 : 0;
  return m;
}

/// Union of a few random axis-aligned boxes and discs; gives masks with real interiors.
inline LabelMask random_blob_labels(Rng& rng, int h, int w, int k) {
  LabelMask m(h, w, 1, static_cast<std::uint8_t>(rng.uniform_int(0, k - 1)));
  const int shapes = rng.uniform_int(1, 6);
  for (int s = 0; s < shapes; ++s) {
    const auto label = static_cast<std::uint8_t>(rng.uniform_int(0, k - 1));
    const double ci = rng.uniform(0, h), cj = rng.uniform(0, w), r = rng.uniform(0.5, std::max(h, w) / 2.0);
    const bool disc = rng.bernoulli(0.5);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double di = i - ci, dj = j - cj;
        if (disc ? di * di + dj * dj <= r * r : std::abs(di) <= r && std::abs(dj) <= r * 0.6) m(i, j) = label;
      }
  }
  return m;
}

inline std::vector<double> random_logits(Rng& rng, std::size_t n, double scale = 2.0) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.uniform(-scale, scale);
  return z;
}

inline ProbMap softmax(const std::vector<double>& logits, int h, int w, int k) {
  ProbMap p(h, w, k);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const std::size_t base = (static_cast<std::size_t>(i) * w + j) * k;
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) mx = std::max(mx, logits[base + c]);
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(logits[base + c] - mx);
      for (int c = 0; c < k; ++c) p(i, j, c) = std::exp(logits[base + c] - mx) / sum;
    }
  return p;
}

/// Chain rule through a per-pixel softmax: dL/dz = p * (g - <g, p>).
inline std::vector<double> softmax_backward(const ProbMap& p, const ProbGrad& g) {
  std::vector<double> out(p.size());
  const int k = p.channels();
  for (std::size_t px = 0; px < p.pixel_count(); ++px) {
    double dot = 0.0;
    for (int c = 0; c < k; ++c) dot += g.values()[px * k + c] * p.values()[px * k + c];
    for (int c = 0; c < k; ++c) out[px * k + c] = p.values()[px * k + c] * (g.values()[px * k + c] - dot);
  }
  return out;
}

struct GradCheck {
  double worst_rel_error = 0.0;
  int probes = 0;
};

/// Central differences of `loss` w.r.t. logits at random probes, against the
/// analytic gradient pulled back through the softmax.
inline GradCheck check_logit_gradient(Rng& rng, std::vector<double> z, int h, int w, int k,
                                      const std::function<LossValue(const ProbMap&)>& loss, int probes,
                                      double step = 1e-5) {
  const auto p = softmax(z, h, w, k);
  const auto analytic = softmax_backward(p, loss(p).grad);
  GradCheck out;
  for (int t = 0; t < probes; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(z.size()) - 1));
    const double keep = z[n];
    z[n] = keep + step;
    const double up = loss(softmax(z, h, w, k)).value;
    z[n] = keep - step;
    const double down = loss(softmax(z, h, w, k)).value;
    z[n] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(numeric - analytic[n]) / std::max({std::abs(numeric), std::abs(analytic[n]), 1e-6});
    out.worst_rel_error = std::max(out.worst_rel_error, rel);
    ++out.probes;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance oracles

/// Region pixels with a 4-neighbour outside the region; the image frame when
/// the region covers the whole image.
inline BinaryMask brute_boundary(const BinaryMask& region) {
  const int h = region.height(), w = region.width();
  BinaryMask out(h, w);
  bool full = true;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (!region(i, j)) {
        full = false;
        continue;
      }
      const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
      for (int t = 0; t < 4; ++t) {
        const int a = i + di[t], b = j + dj[t];
        if (a >= 0 && b >= 0 && a < h && b < w && !region(a, b)) out(i, j) = 1;
      }
    }
  if (full)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out(i, j) = i == 0 || j == 0 || i == h - 1 || j == w - 1;
  return out;
}

/// All-pairs Euclidean distance to the nearest set pixel of `targets`; +inf when empty.
inline std::vector<double> brute_distance(const BinaryMask& targets) {
  const int h = targets.height(), w = targets.width();
  std::vector<double> out(targets.pixel_count(), std::numeric_limits<double>::infinity());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      long long best = -1;
      for (int a = 0; a < h; ++a)
        for (int b = 0; b < w; ++b)
          if (targets(a, b)) {
            const long long d2 = static_cast<long long>(a - i) * (a - i) + static_cast<long long>(b - j) * (b - j);
            if (best < 0 || d2 < best) best = d2;
          }
      if (best >= 0) out[static_cast<std::size_t>(i) * w + j] = std::sqrt(static_cast<double>(best));
    }
  return out;
}

inline SignedDistanceField brute_sdf(const LabelMask& mask, int k) {
  const int h = mask.height(), w = mask.width();
  SignedDistanceField out(h, w, k);
  for (int c = 0; c < k; ++c) {
    const auto region = region_of(mask, static_cast<std::uint8_t>(c));
    if (count_set(region) == 0) {
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out(i, j, c) = double(h) + double(w);
      continue;
    }
    const auto d = brute_distance(brute_boundary(region));
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double v = d[static_cast<std::size_t>(i) * w + j];
        out(i, j, c) = v == 0.0 ? 0.0 : (region(i, j) ? -v : v);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convex hull oracle: a pixel centre is in the hull iff it lies in a triangle
// (possibly degenerate) spanned by three region pixels. Only the leftmost and
// rightmost pixel of each row can be hull vertices, so those are the candidates.

inline bool in_triangle(long long ai, long long aj, long long bi, long long bj, long long ci, long long cj, long long qi,
                        long long qj) {
  auto cr = [](long long oi, long long oj, long long pi, long long pj, long long ri, long long rj) {
    return (pi - oi) * (rj - oj) - (pj - oj) * (ri - oi);
  };
  const long long d1 = cr(ai, aj, bi, bj, qi, qj), d2 = cr(bi, bj, ci, cj, qi, qj), d3 = cr(ci, cj, ai, aj, qi, qj);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
  if (neg && pos) return false;
  if (cr(ai, aj, bi, bj, ci, cj) != 0) return true;
  // Degenerate triangle: q must lie on one of the segments.
  auto on_segment = [&](long long pi, long long pj, long long ri, long long rj) {
    return cr(pi, pj, ri, rj, qi, qj) == 0 && std::min(pi, ri) <= qi && qi <= std::max(pi, ri) &&
           std::min(pj, rj) <= qj && qj <= std::max(pj, rj);
  };
  return on_segment(ai, aj, bi, bj) || on_segment(bi, bj, ci, cj) || on_segment(ai, aj, ci, cj);
}

inline BinaryMask brute_hull(const BinaryMask& region) {
  const int h = region.height(), w = region.width();
  std::vector<std::pair<int, int>> cand;
  for (int i = 0; i < h; ++i) {
    int lo = -1, hi = -1;
    for (int j = 0; j < w; ++j)
      if (region(i, j)) {
        if (lo < 0) lo = j;
        hi = j;
      }
    if (lo >= 0) {
      cand.emplace_back(i, lo);
      if (hi != lo) cand.emplace_back(i, hi);
    }
  }
  BinaryMask out(h, w);
  const std::size_t n = cand.size();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bool inside = false;
      for (std::size_t a = 0; a < n && !inside; ++a)
        for (std::size_t b = a; b < n && !inside; ++b)
          for (std::size_t c = b; c < n && !inside; ++c)
            inside = in_triangle(cand[a].first, cand[a].second, cand[b].first, cand[b].second, cand[c].first,
                                 cand[c].second, i, j);
      out(i, j) = inside;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics oracle from per-class pixel sets.

inline SegmentationScores brute_scores(const LabelMask& pred, const LabelMask& truth, int k) {
  double correct = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) correct += pred.values()[n] == truth.values()[n];
  SegmentationScores s;
  s.accuracy = correct / static_cast<double>(pred.size());
  int counted = 0;
  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> in_pred, in_truth;
    for (std::size_t n = 0; n < pred.size(); ++n) {
      if (pred.values()[n] == c) in_pred.push_back(n);
      if (truth.values()[n] == c) in_truth.push_back(n);
    }
    if (in_pred.empty() && in_truth.empty()) continue;
    ++counted;
    std::size_t inter = 0;
    for (auto a : in_pred)
      for (auto b : in_truth) inter += a == b;
    const double uni = static_cast<double>(in_pred.size() + in_truth.size() - inter);
    s.precision += in_pred.empty() ? 0.0 : double(inter) / double(in_pred.size());
    s.recall += in_truth.empty() ? 0.0 : double(inter) / double(in_truth.size());
    s.mean_iou += double(inter) / uni;
  }
  s.precision /= counted;
  s.recall /= counted;
  s.mean_iou /= counted;
  return s;
}

// ---------------------------------------------------------------------------
// Eyelash-like strokes

/// A straight horizontal or vertical bar of the given width and random length
/// (24..48) placed away from the frame of a 64x64 canvas.
inline BinaryMask stroke_mask(Rng& rng, int width, int size = 64) {
  BinaryMask m(size, size);
  const int len = rng.uniform_int(24, 48);
  const bool vertical = rng.bernoulli(0.5);
  const int a = rng.uniform_int(4, size - 4 - width);
  const int b = rng.uniform_int(4, size - 4 - len);
  for (int t = 0; t < len; ++t)
    for (int s = 0; s < width; ++s) {
      if (vertical)
        m(b + t, a + s) = 1;
      else
        m(a + s, b + t) = 1;
    }
  return m;
}

/// A polyline stroke (2-4 segments) of the given width; used for property tests.
inline BinaryMask polyline_stroke(Rng& rng, int width, int size = 48) {
  BinaryMask m(size, size);
  double x = rng.uniform(8, size - 8), y = rng.uniform(8, size - 8);
  const int segs = rng.uniform_int(2, 4);
  const double r = width / 2.0;
  for (int s = 0; s < segs; ++s) {
    const double nx = std::clamp(x + rng.uniform(-12, 12), 4.0, size - 5.0);
    const double ny = std::clamp(y + rng.uniform(-12, 12), 4.0, size - 5.0);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const double vx = nx - x, vy = ny - y, len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((j - x) * vx + (i - y) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double px = x + t * vx - j, py = y + t * vy - i;
        if (px * px + py * py <= r * r) m(i, j) = 1;
      }
    x = nx;
    y = ny;
  }
  if (count_set(m) == 0) m(size / 2, size / 2) = 1;
  return m;
}

inline bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t n = 0; n < a.size(); ++n)
    if (a.values()[n] && !b.values()[n]) return false;
  return true;
}

}  // namespace irisseg::oracle
