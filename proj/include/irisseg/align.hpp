#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "irisseg/fields.hpp"
#include "irisseg/grid.hpp"

namespace irisseg {

struct LashStats {
  double d_hat = 0.0;      // mean of -d over set pixels; <= 0
  std::size_t n_el = 0;    // number of set pixels
};

/// Mean negated inside distance to the lash boundary.
inline LashStats lash_stats(const BinaryMask& mask) {
  const auto n = count_set(mask);
  if (n == 0) throw EmptyRegionError("lash_stats: mask has no set pixels");
  const auto d = distance_to_boundary(mask);
  double sum = 0.0;
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j)
      if (mask(i, j)) sum -= d(i, j);
  return {sum / static_cast<double>(n), n};
}

/// Clears set pixels whose distance to the boundary is strictly below c.
inline BinaryMask thin(const BinaryMask& mask, double c) {
  if (c < 0.0) throw ParameterError("thin: threshold must be >= 0");
  BinaryMask out = mask;
  if (count_set(mask) == 0) return out;
  const auto d = distance_to_boundary(mask);
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j)
      if (mask(i, j) && d(i, j) < c) out(i, j) = 0;
  return out;
}

/// Sets unset pixels whose distance to the boundary is strictly below c.
inline BinaryMask thicken(const BinaryMask& mask, double c) {
  if (c < 0.0) throw ParameterError("thicken: threshold must be >= 0");
  if (c == 0.0) return mask;
  if (count_set(mask) == 0) throw EmptyRegionError("thicken: mask has no set pixels");
  BinaryMask out = mask;
  const auto d = distance_to_boundary(mask);
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j)
      if (!mask(i, j) && d(i, j) < c) out(i, j) = 1;
  return out;
}

enum class AlignStrategy { thin, thicken };

inline BinaryMask align_lashes(const BinaryMask& mask, AlignStrategy strategy, double c) {
  return strategy == AlignStrategy::thin ? thin(mask, c) : thicken(mask, c);
}

/// Tie-break order for majority voting, strongest first.
inline constexpr std::array<ClassId, 4> kLabelPriority = {ClassId::pupil, ClassId::iris, ClassId::eyeball,
                                                          ClassId::background};

/// Per-pixel mode of the annotators' labels; ties go to pupil > iris > eyeball > background.
inline LabelMask majority_vote(const std::vector<LabelMask>& masks) {
  if (masks.size() < 2) throw ArityError("majority_vote needs at least two masks");
  for (const auto& m : masks) {
    require_same_shape(m, masks.front(), "majority_vote");
    validate_labels(m, kGeometryClasses);
  }
  const auto& first = masks.front();
  LabelMask out(first.height(), first.width());
  for (std::size_t n = 0; n < first.size(); ++n) {
    std::array<int, kGeometryClasses> votes{};
    for (const auto& m : masks) ++votes[m.values()[n]];
    auto best = kLabelPriority[0];
    for (auto c : kLabelPriority)
      if (votes[label_of(c)] > votes[label_of(best)]) best = c;
    out.values()[n] = label_of(best);
  }
  return out;
}

struct LashHistogram {
  std::vector<double> edges;         // bins + 1 ascending edges
  std::vector<std::size_t> counts;   // one per bin
  std::vector<double> d_hats;        // per mask, input order

  int bin_of(double value) const {
    const int bins = static_cast<int>(counts.size());
    const double lo = edges.front(), hi = edges.back();
    int b = static_cast<int>(std::floor((value - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
  }
};

/// Histogram of per-mask d_hat over uniform bins on [lo, hi]. Values outside
/// the range are counted in the end bins, so counts always sum to the mask count.
inline LashHistogram lash_histogram(const std::vector<BinaryMask>& masks, int bins = 40, double lo = -3.0,
                                    double hi = 0.0) {
  if (bins < 2) throw ParameterError("lash_histogram needs at least 2 bins");
  if (!(hi > lo)) throw ParameterError("lash_histogram needs hi > lo");
  LashHistogram h;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  for (const auto& m : masks) {
    const double d = lash_stats(m).d_hat;
    h.d_hats.push_back(d);
    ++h.counts[h.bin_of(d)];
  }
  return h;
}

}  // namespace irisseg
