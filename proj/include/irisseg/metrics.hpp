#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "irisseg/convex.hpp"
#include "irisseg/grid.hpp"

namespace irisseg {

/// K x K pixel counts, rows = truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = kGeometryClasses)
      : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return k_; }
  std::uint64_t& at(int truth, int pred) { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
  std::uint64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t row_sum(int t) const {
    std::uint64_t s = 0;
    for (int p = 0; p < k_; ++p) s += at(t, p);
    return s;
  }
  std::uint64_t col_sum(int p) const {
    std::uint64_t s = 0;
    for (int t = 0; t < k_; ++t) s += at(t, p);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw DimensionError("confusion matrices have different class counts");
    for (std::size_t n = 0; n < counts_.size(); ++n) counts_[n] += o.counts_[n];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& truth, int num_classes) {
  require_same_shape(pred, truth, "confusion");
  validate_labels(pred, num_classes);
  validate_labels(truth, num_classes);
  ConfusionMatrix cm(num_classes);
  const auto p = pred.values();
  const auto t = truth.values();
  for (std::size_t n = 0; n < p.size(); ++n) ++cm.at(t[n], p[n]);
  return cm;
}

struct SegmentationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double mean_iou = 0.0;
};

/// IoU of one class; nullopt when the class is absent from both truth and prediction.
inline std::optional<double> class_iou(const ConfusionMatrix& cm, int k) {
  const double tp = static_cast<double>(cm.at(k, k));
  const double uni = static_cast<double>(cm.row_sum(k) + cm.col_sum(k)) - tp;
  if (uni == 0.0) return std::nullopt;
  return tp / uni;
}

/// Accuracy plus macro-averaged precision, recall and IoU.
///
/// Classes absent from both truth and prediction are left out of the means.
/// A class present on only one side scores 0 for the ratio whose denominator
/// is empty.
inline SegmentationScores metrics_from_confusion(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw DataError("metrics_from_confusion: empty confusion matrix");
  SegmentationScores s;
  double trace = 0.0;
  int counted = 0;
  for (int k = 0; k < cm.num_classes(); ++k) {
    const double tp = static_cast<double>(cm.at(k, k));
    trace += tp;
    const double rows = static_cast<double>(cm.row_sum(k));
    const double cols = static_cast<double>(cm.col_sum(k));
    if (rows == 0.0 && cols == 0.0) continue;
    ++counted;
    s.precision += cols > 0.0 ? tp / cols : 0.0;
    s.recall += rows > 0.0 ? tp / rows : 0.0;
    s.mean_iou += tp / (rows + cols - tp);
  }
  s.accuracy = trace / static_cast<double>(total);
  s.precision /= counted;
  s.recall /= counted;
  s.mean_iou /= counted;
  return s;
}

/// Pixels of the iris disc: iris together with the pupil it encloses.
inline BinaryMask iris_disc(const LabelMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j) {
      const auto l = mask(i, j);
      out(i, j) = l == label_of(ClassId::iris) || l == label_of(ClassId::pupil);
    }
  return out;
}

/// Iris disc area over the area of its convex hull. nullopt when no pixel is iris.
inline std::optional<double> ic_rate(const LabelMask& pred) {
  const auto values = pred.values();
  if (std::find(values.begin(), values.end(), label_of(ClassId::iris)) == values.end()) return std::nullopt;
  const auto disc = iris_disc(pred);
  const auto area = count_set(disc);
  return static_cast<double>(area) / static_cast<double>(count_set(convex_hull_mask(disc)));
}

}  // namespace irisseg
