#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "irisseg/errors.hpp"

namespace irisseg {

/// Geometry classes. The numeric values are the on-disk label values.
enum class ClassId : std::uint8_t { background = 0, eyeball = 1, pupil = 2, iris = 3 };

inline constexpr int kGeometryClasses = 4;
inline constexpr int kNoiseClasses = 2;

constexpr std::string_view class_name(ClassId id) {
  switch (id) {
    case ClassId::background: return "background";
    case ClassId::eyeball: return "eyeball";
    case ClassId::pupil: return "pupil";
    case ClassId::iris: return "iris";
  }
  return "unknown";
}

constexpr std::uint8_t label_of(ClassId id) { return static_cast<std::uint8_t>(id); }

/// Dense H x W x K grid, row-major with the channel index fastest.
///
/// The Tag parameter only exists to keep semantically different grids
/// (label masks, probability maps, distance fields, ...) from being mixed up.
template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
      throw DimensionError("grid dimensions must be positive, got " + std::to_string(height) +
                           "x" + std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Grid(int height, int width, int channels, std::vector<T> values) : Grid(height, width, channels) {
    if (values.size() != data_.size()) {
      throw DimensionError("grid payload has " + std::to_string(values.size()) +
                           " values, expected " + std::to_string(data_.size()));
    }
    data_ = std::move(values);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < height_ && j < width_; }

  std::size_t index(int i, int j, int k = 0) const {
    return (static_cast<std::size_t>(i) * width_ + j) * channels_ + k;
  }

  T& operator()(int i, int j, int k = 0) { return data_[index(i, j, k)]; }
  const T& operator()(int i, int j, int k = 0) const { return data_[index(i, j, k)]; }

  std::span<T> pixel(int i, int j) { return {data_.data() + index(i, j), static_cast<std::size_t>(channels_)}; }
  std::span<const T> pixel(int i, int j) const {
    return {data_.data() + index(i, j), static_cast<std::size_t>(channels_)};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U, typename OtherTag>
  bool same_plane(const Grid<U, OtherTag>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  template <typename U, typename OtherTag>
  bool same_shape(const Grid<U, OtherTag>& other) const {
    return same_plane(other) && channels_ == other.channels();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.channels_ == b.channels_ && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

struct LabelTag {};
struct BinaryTag {};
struct ProbTag {};
struct DistanceTag {};
struct BoundaryTag {};
struct GradTag {};
struct ImageTag {};

using LabelMask = Grid<std::uint8_t, LabelTag>;
using BinaryMask = Grid<std::uint8_t, BinaryTag>;
using ProbMap = Grid<double, ProbTag>;
using SignedDistanceField = Grid<double, DistanceTag>;
using BoundaryMap = Grid<double, BoundaryTag>;
using ProbGrad = Grid<double, GradTag>;
/// Grayscale image with intensities in [0, 1].
using Image = Grid<double, ImageTag>;

/// Reinterprets a grid under another tag, keeping shape and values.
template <typename NewTag, typename T, typename Tag>
Grid<T, NewTag> retag(const Grid<T, Tag>& g) {
  auto v = g.values();
  return Grid<T, NewTag>(g.height(), g.width(), g.channels(), std::vector<T>(v.begin(), v.end()));
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                         std::to_string(b.channels()) + ")");
  }
}

template <typename A, typename B>
void require_same_plane(const A& a, const B& b, std::string_view what) {
  if (!a.same_plane(b)) {
    throw DimensionError(std::string(what) + ": plane mismatch (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
  }
}

inline void validate_labels(const LabelMask& mask, int num_classes) {
  for (auto v : mask.values()) {
    if (v >= num_classes) {
      throw InvalidLabelError("label " + std::to_string(v) + " out of range for " +
                              std::to_string(num_classes) + " classes");
    }
  }
}

/// Builds a geometry label mask, rejecting labels outside {0,1,2,3}.
inline LabelMask make_label_mask(int height, int width, std::vector<std::uint8_t> labels) {
  LabelMask m(height, width, 1, std::move(labels));
  validate_labels(m, kGeometryClasses);
  return m;
}

/// Builds a binary mask; any nonzero input becomes 1.
inline BinaryMask make_binary_mask(int height, int width, std::vector<std::uint8_t> bits) {
  for (auto& b : bits) b = b ? 1 : 0;
  return BinaryMask(height, width, 1, std::move(bits));
}

/// The 0/1 label mask view of a binary mask (1 = set).
inline LabelMask to_labels(const BinaryMask& m) {
  auto v = m.values();
  return LabelMask(m.height(), m.width(), 1, std::vector<std::uint8_t>(v.begin(), v.end()));
}

inline BinaryMask region_of(const LabelMask& mask, std::uint8_t label) {
  BinaryMask out(mask.height(), mask.width());
  auto src = mask.values();
  auto dst = out.values();
  for (std::size_t n = 0; n < src.size(); ++n) dst[n] = src[n] == label ? 1 : 0;
  return out;
}

inline std::size_t count_set(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto b : m.values()) n += b != 0;
  return n;
}

/// One-hot encoding; throws InvalidLabelError for label >= num_classes.
inline ProbMap one_hot(const LabelMask& mask, int num_classes) {
  validate_labels(mask, num_classes);
  ProbMap p(mask.height(), mask.width(), num_classes, 0.0);
  for (int i = 0; i < mask.height(); ++i)
    for (int j = 0; j < mask.width(); ++j) p(i, j, mask(i, j)) = 1.0;
  return p;
}

inline ProbMap one_hot(const BinaryMask& mask) { return one_hot(to_labels(mask), kNoiseClasses); }

/// Per-pixel argmax; ties go to the lowest channel index.
inline LabelMask argmax_labels(const ProbMap& p) {
  if (p.channels() < 2) throw DimensionError("argmax_labels needs at least 2 channels");
  LabelMask out(p.height(), p.width());
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) {
      auto px = p.pixel(i, j);
      int best = 0;
      for (int k = 1; k < p.channels(); ++k)
        if (px[k] > px[best]) best = k;
      out(i, j) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

/// True when every pixel is a distribution (entries in [0,1], sum within tol of 1).
inline bool is_normalized(const ProbMap& p, double tol = 1e-6) {
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) {
      double s = 0.0;
      for (double v : p.pixel(i, j)) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
        s += v;
      }
      if (std::abs(s - 1.0) > tol) return false;
    }
  }
  return true;
}

}  // namespace irisseg
