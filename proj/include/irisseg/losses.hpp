#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "irisseg/grid.hpp"

namespace irisseg {

/// A loss value together with dL/dp, shaped like the probability map.
struct LossValue {
  double value = 0.0;
  ProbGrad grad;
};

/// Per-class multipliers c_k for the Dice loss.
struct ClassWeights {
  std::vector<double> weights;

  static ClassWeights unit(int num_classes) { return {std::vector<double>(num_classes, 1.0)}; }
  int size() const { return static_cast<int>(weights.size()); }
  double operator[](int k) const { return weights[k]; }
};

/// c_k = N / (K * N_k) for classes present in `truth`, 0 for absent classes.
inline ClassWeights class_weights(const LabelMask& truth, int num_classes) {
  validate_labels(truth, num_classes);
  std::vector<double> counts(num_classes, 0.0);
  for (auto v : truth.values()) counts[v] += 1.0;
  const double n = static_cast<double>(truth.pixel_count());
  ClassWeights c{std::vector<double>(num_classes, 0.0)};
  for (int k = 0; k < num_classes; ++k)
    if (counts[k] > 0.0) c.weights[k] = n / (num_classes * counts[k]);
  return c;
}

inline ClassWeights class_weights(const BinaryMask& truth) { return class_weights(to_labels(truth), kNoiseClasses); }

inline constexpr double kDefaultEps = 1e-6;

/// Class-weighted soft Dice:
///   sum_k c_k * (1 - (2 sum y p + eps) / (sum y^2 + sum p^2 + eps)).
inline LossValue dice_loss(const ProbMap& p, const ProbMap& y, const ClassWeights& weights,
                           double eps = kDefaultEps) {
  require_same_shape(p, y, "dice_loss");
  const int K = p.channels();
  if (weights.size() != K) throw DimensionError("dice_loss: weight count does not match channels");
  if (!(eps > 0.0)) throw ParameterError("dice_loss: eps must be positive");

  std::vector<double> inter(K, 0.0), mass(K, 0.0);
  const auto pv = p.values();
  const auto yv = y.values();
  for (std::size_t n = 0; n < pv.size(); ++n) {
    const int k = static_cast<int>(n % K);
    inter[k] += yv[n] * pv[n];
    mass[k] += yv[n] * yv[n] + pv[n] * pv[n];
  }

  LossValue out{0.0, ProbGrad(p.height(), p.width(), K, 0.0)};
  std::vector<double> num(K), den(K);
  for (int k = 0; k < K; ++k) {
    num[k] = 2.0 * inter[k] + eps;
    den[k] = mass[k] + eps;
    out.value += weights[k] * (1.0 - num[k] / den[k]);
  }
  auto g = out.grad.values();
  for (std::size_t n = 0; n < pv.size(); ++n) {
    const int k = static_cast<int>(n % K);
    // d/dp of -c * num/den, with dnum/dp = 2y and dden/dp = 2p
    g[n] = -weights[k] * (2.0 * yv[n] * den[k] - num[k] * 2.0 * pv[n]) / (den[k] * den[k]);
  }
  return out;
}

/// Boundary-weighted cross-entropy: -sum b * y * log(p + eps).
inline LossValue boundary_loss(const ProbMap& p, const ProbMap& y, const BoundaryMap& b,
                               double eps = kDefaultEps) {
  require_same_shape(p, y, "boundary_loss");
  require_same_plane(p, b, "boundary_loss");
  if (!(eps > 0.0)) throw ParameterError("boundary_loss: eps must be positive");
  LossValue out{0.0, ProbGrad(p.height(), p.width(), p.channels(), 0.0)};
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) {
      const double bij = b(i, j);
      if (bij == 0.0) continue;
      for (int k = 0; k < p.channels(); ++k) {
        const double yk = y(i, j, k);
        if (yk == 0.0) continue;
        out.value -= bij * yk * std::log(p(i, j, k) + eps);
        out.grad(i, j, k) = -bij * yk / (p(i, j, k) + eps);
      }
    }
  }
  return out;
}

/// sum s * p; linear in p so the gradient is the field itself.
inline LossValue surface_loss(const ProbMap& p, const SignedDistanceField& s) {
  require_same_shape(p, s, "surface_loss");
  LossValue out{0.0, retag<GradTag>(s)};
  const auto pv = p.values();
  const auto sv = s.values();
  for (std::size_t n = 0; n < pv.size(); ++n) out.value += sv[n] * pv[n];
  return out;
}

/// Trade-off weight between the Dice and surface terms: epoch / max_epochs.
inline double lambda_s(int epoch, int max_epochs) {
  if (max_epochs < 1) throw ScheduleError("max_epochs must be >= 1");
  if (epoch < 0 || epoch > max_epochs)
    throw ScheduleError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(max_epochs) + "]");
  return static_cast<double>(epoch) / max_epochs;
}

/// Coefficients of the composed objective.
struct LossSchedule {
  int max_epochs = 1;
  double lambda_boundary = 0.5;
  double lambda_noise = 3.0;
  // When false the surface term is dropped and Dice keeps full weight for the whole run.
  bool surface_enabled = true;
  // Multiplier applied to the pixel-summed terms (surface, boundary). 1 keeps the literal sums.
  double pixel_sum_scale = 1.0;

  double surface_weight(int epoch) const { return surface_enabled ? lambda_s(epoch, max_epochs) : 0.0; }
};

namespace detail {
inline void accumulate(LossValue& into, const LossValue& term, double weight) {
  if (weight == 0.0) return;
  into.value += weight * term.value;
  auto dst = into.grad.values();
  auto src = term.grad.values();
  for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += weight * src[n];
}
}  // namespace detail

/// (1 - lambda_S) * Dice_c + lambda_S * Surface + lambda_B * Boundary.
inline LossValue geometry_loss(const ProbMap& p, const ProbMap& y, const BoundaryMap& b,
                               const SignedDistanceField& s, const ClassWeights& weights, int epoch,
                               const LossSchedule& schedule, double eps = kDefaultEps) {
  const double ls = schedule.surface_weight(epoch);
  LossValue out{0.0, ProbGrad(p.height(), p.width(), p.channels(), 0.0)};
  detail::accumulate(out, dice_loss(p, y, weights, eps), 1.0 - ls);
  if (ls != 0.0) detail::accumulate(out, surface_loss(p, s), ls * schedule.pixel_sum_scale);
  if (schedule.lambda_boundary != 0.0)
    detail::accumulate(out, boundary_loss(p, y, b, eps), schedule.lambda_boundary * schedule.pixel_sum_scale);
  return out;
}

/// (1 - lambda_S) * Dice_c + lambda_S * Surface on the two-channel noise head.
inline LossValue noise_loss(const ProbMap& p, const ProbMap& y, const SignedDistanceField& s,
                            const ClassWeights& weights, int epoch, const LossSchedule& schedule,
                            double eps = kDefaultEps) {
  if (p.channels() != kNoiseClasses) throw DimensionError("noise_loss expects 2 channels");
  const double ls = schedule.surface_weight(epoch);
  LossValue out{0.0, ProbGrad(p.height(), p.width(), p.channels(), 0.0)};
  detail::accumulate(out, dice_loss(p, y, weights, eps), 1.0 - ls);
  if (ls != 0.0) detail::accumulate(out, surface_loss(p, s), ls * schedule.pixel_sum_scale);
  return out;
}

inline double total_loss(const LossValue& geo, const LossValue& noise, const LossSchedule& schedule) {
  return geo.value + schedule.lambda_noise * noise.value;
}

}  // namespace irisseg
