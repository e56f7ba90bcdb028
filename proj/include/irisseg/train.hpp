#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "irisseg/convex.hpp"
#include "irisseg/fields.hpp"
#include "irisseg/losses.hpp"
#include "irisseg/metrics.hpp"
#include "irisseg/model.hpp"
#include "irisseg/synth.hpp"

namespace irisseg {

/// Which loss terms a head is trained with, e.g. "D", "D_b", "D+B", "D+B+S", "D_b+S".
struct LossSelection {
  bool balanced = false;  // D_b: class-balanced Dice weights
  bool boundary = false;  // B
  bool surface = false;   // S, scheduled against Dice by lambda_S

  friend bool operator==(const LossSelection&, const LossSelection&) = default;
};

inline LossSelection parse_losses(std::string_view text) {
  LossSelection sel;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('+', pos), text.size());
    const auto tok = text.substr(pos, end - pos);
    if (first) {
      if (tok == "D_b")
        sel.balanced = true;
      else if (tok != "D")
        throw ParameterError("loss combination must start with D or D_b: '" + std::string(text) + "'");
      first = false;
    } else if (tok == "B" && !sel.boundary) {
      sel.boundary = true;
    } else if (tok == "S" && !sel.surface) {
      sel.surface = true;
    } else {
      throw ParameterError("unknown loss term '" + std::string(tok) + "' in '" + std::string(text) + "'");
    }
    pos = end + 1;
  }
  return sel;
}

inline std::string to_string(const LossSelection& s) {
  std::string out = s.balanced ? "D_b" : "D";
  if (s.boundary) out += "+B";
  if (s.surface) out += "+S";
  return out;
}

struct TrainConfig {
  int epochs = 60;
  int batch = 8;
  double lr0 = 1e-3;
  double poly_power = 0.9;
  double lambda_boundary = 0.5;
  double lambda_noise = 3.0;
  double eps = kDefaultEps;
  LossSelection geometry_losses = {};
  LossSelection noise_losses = {};
  ConvexPriorConfig prior = {};
  // With the trained prior, this fraction of the epochs runs without the
  // projection. Hulls of an untrained network's scattered iris pixels cover
  // most of the eye and teach it to stop predicting iris at all.
  double prior_warmup = 0.5;
  std::uint64_t seed = 1;
  int channels = 16;
  BoundaryMapParams boundary = {};
  bool augment = false;
  // Pixel-summed terms (surface, boundary) are multiplied by 1/(H*W).
  bool per_pixel_scaling = true;
  int threads = 1;
};

/// A sample with every loss input precomputed.
struct PreparedSample {
  Image image;
  LabelMask geometry;
  BinaryMask lashes;
  ProbMap geometry_one_hot;
  ProbMap lash_one_hot;
  SignedDistanceField geometry_sdf;
  SignedDistanceField lash_sdf;
  BoundaryMap boundary;
  ClassWeights geometry_weights;
  ClassWeights lash_weights;
};

inline PreparedSample prepare_sample(const EyeSample& s, const TrainConfig& cfg) {
  PreparedSample p{s.image, s.geometry, s.lashes, one_hot(s.geometry, kGeometryClasses), one_hot(s.lashes),
                   {}, {}, {}, {}, {}};
  if (cfg.geometry_losses.surface) p.geometry_sdf = signed_distance_field(s.geometry, kGeometryClasses);
  if (cfg.noise_losses.surface) p.lash_sdf = signed_distance_field(s.lashes);
  if (cfg.geometry_losses.boundary) p.boundary = boundary_map(s.geometry, cfg.boundary);
  p.geometry_weights = cfg.geometry_losses.balanced ? class_weights(s.geometry, kGeometryClasses)
                                                    : ClassWeights::unit(kGeometryClasses);
  p.lash_weights = cfg.noise_losses.balanced ? class_weights(s.lashes) : ClassWeights::unit(kNoiseClasses);
  return p;
}

inline LossSchedule geometry_schedule(const TrainConfig& cfg, int height, int width) {
  LossSchedule s;
  s.max_epochs = cfg.epochs;
  s.lambda_boundary = cfg.geometry_losses.boundary ? cfg.lambda_boundary : 0.0;
  s.lambda_noise = cfg.lambda_noise;
  s.surface_enabled = cfg.geometry_losses.surface;
  s.pixel_sum_scale = cfg.per_pixel_scaling ? 1.0 / (double(height) * width) : 1.0;
  return s;
}

inline LossSchedule noise_schedule(const TrainConfig& cfg, int height, int width) {
  LossSchedule s = geometry_schedule(cfg, height, width);
  s.lambda_boundary = 0.0;
  s.surface_enabled = cfg.noise_losses.surface;
  return s;
}

/// First 0-based epoch that trains through the convex projection.
inline int prior_start_epoch(const TrainConfig& cfg) {
  return static_cast<int>(std::floor(cfg.prior_warmup * cfg.epochs));
}

/// Loss and parameter gradient of one sample under the composed objective.
struct SampleStep {
  double loss = 0.0;
  std::vector<double> grad;
};

inline SampleStep sample_step(const TwoHeadedModel& model, const PreparedSample& s, const TrainConfig& cfg,
                              int epoch) {
  const auto acts = forward(model, s.image);
  const int h = s.image.height(), w = s.image.width();
  const auto gsched = geometry_schedule(cfg, h, w);
  const auto nsched = noise_schedule(cfg, h, w);

  // Empty fields are only left unset for terms that are switched off.
  const BoundaryMap& b = s.boundary.empty() ? BoundaryMap(h, w, 1, 0.0) : s.boundary;
  const SignedDistanceField& gs =
      s.geometry_sdf.empty() ? SignedDistanceField(h, w, kGeometryClasses, 0.0) : s.geometry_sdf;
  const SignedDistanceField& ns = s.lash_sdf.empty() ? SignedDistanceField(h, w, kNoiseClasses, 0.0) : s.lash_sdf;

  LossValue geo;
  ProbGrad geo_grad;
  if (cfg.prior.mode == PriorMode::trained && epoch >= prior_start_epoch(cfg)) {
    const auto [projected, route] = convex_project_probs(acts.geometry, cfg.prior);
    geo = geometry_loss(projected, s.geometry_one_hot, b, gs, s.geometry_weights, epoch, gsched, cfg.eps);
    geo_grad = route_gradient(route, geo.grad);
  } else {
    geo = geometry_loss(acts.geometry, s.geometry_one_hot, b, gs, s.geometry_weights, epoch, gsched, cfg.eps);
    geo_grad = std::move(geo.grad);
  }
  const auto noise = noise_loss(acts.noise, s.lash_one_hot, ns, s.lash_weights, epoch, nsched, cfg.eps);

  SampleStep out{total_loss(geo, noise, gsched), {}};
  out.grad = backward(model, acts, geo_grad, noise.grad, cfg.lambda_noise);
  return out;
}

struct EvaluationRow {
  SegmentationScores geometry;
  double noise_iou = 0.0;  // IoU of the lash class; 1 when absent from both
  std::optional<double> ic_rate;
};

struct Evaluation {
  std::vector<EvaluationRow> rows;
  ConfusionMatrix geometry_confusion{kGeometryClasses};
  ConfusionMatrix noise_confusion{kNoiseClasses};
  SegmentationScores geometry;  // from the summed confusion matrix
  double noise_iou = 0.0;
  std::optional<double> mean_ic_rate;  // over images with a defined ICRate
};

struct Prediction {
  LabelMask geometry;
  BinaryMask lashes;
};

/// Hard predictions; with a convex prior (plugin or trained) the geometry is convexified.
inline Prediction predict(const TwoHeadedModel& model, const Image& image, const ConvexPriorConfig& prior = {}) {
  const auto acts = forward(model, image);
  auto geo = argmax_labels(acts.geometry);
  if (prior.mode != PriorMode::off) geo = convexify_labels(geo, prior);
  const auto lash_labels = argmax_labels(acts.noise);
  BinaryMask lashes(image.height(), image.width());
  for (std::size_t n = 0; n < lashes.size(); ++n) lashes.values()[n] = lash_labels.values()[n];
  return {std::move(geo), std::move(lashes)};
}

/// Scores one predicted pair against the truth.
inline EvaluationRow score_prediction(const Prediction& pred, const LabelMask& geometry, const BinaryMask& lashes,
                                      ConfusionMatrix* geo_sum = nullptr, ConfusionMatrix* noise_sum = nullptr) {
  const auto gcm = confusion(pred.geometry, geometry, kGeometryClasses);
  const auto ncm = confusion(to_labels(pred.lashes), to_labels(lashes), kNoiseClasses);
  if (geo_sum) *geo_sum += gcm;
  if (noise_sum) *noise_sum += ncm;
  return {metrics_from_confusion(gcm), class_iou(ncm, 1).value_or(1.0), ic_rate(pred.geometry)};
}

inline Evaluation summarize(std::vector<EvaluationRow> rows, const ConfusionMatrix& gcm, const ConfusionMatrix& ncm) {
  Evaluation ev;
  ev.rows = std::move(rows);
  ev.geometry_confusion = gcm;
  ev.noise_confusion = ncm;
  if (gcm.total() > 0) ev.geometry = metrics_from_confusion(gcm);
  ev.noise_iou = class_iou(ncm, 1).value_or(1.0);
  double sum = 0.0;
  int n = 0;
  for (const auto& r : ev.rows)
    if (r.ic_rate) {
      sum += *r.ic_rate;
      ++n;
    }
  if (n > 0) ev.mean_ic_rate = sum / n;
  return ev;
}

inline Evaluation evaluate(const TwoHeadedModel& model, const std::vector<EyeSample>& samples,
                           const ConvexPriorConfig& prior = {}) {
  ConfusionMatrix gcm(kGeometryClasses), ncm(kNoiseClasses);
  std::vector<EvaluationRow> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(score_prediction(predict(model, s.image, prior), s.geometry, s.lashes, &gcm, &ncm));
  return summarize(std::move(rows), gcm, ncm);
}

struct EpochLog {
  int epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double lambda_s = 0.0;
  double train_loss = 0.0;
  double val_miou = 0.0;
  double val_noise_iou = 0.0;
  std::optional<double> val_ic_rate;
};

struct TrainResult {
  TwoHeadedModel model;
  std::vector<EpochLog> log;
};

/// Mini-batch Adam with polynomial learning-rate decay. Epoch e (0-based) uses
/// lambda_S = e / epochs and lr = lr0 * (1 - e / epochs)^power. Batch gradients
/// are averaged; per-sample gradients are reduced in sample order, so results
/// do not depend on the thread count.
inline TrainResult train(const TrainConfig& cfg, const std::vector<EyeSample>& train_set,
                         const std::vector<EyeSample>& val_set) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (cfg.epochs < 1 || cfg.batch < 1) throw ParameterError("train: epochs and batch must be >= 1");
  if (cfg.lr0 < 0.0) throw ParameterError("train: negative learning rate");
  if (!(cfg.prior_warmup >= 0.0 && cfg.prior_warmup < 1.0)) throw ParameterError("train: prior warm-up must be in [0, 1)");

  TrainResult result{TwoHeadedModel::initialized(cfg.channels, derive_seed(cfg.seed, 0x1a17)), {}};
  auto& model = result.model;
  AdamOptimizer adam(model.parameter_count());
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5bf1));

  std::vector<PreparedSample> prepared;
  if (!cfg.augment) {
    prepared.reserve(train_set.size());
    for (const auto& s : train_set) prepared.push_back(prepare_sample(s, cfg));
  }
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;

  const int threads = std::max(1, cfg.threads);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t n = order.size(); n > 1; --n)
      std::swap(order[n - 1], order[static_cast<std::size_t>(shuffle_rng.next() % n)]);
    if (cfg.augment) {
      prepared.clear();
      for (std::size_t n = 0; n < train_set.size(); ++n) {
        const auto& s = train_set[n];
        const auto ops = random_augmentation(derive_seed(cfg.seed, 0xa06, epoch * train_set.size() + n),
                                             s.image.height(), s.image.width(), size_preserving_kinds());
        prepared.push_back(prepare_sample(augment(s, ops), cfg));
      }
    }

    const double lr = poly_learning_rate(cfg.lr0, epoch, cfg.epochs, cfg.poly_power);
    double loss_sum = 0.0;
    std::vector<double> grad(model.parameter_count());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<SampleStep> steps(end - start);
      auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t t = first; t < steps.size(); t += stride)
          steps[t] = sample_step(model, prepared[order[start + t]], cfg, epoch);
      };
      if (threads == 1 || steps.size() == 1) {
        work(0, 1);
      } else {
        std::vector<std::thread> pool;
        const auto nt = std::min<std::size_t>(threads, steps.size());
        std::vector<std::exception_ptr> failures(nt);
        for (std::size_t t = 0; t < nt; ++t)
          pool.emplace_back([&, t, nt] {
            try {
              work(t, nt);
            } catch (...) {
              failures[t] = std::current_exception();
            }
          });
        for (auto& th : pool) th.join();
        for (const auto& f : failures)
          if (f) std::rethrow_exception(f);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const auto& st : steps) {
        loss_sum += st.loss;
        for (std::size_t n = 0; n < grad.size(); ++n) grad[n] += st.grad[n];
      }
      for (auto& g : grad) g /= static_cast<double>(steps.size());
      adam.step(model.parameters(), grad, lr);
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.learning_rate = lr;
    entry.lambda_s = lambda_s(epoch, cfg.epochs);
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val_set.empty()) {
      const ConvexPriorConfig eval_prior = cfg.prior;
      const auto ev = evaluate(model, val_set, eval_prior);
      entry.val_miou = ev.geometry.mean_iou;
      entry.val_noise_iou = ev.noise_iou;
      entry.val_ic_rate = ev.mean_ic_rate;
    }
    result.log.push_back(entry);
  }
  return result;
}

/// Deterministic synthetic split: sample n of `stream` uses seed derive_seed(seed, stream, n).
inline std::vector<EyeSample> synthetic_set(std::uint64_t seed, std::uint64_t stream, int count, int size) {
  std::vector<EyeSample> out;
  out.reserve(count);
  for (int n = 0; n < count; ++n) out.push_back(generate_eye(derive_seed(seed, stream, n), size));
  return out;
}

inline constexpr std::uint64_t kTrainStream = 0x7124;
inline constexpr std::uint64_t kValidationStream = 0x7a11;

}  // namespace irisseg
