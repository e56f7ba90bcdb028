#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "irisseg/grid.hpp"
#include "irisseg/io.hpp"
#include "irisseg/rng.hpp"

namespace irisseg {

/// Offsets of each parameter block inside the flat parameter vector, in
/// declaration order. Conv weights are laid out [ky][kx][in][out], head
/// weights [in][out].
struct ParameterLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, geo_w, geo_b, noise_w, noise_b, total;

  friend bool operator==(const ParameterLayout&, const ParameterLayout&) = default;

  static ParameterLayout for_channels(int c) {
    ParameterLayout l{};
    std::size_t at = 0;
    auto take = [&](std::size_t n) {
      const auto start = at;
      at += n;
      return start;
    };
    const std::size_t cc = static_cast<std::size_t>(c);
    l.conv1_w = take(9 * cc);
    l.conv1_b = take(cc);
    l.conv2_w = take(9 * cc * cc);
    l.conv2_b = take(cc);
    l.geo_w = take(cc * kGeometryClasses);
    l.geo_b = take(kGeometryClasses);
    l.noise_w = take(cc * kNoiseClasses);
    l.noise_b = take(kNoiseClasses);
    l.total = at;
    return l;
  }
};

/// Shared two-layer 3x3 conv encoder (same padding, ReLU) feeding a 4-class
/// geometry head and a 2-class noise head, both 1x1 conv + softmax.
class TwoHeadedModel {
 public:
  explicit TwoHeadedModel(int channels = 16)
      : channels_(channels), layout_(ParameterLayout::for_channels(channels)), params_(layout_.total, 0.0) {
    if (channels < 1) throw ParameterError("model needs at least one channel");
  }

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static TwoHeadedModel initialized(int channels, std::uint64_t seed) {
    TwoHeadedModel m(channels);
    Rng rng(seed);
    auto fill = [&](std::size_t offset, std::size_t count, double fan_in) {
      const double a = 1.0 / std::sqrt(fan_in);
      for (std::size_t n = 0; n < count; ++n) m.params_[offset + n] = rng.uniform(-a, a);
    };
    const auto& l = m.layout_;
    fill(l.conv1_w, l.conv1_b - l.conv1_w, 9.0);
    fill(l.conv2_w, l.conv2_b - l.conv2_w, 9.0 * channels);
    fill(l.geo_w, l.geo_b - l.geo_w, channels);
    fill(l.noise_w, l.noise_b - l.noise_w, channels);
    return m;
  }

  int channels() const { return channels_; }
  const ParameterLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  friend bool operator==(const TwoHeadedModel&, const TwoHeadedModel&) = default;

 private:
  int channels_;
  ParameterLayout layout_;
  std::vector<double> params_;
};

/// Everything forward() computes; backward() needs it.
struct Activations {
  Image input;
  std::vector<double> hidden1;  // H*W*C after ReLU
  std::vector<double> hidden2;  // H*W*C after ReLU, shared by both heads
  ProbMap geometry;
  ProbMap noise;

  bool valid() const { return !input.empty() && !geometry.empty() && !noise.empty(); }
};

namespace detail {

// Kernels are instantiated for common channel counts so the per-pixel output
// vector stays in registers; Cout == 0 is the generic fallback.
template <int Cout>
void conv3x3_impl(std::span<const double> in, int h, int w, int cin, int cout_rt, const double* weights,
                  const double* bias, std::span<double> out) {
  const int cout = Cout > 0 ? Cout : cout_rt;
  std::vector<double> dynamic_acc(Cout > 0 ? 0 : cout);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double fixed_acc[Cout > 0 ? Cout : 1];
      double* __restrict a = Cout > 0 ? fixed_acc : dynamic_acc.data();
      for (int o = 0; o < cout; ++o) a[o] = bias[o];
      for (int dy = 0; dy < 3; ++dy) {
        const int ii = i + dy - 1;
        if (ii < 0 || ii >= h) continue;
        for (int dx = 0; dx < 3; ++dx) {
          const int jj = j + dx - 1;
          if (jj < 0 || jj >= w) continue;
          const double* x = &in[(static_cast<std::size_t>(ii) * w + jj) * cin];
          const double* wk = weights + static_cast<std::size_t>(dy * 3 + dx) * cin * cout;
          for (int c = 0; c < cin; ++c) {
            const double xc = x[c];
            if (xc == 0.0) continue;
            const double* __restrict wr = wk + static_cast<std::size_t>(c) * cout;
            for (int o = 0; o < cout; ++o) a[o] += xc * wr[o];
          }
        }
      }
      std::copy(a, a + cout, &out[(static_cast<std::size_t>(i) * w + j) * cout]);
    }
  }
}

inline void conv3x3(std::span<const double> in, int h, int w, int cin, int cout, const double* weights,
                    const double* bias, std::span<double> out) {
  switch (cout) {
    case 8: return conv3x3_impl<8>(in, h, w, cin, cout, weights, bias, out);
    case 16: return conv3x3_impl<16>(in, h, w, cin, cout, weights, bias, out);
    case 32: return conv3x3_impl<32>(in, h, w, cin, cout, weights, bias, out);
    default: return conv3x3_impl<0>(in, h, w, cin, cout, weights, bias, out);
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient of a 3x3 conv.
template <int Cout>
void conv3x3_backward_impl(std::span<const double> in, int h, int w, int cin, int cout_rt, const double* weights,
                           std::span<const double> grad_out, double* grad_w, double* grad_b,
                           std::span<double> grad_in) {
  const int cout = Cout > 0 ? Cout : cout_rt;
  const bool want_input = !grad_in.empty();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double* g = &grad_out[(static_cast<std::size_t>(i) * w + j) * cout];
      bool any = false;
      for (int o = 0; o < cout; ++o) {
        grad_b[o] += g[o];
        any = any || g[o] != 0.0;
      }
      if (!any) continue;
      for (int dy = 0; dy < 3; ++dy) {
        const int ii = i + dy - 1;
        if (ii < 0 || ii >= h) continue;
        for (int dx = 0; dx < 3; ++dx) {
          const int jj = j + dx - 1;
          if (jj < 0 || jj >= w) continue;
          const std::size_t at = (static_cast<std::size_t>(ii) * w + jj) * cin;
          const double* x = &in[at];
          const std::size_t koff = static_cast<std::size_t>(dy * 3 + dx) * cin * cout;
          for (int c = 0; c < cin; ++c) {
            double* gw = grad_w + koff + static_cast<std::size_t>(c) * cout;
            const double xc = x[c];
            for (int o = 0; o < cout; ++o) gw[o] += xc * g[o];
            if (want_input) {
              const double* wr = weights + koff + static_cast<std::size_t>(c) * cout;
              double acc = 0.0;
              for (int o = 0; o < cout; ++o) acc += wr[o] * g[o];
              grad_in[at + c] += acc;
            }
          }
        }
      }
    }
  }
}

inline void conv3x3_backward(std::span<const double> in, int h, int w, int cin, int cout, const double* weights,
                             std::span<const double> grad_out, double* grad_w, double* grad_b,
                             std::span<double> grad_in) {
  switch (cout) {
    case 8: return conv3x3_backward_impl<8>(in, h, w, cin, cout, weights, grad_out, grad_w, grad_b, grad_in);
    case 16: return conv3x3_backward_impl<16>(in, h, w, cin, cout, weights, grad_out, grad_w, grad_b, grad_in);
    case 32: return conv3x3_backward_impl<32>(in, h, w, cin, cout, weights, grad_out, grad_w, grad_b, grad_in);
    default: return conv3x3_backward_impl<0>(in, h, w, cin, cout, weights, grad_out, grad_w, grad_b, grad_in);
  }
}

inline void softmax_head(std::span<const double> features, int c, const double* weights, const double* bias,
                         ProbMap& out) {
  const int k = out.channels();
  std::vector<double> logit(k);
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      const double* f = &features[(static_cast<std::size_t>(i) * out.width() + j) * c];
      std::copy(bias, bias + k, logit.begin());
      for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < k; ++t) logit[t] += f[ch] * weights[ch * k + t];
      const double m = *std::max_element(logit.begin(), logit.end());
      double sum = 0.0;
      for (auto& v : logit) sum += (v = std::exp(v - m));
      auto px = out.pixel(i, j);
      for (int t = 0; t < k; ++t) px[t] = logit[t] / sum;
    }
  }
}

// Backprop of a softmax head given dL/dp; accumulates head parameter grads and dL/dfeatures.
inline void softmax_head_backward(std::span<const double> features, int c, const double* weights,
                                  const ProbMap& probs, const ProbGrad& grad_p, double scale, double* grad_w,
                                  double* grad_b, std::span<double> grad_features) {
  const int k = probs.channels();
  std::vector<double> gl(k);
  for (int i = 0; i < probs.height(); ++i) {
    for (int j = 0; j < probs.width(); ++j) {
      const auto p = probs.pixel(i, j);
      const auto g = grad_p.pixel(i, j);
      double dot = 0.0;
      for (int t = 0; t < k; ++t) dot += p[t] * g[t];
      bool any = false;
      for (int t = 0; t < k; ++t) {
        gl[t] = scale * p[t] * (g[t] - dot);
        any = any || gl[t] != 0.0;
      }
      if (!any) continue;
      const std::size_t at = (static_cast<std::size_t>(i) * probs.width() + j) * c;
      const double* f = &features[at];
      for (int t = 0; t < k; ++t) grad_b[t] += gl[t];
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t) {
          grad_w[ch * k + t] += f[ch] * gl[t];
          acc += weights[ch * k + t] * gl[t];
        }
        grad_features[at + ch] += acc;
      }
    }
  }
}

}  // namespace detail

inline Activations forward(const TwoHeadedModel& model, const Image& image) {
  for (double v : image.values())
    if (!std::isfinite(v)) throw NumericInputError("forward: image contains non-finite values");
  if (image.channels() != 1) throw DimensionError("forward: expected a single-channel image");
  const int h = image.height(), w = image.width(), c = model.channels();
  const auto& l = model.layout();
  const auto p = model.parameters();
  const std::size_t n = static_cast<std::size_t>(h) * w * c;

  Activations a{image, std::vector<double>(n), std::vector<double>(n), ProbMap(h, w, kGeometryClasses),
                ProbMap(h, w, kNoiseClasses)};
  detail::conv3x3(image.values(), h, w, 1, c, &p[l.conv1_w], &p[l.conv1_b], a.hidden1);
  for (auto& v : a.hidden1) v = std::max(v, 0.0);
  detail::conv3x3(a.hidden1, h, w, c, c, &p[l.conv2_w], &p[l.conv2_b], a.hidden2);
  for (auto& v : a.hidden2) v = std::max(v, 0.0);
  detail::softmax_head(a.hidden2, c, &p[l.geo_w], &p[l.geo_b], a.geometry);
  detail::softmax_head(a.hidden2, c, &p[l.noise_w], &p[l.noise_b], a.noise);
  return a;
}

/// Adds d(L_geo + lambda_noise * L_noise)/d(params) to `grad`, given the loss
/// gradients with respect to both heads' probabilities.
inline void backward(const TwoHeadedModel& model, const Activations& acts, const ProbGrad& geo_grad,
                     const ProbGrad& noise_grad, double lambda_noise, std::span<double> grad) {
  if (!acts.valid()) throw StateError("backward called without a forward pass");
  require_same_shape(acts.geometry, geo_grad, "backward (geometry)");
  require_same_shape(acts.noise, noise_grad, "backward (noise)");
  if (grad.size() != model.parameter_count()) throw DimensionError("backward: gradient buffer size mismatch");

  const int h = acts.input.height(), w = acts.input.width(), c = model.channels();
  const auto& l = model.layout();
  const auto p = model.parameters();
  const std::size_t n = static_cast<std::size_t>(h) * w * c;

  std::vector<double> g2(n, 0.0);
  detail::softmax_head_backward(acts.hidden2, c, &p[l.geo_w], acts.geometry, geo_grad, 1.0, &grad[l.geo_w],
                                &grad[l.geo_b], g2);
  if (lambda_noise != 0.0)
    detail::softmax_head_backward(acts.hidden2, c, &p[l.noise_w], acts.noise, noise_grad, lambda_noise,
                                  &grad[l.noise_w], &grad[l.noise_b], g2);
  for (std::size_t t = 0; t < n; ++t)
    if (acts.hidden2[t] <= 0.0) g2[t] = 0.0;

  // Input gradient of conv2 is a forward conv of g2 with the flipped, transposed kernel.
  std::vector<double> flipped(9 * static_cast<std::size_t>(c) * c);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      for (int ci = 0; ci < c; ++ci)
        for (int o = 0; o < c; ++o)
          flipped[((static_cast<std::size_t>(2 - ky) * 3 + (2 - kx)) * c + o) * c + ci] =
              p[l.conv2_w + ((static_cast<std::size_t>(ky) * 3 + kx) * c + ci) * c + o];
  const std::vector<double> zero_bias(c, 0.0);
  std::vector<double> g1(n, 0.0);
  detail::conv3x3(g2, h, w, c, c, flipped.data(), zero_bias.data(), g1);
  detail::conv3x3_backward(acts.hidden1, h, w, c, c, &p[l.conv2_w], g2, &grad[l.conv2_w], &grad[l.conv2_b], {});
  for (std::size_t t = 0; t < n; ++t)
    if (acts.hidden1[t] <= 0.0) g1[t] = 0.0;
  detail::conv3x3_backward(acts.input.values(), h, w, 1, c, &p[l.conv1_w], g1, &grad[l.conv1_w],
                           &grad[l.conv1_b], {});
}

inline std::vector<double> backward(const TwoHeadedModel& model, const Activations& acts, const ProbGrad& geo_grad,
                                    const ProbGrad& noise_grad, double lambda_noise) {
  std::vector<double> g(model.parameter_count(), 0.0);
  backward(model, acts, geo_grad, noise_grad, lambda_noise, g);
  return g;
}

/// lr0 * (1 - epoch / epochs)^power.
inline double poly_learning_rate(double lr0, int epoch, int epochs, double power) {
  if (epochs < 1 || epoch < 0 || epoch > epochs) throw ScheduleError("poly_learning_rate: epoch out of range");
  return lr0 * std::pow(1.0 - static_cast<double>(epoch) / epochs, power);
}

/// Adaptive moment estimation with bias correction.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionError("adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t n = 0; n < params.size(); ++n) {
      m_[n] = beta1_ * m_[n] + (1.0 - beta1_) * grad[n];
      v_[n] = beta2_ * v_[n] + (1.0 - beta2_) * grad[n] * grad[n];
      params[n] -= lr * (m_[n] / c1) / (std::sqrt(v_[n] / c2) + eps_);
    }
  }

  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// ---------------------------------------------------------------------------
// THM1 checkpoint: "THM1", u32 input channels, hidden channels, kernel size,
// geometry classes, noise classes, parameter count (LE), then f32 LE params.

inline std::vector<std::uint8_t> encode_checkpoint(const TwoHeadedModel& m) {
  std::vector<std::uint8_t> out = {'T', 'H', 'M', '1'};
  for (std::uint32_t v : {1u, static_cast<std::uint32_t>(m.channels()), 3u, std::uint32_t(kGeometryClasses),
                          std::uint32_t(kNoiseClasses), static_cast<std::uint32_t>(m.parameter_count())})
    io::put_u32(out, v);
  for (double v : m.parameters()) io::put_f32(out, v);
  return out;
}

inline TwoHeadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 28 || bytes[0] != 'T' || bytes[1] != 'H' || bytes[2] != 'M' || bytes[3] != '1')
    throw FormatError("THM1: bad magic or truncated header");
  std::uint32_t dims[6];
  for (int n = 0; n < 6; ++n) dims[n] = io::get_u32(&bytes[4 + 4 * n]);
  if (dims[0] != 1 || dims[2] != 3 || dims[3] != kGeometryClasses || dims[4] != kNoiseClasses || dims[1] == 0 ||
      dims[1] > 4096)
    throw FormatError("THM1: unsupported layer dimensions");
  TwoHeadedModel m(static_cast<int>(dims[1]));
  if (dims[5] != m.parameter_count() || bytes.size() - 28 != std::size_t(dims[5]) * 4)
    throw FormatError("THM1: parameter count does not match payload");
  auto p = m.parameters();
  for (std::size_t n = 0; n < p.size(); ++n) p[n] = io::get_f32(&bytes[28 + 4 * n]);
  return m;
}

inline void store_checkpoint(const std::filesystem::path& path, const TwoHeadedModel& m) {
  io::write_bytes(path, encode_checkpoint(m));
}

inline TwoHeadedModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_bytes(path));
}

}  // namespace irisseg
