#pragma once
/*
 * Finite-difference check of the total-loss input gradient.
 *
 * The analytic gradient is the production f32 path. The numeric side is a
 * central difference of the total loss evaluated entirely in double, so
 * forward-pass rounding does not swamp the difference quotient.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "steel/runner.hpp"
#include "steel/style_loss.hpp"
#include "steel/vgg.hpp"
#include "steel/weights_io.hpp"

namespace steel {

struct GradcheckOptions {
  std::size_t image_size = 32;
  std::size_t samples = 20;
  double step = 1e-2;
  double pixel_range = 120.0;  // images drawn uniformly from [-range, range]
  std::uint64_t seed = 1234;
};

struct GradSample {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradSample> samples;
  double max_rel_error = 0.0;
};

// |a - n| / max(|a|, |n|), zero when both vanish.
inline double relative_error(double a, double n) {
  const double d = std::max(std::abs(a), std::abs(n));
  return d == 0.0 ? 0.0 : std::abs(a - n) / d;
}

template <typename T>
BasicTensor4<T> random_tensor(Shape4 shape, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  BasicTensor4<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

// Central differences of f at the given flat indices of x.
inline std::vector<double> central_differences(const std::function<double(const BasicTensor4<double>&)>& f,
                                               BasicTensor4<double> x, const std::vector<std::size_t>& indices,
                                               double step) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    out.push_back((up - down) / (2.0 * step));
  }
  return out;
}

inline std::vector<std::size_t> sample_indices(std::size_t count, std::size_t samples, std::mt19937_64& rng) {
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(samples, count));
  std::sort(all.begin(), all.end());
  return all;
}

inline GradcheckReport gradcheck_total_loss(const VggWeights& weights, const StyleConfig& cfg,
                                            const GradcheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  const Shape4 shape{1, 3, opt.image_size, opt.image_size};
  // Drawn in f32 so both paths see exactly the same pixels.
  const auto image = random_tensor<float>(shape, opt.pixel_range, rng).cast<double>();
  const auto style = random_tensor<float>(shape, opt.pixel_range, rng).cast<double>();
  const auto content = random_tensor<float>(shape, opt.pixel_range, rng).cast<double>();

  const auto wd = weights.cast<double>();
  const auto targets_d = compute_targets(wd, content, style, cfg);
  const auto layers = cfg.required_layers();

  // Analytic f32 gradient against the same (rounded) targets.
  StyleTargets targets_f;
  for (const auto& [id, t] : targets_d.style) targets_f.emplace(id, LayerStyleTarget<float>{t.gram.cast<float>(), t.dims});
  const ContentTarget content_f{targets_d.content.layer, targets_d.content.features.cast<float>()};
  const auto image_f = image.cast<float>();
  auto feats = forward_features(weights, image_f, layers);
  const auto loss = total_loss(feats.activations, targets_f, content_f, cfg);
  const auto grad = backward_to_input(weights, feats.tape, loss.grads);

  const auto f = [&](const BasicTensor4<double>& x) {
    auto fx = forward_features(wd, x, layers);
    return total_loss(fx.activations, targets_d.style, targets_d.content, cfg).breakdown.total;
  };
  const auto indices = sample_indices(shape.count(), opt.samples, rng);
  const auto numeric = central_differences(f, image, indices, opt.step);

  GradcheckReport report;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    GradSample s{indices[k], static_cast<double>(grad[indices[k]]), numeric[k], 0.0};
    s.rel_error = relative_error(s.analytic, s.numeric);
    report.max_rel_error = std::max(report.max_rel_error, s.rel_error);
    report.samples.push_back(s);
  }
  return report;
}

}  // namespace steel
