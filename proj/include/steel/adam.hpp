#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "steel/error.hpp"
#include "steel/tensor.hpp"

namespace steel {

struct AdamSettings {
  double lr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Coupled L2 penalty on pixels: grad += weight_decay * image.
  double weight_decay = 1e-3;

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("optimizer.lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ValidationError("optimizer.beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("optimizer.beta2 must lie in (0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("optimizer.eps must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
      throw ValidationError("optimizer.weight_decay must be non-negative");
    }
  }
};

// Adam with bias correction, updating an image in place.
template <typename T>
class BasicAdam {
 public:
  BasicAdam(AdamSettings settings, Shape4 shape) : settings_(settings), m_(shape), v_(shape) { settings_.validate(); }

  void step(BasicTensor4<T>& image, const BasicTensor4<T>& grad) {
    detail::require_same(image.shape(), m_.shape(), "adam image");
    detail::require_same(grad.shape(), m_.shape(), "adam grad");
    if (!all_finite(grad.data())) throw NumericError("adam: non-finite gradient");

    ++t_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < image.size(); ++i) {
      const double x = static_cast<double>(image[i]);
      const double g = static_cast<double>(grad[i]) + settings_.weight_decay * x;
      const double m = b1 * static_cast<double>(m_[i]) + (1.0 - b1) * g;
      const double v = b2 * static_cast<double>(v_[i]) + (1.0 - b2) * g * g;
      m_[i] = static_cast<T>(m);
      v_[i] = static_cast<T>(v);
      image[i] = static_cast<T>(x - settings_.lr * (m / c1) / (std::sqrt(v / c2) + settings_.eps));
    }
  }

  const AdamSettings& settings() const { return settings_; }
  std::int64_t steps() const { return t_; }
  const BasicTensor4<T>& first_moment() const { return m_; }
  const BasicTensor4<T>& second_moment() const { return v_; }

 private:
  AdamSettings settings_;
  BasicTensor4<T> m_;
  BasicTensor4<T> v_;
  std::int64_t t_ = 0;
};

using Adam = BasicAdam<float>;

}  // namespace steel
