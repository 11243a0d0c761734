#pragma once
/*
 * Style and content losses over pre-ReLU VGG features.
 *
 *   total    = content_weight * L_content + style_weight * sum_l c_l * E_l
 *   E_l      = 1 / (4 H^2 W^2) * sum_ij (A_ij - G_ij)^2,   G = F F^T
 *   L_content = mean((F - P)^2)
 *
 * Only layers with c_l > 0 ("active" layers) are evaluated at all.
 */

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "steel/error.hpp"
#include "steel/layer_id.hpp"
#include "steel/tensor.hpp"

namespace steel {

struct StyleConfig {
  std::map<LayerId, double> coefficients;
  LayerId content_layer{4, 2};
  double content_weight = 1.0;
  double style_weight = 1.0;

  double coefficient(LayerId id) const {
    auto it = coefficients.find(id);
    return it == coefficients.end() ? 0.0 : it->second;
  }

  std::vector<LayerId> active_layers() const {
    std::vector<LayerId> out;
    for (const auto& [id, c] : coefficients)
      if (c > 0.0) out.push_back(id);
    return out;
  }

  // Layers a forward pass must reach: active style layers plus the content layer.
  std::set<LayerId> required_layers() const {
    auto active = active_layers();
    std::set<LayerId> out(active.begin(), active.end());
    out.insert(content_layer);
    return out;
  }

  void validate() const {
    for (const auto& [id, c] : coefficients) {
      if (!(c >= 0.0) || !std::isfinite(c)) {
        throw ValidationError("coefficient for " + id.str() + " must be finite and non-negative");
      }
    }
    if (!std::isfinite(content_weight) || content_weight < 0.0) {
      throw ValidationError("content_weight must be finite and non-negative");
    }
    if (!std::isfinite(style_weight) || style_weight < 0.0) {
      throw ValidationError("style_weight must be finite and non-negative");
    }
  }
};

template <typename T>
struct LayerStyleTarget {
  BasicMatrix<T> gram;  // A: the style image's Gram matrix
  Shape4 dims;          // feature-map dims at this layer
};

template <typename T>
using BasicStyleTargets = std::map<LayerId, LayerStyleTarget<T>>;

template <typename T>
struct BasicContentTarget {
  LayerId layer{4, 2};
  BasicTensor4<T> features;  // P
};

using StyleTargets = BasicStyleTargets<float>;
using ContentTarget = BasicContentTarget<float>;

template <typename T>
BasicMatrix<T> gram(const BasicTensor4<T>& features) {
  if (features.n() != 1) throw ShapeError("gram requires batch size 1, got " + std::to_string(features.n()));
  return matmul_transposed(reshape_to_matrix(features));
}

template <typename T>
double style_layer_loss(const BasicMatrix<T>& target, const BasicMatrix<T>& current, std::size_t h, std::size_t w) {
  if (target.rows() != current.rows() || target.cols() != current.cols() || target.rows() != target.cols()) {
    throw ShapeError("style_layer_loss: Gram dims " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + " vs " + std::to_string(current.rows()) + "x" +
                     std::to_string(current.cols()));
  }
  double acc = 0.0;
  auto a = target.data();
  auto g = current.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(g[i]);
    acc += d * d;
  }
  const double hw = static_cast<double>(h) * static_cast<double>(w);
  return acc / (4.0 * hw * hw);
}

// dE/dF = (G - A) F / (H^2 W^2), with F the C x HW feature matrix.
template <typename T>
BasicTensor4<T> style_layer_grad(const BasicMatrix<T>& target, const BasicTensor4<T>& features) {
  if (features.n() != 1) throw ShapeError("style_layer_grad requires batch size 1");
  if (target.rows() != features.c() || target.cols() != features.c()) {
    throw ShapeError("style_layer_grad: Gram is " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + " but features have " + std::to_string(features.c()) +
                     " channels");
  }
  const std::size_t C = features.c(), HW = features.h() * features.w();
  const auto F = detail::to_double(features.data(), C, HW);
  // G rounded to T exactly as in the loss, so the gradient vanishes when A == G.
  const auto G = gram(features);
  detail::RowMajorXd diff(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(C));
  for (std::size_t i = 0; i < C * C; ++i) {
    diff.data()[i] = static_cast<double>(G.data()[i]) - static_cast<double>(target.data()[i]);
  }
  const double hw = static_cast<double>(HW);
  detail::RowMajorXd grad = diff * F;
  grad /= hw * hw;
  BasicTensor4<T> out(features.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(grad.data()[i]);
  return out;
}

template <typename T>
struct ContentLoss {
  double loss = 0.0;
  BasicTensor4<T> grad;
};

template <typename T>
ContentLoss<T> content_loss_and_grad(const BasicTensor4<T>& features, const BasicContentTarget<T>& target) {
  detail::require_same(features.shape(), target.features.shape(), "content_loss_and_grad");
  const double N = static_cast<double>(features.size());
  ContentLoss<T> r{0.0, BasicTensor4<T>(features.shape())};
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double d = static_cast<double>(features[i]) - static_cast<double>(target.features[i]);
    r.loss += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / N);
  }
  r.loss /= N;
  return r;
}

struct LayerLoss {
  LayerId layer;
  double raw = 0.0;       // E_l
  double weighted = 0.0;  // c_l * E_l
};

struct LossBreakdown {
  double total = 0.0;
  double content = 0.0;              // L_content, before content_weight
  std::vector<LayerLoss> style;      // active layers, architectural order

  double style_weighted_sum() const {
    double s = 0.0;
    for (const auto& l : style) s += l.weighted;
    return s;
  }
};

template <typename T>
struct TotalLoss {
  LossBreakdown breakdown;
  std::map<LayerId, BasicTensor4<T>> grads;  // seeds for backward_to_input
};

template <typename T>
TotalLoss<T> total_loss(const std::map<LayerId, BasicTensor4<T>>& acts, const BasicStyleTargets<T>& targets,
                        const BasicContentTarget<T>& content, const StyleConfig& cfg) {
  const auto find_act = [&](LayerId id) -> const BasicTensor4<T>& {
    auto it = acts.find(id);
    if (it == acts.end()) throw ValidationError("total_loss: missing activation for " + id.str());
    return it->second;
  };

  TotalLoss<T> r;
  const auto& cf = find_act(content.layer);
  auto cl = content_loss_and_grad(cf, content);
  r.breakdown.content = cl.loss;
  r.grads.emplace(content.layer, scale(cl.grad, cfg.content_weight));

  double style_sum = 0.0;
  for (const LayerId id : cfg.active_layers()) {
    const double c = cfg.coefficient(id);
    auto tt = targets.find(id);
    if (tt == targets.end()) throw ValidationError("total_loss: no style target for active layer " + id.str());
    const auto& f = find_act(id);
    const double e = style_layer_loss(tt->second.gram, gram(f), f.h(), f.w());
    r.breakdown.style.push_back({id, e, c * e});
    style_sum += c * e;

    auto g = style_layer_grad(tt->second.gram, f);
    const double k = cfg.style_weight * c;
    if (auto it = r.grads.find(id); it != r.grads.end()) {
      axpy(k, g, it->second);
    } else {
      r.grads.emplace(id, scale(g, k));
    }
  }
  r.breakdown.total = cfg.content_weight * r.breakdown.content + cfg.style_weight * style_sum;
  return r;
}

}  // namespace steel
