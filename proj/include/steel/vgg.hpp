#pragma once
/*
 * VGG16 convolutional trunk: forward pass to pre-ReLU features and
 * reverse-mode gradient with respect to the input image.
 *
 * Convolutions are 3x3, stride 1, zero padding 1; pools are 2x2, stride 2.
 * ReLU is applied between layers, but the features handed out are the conv
 * outputs before ReLU.
 */

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "steel/error.hpp"
#include "steel/layer_id.hpp"
#include "steel/tensor.hpp"
#include "steel/weights_io.hpp"

namespace steel {

namespace detail {

// im2col buffers are processed in row bands of at most this many doubles.
inline constexpr std::size_t kColumnBudget = std::size_t{1} << 21;

inline std::size_t band_rows(std::size_t taps, std::size_t h, std::size_t w) {
  return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(1, taps * w), 1, h);
}

template <typename T>
RowMajorXd kernel_matrix(const BasicTensor4<T>& kernel) {
  return to_double(kernel.data(), kernel.n(), kernel.c() * 9);
}

}  // namespace detail

template <typename T>
BasicTensor4<T> conv2d_forward(const BasicTensor4<T>& input, const BasicTensor4<T>& kernel, std::span<const T> bias) {
  if (kernel.h() != 3 || kernel.w() != 3) throw ShapeError("conv2d_forward: kernel must be 3x3");
  if (input.c() != kernel.c()) {
    throw ShapeError("conv2d_forward: input has " + std::to_string(input.c()) + " channels, kernel expects " +
                     std::to_string(kernel.c()));
  }
  if (bias.size() != kernel.n()) throw ShapeError("conv2d_forward: bias length does not match out channels");

  const std::size_t C = input.c(), H = input.h(), W = input.w(), O = kernel.n();
  const std::size_t taps = C * 9;
  const auto K = detail::kernel_matrix(kernel);
  BasicTensor4<T> out(Shape4{input.n(), O, H, W});
  const std::size_t band = detail::band_rows(taps, H, W);

  detail::RowMajorXd col, res;
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t y0 = 0; y0 < H; y0 += band) {
      const std::size_t rows = std::min(band, H - y0);
      const std::size_t L = rows * W;
      col.setZero(static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(L));
      for (std::size_t c = 0; c < C; ++c) {
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) {
            double* dst = col.data() + (c * 9 + static_cast<std::size_t>(dy * 3 + dx)) * L;
            for (std::size_t r = 0; r < rows; ++r) {
              const long sy = static_cast<long>(y0 + r) + dy - 1;
              if (sy < 0 || sy >= static_cast<long>(H)) continue;
              const T* src = &input.data()[input.index(n, c, static_cast<std::size_t>(sy), 0)];
              for (std::size_t x = 0; x < W; ++x) {
                const long sx = static_cast<long>(x) + dx - 1;
                if (sx >= 0 && sx < static_cast<long>(W)) dst[r * W + x] = static_cast<double>(src[sx]);
              }
            }
          }
        }
      }
      res.noalias() = K * col;
      for (std::size_t o = 0; o < O; ++o) {
        T* dst = &out.data()[out.index(n, o, y0, 0)];
        const double b = static_cast<double>(bias[o]);
        const double* src = res.data() + o * L;
        for (std::size_t k = 0; k < L; ++k) dst[k] = static_cast<T>(src[k] + b);
      }
    }
  }
  return out;
}

// Gradient of a conv2d_forward output with respect to its input.
template <typename T>
BasicTensor4<T> conv2d_backward_input(const BasicTensor4<T>& grad_out, const BasicTensor4<T>& kernel) {
  if (grad_out.c() != kernel.n()) throw ShapeError("conv2d_backward_input: channel mismatch");
  const std::size_t C = kernel.c(), H = grad_out.h(), W = grad_out.w(), O = kernel.n();
  const std::size_t taps = C * 9;
  const detail::RowMajorXd Kt = detail::kernel_matrix(kernel).transpose();
  BasicTensor4<T> grad_in(Shape4{grad_out.n(), C, H, W});
  const std::size_t band = detail::band_rows(taps, H, W);

  std::vector<double> acc(C * H * W);
  detail::RowMajorXd g, dcol;
  for (std::size_t n = 0; n < grad_out.n(); ++n) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t y0 = 0; y0 < H; y0 += band) {
      const std::size_t rows = std::min(band, H - y0);
      const std::size_t L = rows * W;
      g.resize(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(L));
      for (std::size_t o = 0; o < O; ++o) {
        const T* src = &grad_out.data()[grad_out.index(n, o, y0, 0)];
        std::copy(src, src + L, g.data() + o * L);
      }
      dcol.noalias() = Kt * g;
      for (std::size_t c = 0; c < C; ++c) {
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) {
            const double* src = dcol.data() + (c * 9 + static_cast<std::size_t>(dy * 3 + dx)) * L;
            for (std::size_t r = 0; r < rows; ++r) {
              const long sy = static_cast<long>(y0 + r) + dy - 1;
              if (sy < 0 || sy >= static_cast<long>(H)) continue;
              double* dst = &acc[(c * H + static_cast<std::size_t>(sy)) * W];
              for (std::size_t x = 0; x < W; ++x) {
                const long sx = static_cast<long>(x) + dx - 1;
                if (sx >= 0 && sx < static_cast<long>(W)) dst[sx] += src[r * W + x];
              }
            }
          }
        }
      }
    }
    T* dst = &grad_in.data()[grad_in.index(n, 0, 0, 0)];
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i]);
  }
  return grad_in;
}

template <typename T>
BasicTensor4<T> relu_forward(const BasicTensor4<T>& t) {
  BasicTensor4<T> out = t;
  for (auto& v : out.data()) v = std::max(v, T(0));
  return out;
}

// Passes grad where the pre-activation was strictly positive.
template <typename T>
BasicTensor4<T> relu_backward(const BasicTensor4<T>& pre, const BasicTensor4<T>& grad) {
  detail::require_same(pre.shape(), grad.shape(), "relu_backward");
  BasicTensor4<T> out(grad.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pre[i] > T(0) ? grad[i] : T(0);
  return out;
}

template <typename T>
struct PoolResult {
  BasicTensor4<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
  Shape4 input_shape;
};

// 2x2 stride-2 max pool. Odd trailing rows/columns are dropped; ties go to
// the first element in raster order.
template <typename T>
PoolResult<T> maxpool_forward(const BasicTensor4<T>& t) {
  const std::size_t oh = t.h() / 2, ow = t.w() / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool_forward: input " + t.shape().str() + " too small to pool");
  PoolResult<T> r{BasicTensor4<T>(Shape4{t.n(), t.c(), oh, ow}), {}, t.shape()};
  r.argmax.resize(r.output.size());
  std::size_t k = 0;
  for (std::size_t n = 0; n < t.n(); ++n)
    for (std::size_t c = 0; c < t.c(); ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x, ++k) {
          std::size_t best = t.index(n, c, 2 * y, 2 * x);
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = t.index(n, c, 2 * y + dy, 2 * x + dx);
              if (t[i] > t[best]) best = i;
            }
          r.output[k] = t[best];
          r.argmax[k] = best;
        }
  return r;
}

template <typename T>
BasicTensor4<T> maxpool_backward(const BasicTensor4<T>& grad, const std::vector<std::size_t>& argmax,
                                 const Shape4& input_shape) {
  if (argmax.size() != grad.size()) throw ShapeError("maxpool_backward: argmax/grad size mismatch");
  BasicTensor4<T> out(input_shape);
  for (std::size_t k = 0; k < grad.size(); ++k) out[argmax[k]] += grad[k];
  return out;
}

template <typename T>
struct ForwardTape {
  Shape4 input_shape;
  std::vector<LayerId> layers;                  // architectural order
  std::vector<BasicTensor4<T>> pre_relu;        // parallel to layers
  std::vector<PoolResult<T>> pools;             // pools[b - 1] sits after block b

  bool has(LayerId id) const { return id.ordinal() < layers.size(); }
  LayerId deepest() const { return layers.back(); }
};

template <typename T>
struct Features {
  std::map<LayerId, BasicTensor4<T>> activations;
  ForwardTape<T> tape;
};

template <typename T>
Features<T> forward_features(const BasicVggWeights<T>& weights, const BasicTensor4<T>& image,
                             const std::set<LayerId>& layers) {
  if (layers.empty()) throw ValidationError("forward_features: no layers requested");
  if (image.c() != 3) throw ShapeError("forward_features: image must have 3 channels, got " + image.shape().str());
  const LayerId deepest = *layers.rbegin();

  Features<T> f;
  f.tape.input_shape = image.shape();
  BasicTensor4<T> x = image;
  for (const LayerId id : LayerId::all()) {
    if (id > deepest) break;
    if (id.index() == 1 && id.block() > 1) {
      auto pooled = maxpool_forward(x);
      x = pooled.output;
      pooled.output = BasicTensor4<T>();
      f.tape.pools.push_back(std::move(pooled));
    }
    const auto& cw = weights.layer(id);
    auto pre = conv2d_forward(x, cw.kernel, std::span<const T>(cw.bias));
    if (id != deepest) x = relu_forward(pre);
    if (layers.contains(id)) f.activations.emplace(id, pre);
    f.tape.layers.push_back(id);
    f.tape.pre_relu.push_back(std::move(pre));
  }
  return f;
}

// d(loss)/d(image) given d(loss)/d(pre-ReLU activation) at the seeded layers.
template <typename T>
BasicTensor4<T> backward_to_input(const BasicVggWeights<T>& weights, const ForwardTape<T>& tape,
                                  const std::map<LayerId, BasicTensor4<T>>& grads) {
  if (tape.layers.empty()) throw ValidationError("backward_to_input: empty tape");
  for (const auto& [id, g] : grads) {
    if (!tape.has(id)) throw ValidationError("backward_to_input: " + id.str() + " is not on the tape");
    detail::require_same(g.shape(), tape.pre_relu[id.ordinal()].shape(), ("backward_to_input " + id.str()).c_str());
  }
  if (grads.empty()) return BasicTensor4<T>(tape.input_shape);

  const LayerId start = grads.rbegin()->first;
  std::optional<BasicTensor4<T>> g_post;
  for (std::size_t k = start.ordinal() + 1; k-- > 0;) {
    const LayerId id = tape.layers[k];
    const auto& pre = tape.pre_relu[k];
    BasicTensor4<T> g_pre = g_post ? relu_backward(pre, *g_post) : BasicTensor4<T>(pre.shape());
    if (auto it = grads.find(id); it != grads.end()) {
      for (std::size_t i = 0; i < g_pre.size(); ++i) g_pre[i] += it->second[i];
    }
    auto g_in = conv2d_backward_input(g_pre, weights.layer(id).kernel);
    if (id.index() == 1 && id.block() > 1) {
      const auto& pool = tape.pools[static_cast<std::size_t>(id.block() - 2)];
      g_in = maxpool_backward(g_in, pool.argmax, pool.input_shape);
    }
    g_post = std::move(g_in);
  }
  return std::move(*g_post);
}

}  // namespace steel
