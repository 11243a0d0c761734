#pragma once
// Image decode/encode and conversion to and from network input tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "steel/error.hpp"
#include "steel/tensor.hpp"
#include "steel/weights_io.hpp"

namespace steel {

namespace detail {

// Returns an 8-bit 3-channel BGR image.
inline cv::Mat to_bgr8(const cv::Mat& raw, const std::string& what) {
  if (raw.empty()) throw ValidationError("cannot decode image " + what);
  if (raw.depth() != CV_8U) throw ValidationError("unsupported color model in " + what + " (need 8-bit channels)");
  cv::Mat bgr;
  switch (raw.channels()) {
    case 1: cv::cvtColor(raw, bgr, cv::COLOR_GRAY2BGR); break;
    case 3: bgr = raw; break;
    case 4: cv::cvtColor(raw, bgr, cv::COLOR_BGRA2BGR); break;
    default:
      throw ValidationError("unsupported color model in " + what + " (" + std::to_string(raw.channels()) +
                            " channels)");
  }
  return bgr;
}

}  // namespace detail

// BGR 8-bit image -> 1x3xHxW tensor, channel-ordered and mean-subtracted.
inline Tensor4 image_to_tensor(const cv::Mat& bgr, const Preprocessing& pre) {
  const auto H = static_cast<std::size_t>(bgr.rows), W = static_cast<std::size_t>(bgr.cols);
  Tensor4 t(Shape4{1, 3, H, W});
  for (std::size_t y = 0; y < H; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        // OpenCV pixels are BGR; tensor channel c maps to source channel src.
        const std::size_t src = pre.channel_order == ChannelOrder::BGR ? c : 2 - c;
        t.at(0, c, y, x) = static_cast<float>(row[x][static_cast<int>(src)]) - pre.mean[c];
      }
    }
  }
  return t;
}

inline cv::Mat tensor_to_image(const Tensor4& t, const Preprocessing& pre) {
  if (t.n() != 1 || t.c() != 3) throw ShapeError("postprocess expects 1x3xHxW, got " + t.shape().str());
  require_finite(t, "postprocess input");
  cv::Mat bgr(static_cast<int>(t.h()), static_cast<int>(t.w()), CV_8UC3);
  for (std::size_t y = 0; y < t.h(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < t.w(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t dst = pre.channel_order == ChannelOrder::BGR ? c : 2 - c;
        const double v = std::clamp(std::round(static_cast<double>(t.at(0, c, y, x)) + pre.mean[c]), 0.0, 255.0);
        row[x][static_cast<int>(dst)] = static_cast<unsigned char>(v);
      }
    }
  }
  return bgr;
}

inline Tensor4 preprocess(const cv::Mat& decoded, std::size_t size, const Preprocessing& pre,
                          const std::string& what = "image") {
  cv::Mat bgr = detail::to_bgr8(decoded, what);
  if (static_cast<std::size_t>(bgr.rows) != size || static_cast<std::size_t>(bgr.cols) != size) {
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, cv::INTER_LINEAR);
    bgr = resized;
  }
  return image_to_tensor(bgr, pre);
}

inline Tensor4 preprocess(const std::filesystem::path& path, std::size_t size, const Preprocessing& pre) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  return preprocess(cv::imread(path.string(), cv::IMREAD_UNCHANGED), size, pre, path.string());
}

inline std::vector<unsigned char> postprocess(const Tensor4& t, const Preprocessing& pre) {
  std::vector<unsigned char> png;
  if (!cv::imencode(".png", tensor_to_image(t, pre), png)) throw IoError("PNG encoding failed");
  return png;
}

inline Tensor4 decode_png(const std::vector<unsigned char>& bytes, const Preprocessing& pre) {
  const cv::Mat raw = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
  const cv::Mat bgr = detail::to_bgr8(raw, "PNG buffer");
  return image_to_tensor(bgr, pre);
}

}  // namespace steel
