#pragma once
// Test fixtures: deterministic synthetic VGG16 weights and small logo images.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "steel/steel.hpp"

namespace steel::fixtures {

// Caffe-style BGR means on a [0, 255] pixel scale.
inline Preprocessing caffe_preprocessing() { return Preprocessing{{103.939f, 116.779f, 123.68f}, ChannelOrder::BGR}; }

// He-normal kernels, small biases. Pre-activation scale stays roughly constant
// through the trunk, like trained VGG16.
inline VggWeights synthetic_weights(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::array<ConvWeights<float>, LayerId::kCount> layers;
  for (const LayerId id : LayerId::all()) {
    const auto out_c = static_cast<std::size_t>(id.out_channels());
    const auto in_c = static_cast<std::size_t>(id.in_channels());
    std::normal_distribution<double> k(0.0, std::sqrt(2.0 / (9.0 * static_cast<double>(in_c))));
    std::normal_distribution<double> b(0.0, 0.05);
    auto& cw = layers[id.ordinal()];
    cw.kernel = Tensor4(Shape4{out_c, in_c, 3, 3});
    for (auto& v : cw.kernel.data()) v = static_cast<float>(k(rng));
    cw.bias.resize(out_c);
    for (auto& v : cw.bias) v = static_cast<float>(b(rng));
  }
  return VggWeights(std::move(layers), caffe_preprocessing());
}

// All-zero network except conv1_1, which copies input channel c to output c.
inline VggWeights identity_first_layer_weights() {
  std::array<ConvWeights<float>, LayerId::kCount> layers;
  for (const LayerId id : LayerId::all()) {
    auto& cw = layers[id.ordinal()];
    cw.kernel = Tensor4(Shape4{static_cast<std::size_t>(id.out_channels()), static_cast<std::size_t>(id.in_channels()), 3, 3});
    cw.bias.assign(static_cast<std::size_t>(id.out_channels()), 0.f);
  }
  auto& k = layers[0].kernel;
  for (std::size_t c = 0; c < 3; ++c) k.at(c, c, 1, 1) = 1.f;
  return VggWeights(std::move(layers), caffe_preprocessing());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("steel_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Dark text on a white background, roughly a corporate wordmark.
inline cv::Mat corporate_logo(int size) {
  cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::putText(img, "Acme", cv::Point(size / 16, size * 5 / 8), cv::FONT_HERSHEY_SIMPLEX, size / 64.0 * 0.7,
              cv::Scalar(40, 40, 40), std::max(1, size / 32), cv::LINE_AA);
  return img;
}

// Jagged, high-contrast glyph strokes, roughly a band logo.
inline cv::Mat metal_logo(int size) {
  cv::Mat img(size, size, CV_8UC3, cv::Scalar(250, 250, 250));
  cv::putText(img, "RAZR", cv::Point(size / 32, size * 5 / 8), cv::FONT_HERSHEY_SCRIPT_COMPLEX, size / 64.0 * 0.8,
              cv::Scalar(0, 0, 0), std::max(1, size / 24), cv::LINE_8);
  for (int k = 0; k < 6; ++k) {
    const int x = size / 8 + k * size / 8;
    cv::line(img, cv::Point(x, size / 4), cv::Point(x + size / 16, size / 3), cv::Scalar(20, 20, 160),
             std::max(1, size / 48));
  }
  return img;
}

inline std::filesystem::path write_image(const std::filesystem::path& path, const cv::Mat& img) {
  cv::imwrite(path.string(), img);
  return path;
}

}  // namespace steel::fixtures
