#pragma once
/*
 * The optimization loop: the synthesized image starts as the content image
 * and is updated by Adam on the gradient of the total loss. VGG weights are
 * only ever read.
 *
 * Iteration t (0-based) evaluates the loss on the image after t updates and
 * then applies update t + 1. Log rows are written for every t divisible by
 * log_every and for the last iteration; snapshot "{k}.png" holds the image
 * after k updates for every k divisible by snapshot_every.
 */

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steel/adam.hpp"
#include "steel/config.hpp"
#include "steel/error.hpp"
#include "steel/image_io.hpp"
#include "steel/style_loss.hpp"
#include "steel/tensor.hpp"
#include "steel/vgg.hpp"
#include "steel/weights_io.hpp"

namespace steel {

template <typename T>
struct Targets {
  BasicStyleTargets<T> style;
  BasicContentTarget<T> content;
};

template <typename T>
Targets<T> compute_targets(const BasicVggWeights<T>& weights, const BasicTensor4<T>& content,
                           const BasicTensor4<T>& style, const StyleConfig& cfg) {
  Targets<T> out;
  const auto active = cfg.active_layers();
  if (!active.empty()) {
    auto sf = forward_features(weights, style, std::set<LayerId>(active.begin(), active.end()));
    for (auto& [id, f] : sf.activations) out.style.emplace(id, LayerStyleTarget<T>{gram(f), f.shape()});
  }
  auto cf = forward_features(weights, content, {cfg.content_layer});
  out.content = BasicContentTarget<T>{cfg.content_layer, std::move(cf.activations.at(cfg.content_layer))};
  return out;
}

// Shortest round-trip decimal form; used for every number written to CSV.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct RunLogRow {
  std::int64_t iteration = 0;
  double total = 0.0;
  double content = 0.0;
  std::vector<LayerLoss> style;
};

struct RunLog {
  std::vector<LayerId> layers;  // active layers, architectural order
  std::vector<RunLogRow> rows;

  std::string csv_header() const {
    std::string s = "iteration,total,content";
    for (const LayerId id : layers) s += "," + id.str() + ":weighted," + id.str() + ":raw";
    return s;
  }

  static std::string csv_row(const RunLogRow& r) {
    std::string s = std::to_string(r.iteration) + "," + format_number(r.total) + "," + format_number(r.content);
    for (const auto& l : r.style) s += "," + format_number(l.weighted) + "," + format_number(l.raw);
    return s;
  }
};

struct RunResult {
  std::vector<unsigned char> final_png;
  RunLog log;
  std::string weights_fingerprint_before;
  std::string weights_fingerprint_after;
};

struct RunHooks {
  std::function<void(const RunLogRow&)> on_log;
};

namespace detail {

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Non-finite loss terms, reported for the first offending layer.
inline void check_losses(const LossBreakdown& b, LayerId content_layer, std::int64_t iteration) {
  std::vector<std::pair<LayerId, double>> terms;
  terms.emplace_back(content_layer, b.content);
  for (const auto& l : b.style) terms.emplace_back(l.layer, l.raw);
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& c) { return a.first < c.first; });
  for (const auto& [id, v] : terms) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(iteration) + ", first offending layer " +
                         id.str());
    }
  }
  if (!std::isfinite(b.total)) throw NumericError("non-finite total loss at iteration " + std::to_string(iteration));
}

}  // namespace detail

inline RunResult run(const RunConfig& cfg, const VggWeights& weights, const RunHooks& hooks = {}) {
  cfg.validate();
  namespace fs = std::filesystem;

  RunResult result;
  result.weights_fingerprint_before = weights.fingerprint();

  const auto& pre = weights.preprocessing();
  const Tensor4 content = preprocess(cfg.content_path, cfg.image_size, pre);
  const Tensor4 style = preprocess(cfg.style_path, cfg.image_size, pre);
  const auto targets = compute_targets(weights, content, style, cfg.style);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());

  nlohmann::json meta{{"config", to_json(cfg)},
                      {"weights", {{"checksum", weights.source_checksum()},
                                   {"fingerprint", result.weights_fingerprint_before}}}};
  detail::write_json(cfg.output_dir / "run_meta.json", meta);

  result.log.layers = cfg.style.active_layers();
  std::ofstream csv(cfg.output_dir / "run_log.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (cfg.output_dir / "run_log.csv").string());
  csv << result.log.csv_header() << '\n';

  const auto layers = cfg.style.required_layers();
  Tensor4 image = content;
  Adam adam(cfg.optimizer, image.shape());
  const auto started = std::chrono::steady_clock::now();

  for (std::int64_t t = 0; t < cfg.iterations; ++t) {
    auto feats = forward_features(weights, image, layers);
    auto loss = total_loss(feats.activations, targets.style, targets.content, cfg.style);
    detail::check_losses(loss.breakdown, cfg.style.content_layer, t);

    if (t % cfg.log_every == 0 || t == cfg.iterations - 1) {
      RunLogRow row{t, loss.breakdown.total, loss.breakdown.content, loss.breakdown.style};
      csv << RunLog::csv_row(row) << '\n' << std::flush;
      if (hooks.on_log) hooks.on_log(row);
      result.log.rows.push_back(std::move(row));
    }

    const auto grad = backward_to_input(weights, feats.tape, loss.grads);
    adam.step(image, grad);

    if ((t + 1) % cfg.snapshot_every == 0) {
      detail::write_bytes(cfg.output_dir / (std::to_string(t + 1) + ".png"), postprocess(image, pre));
    }
  }

  result.final_png = postprocess(image, pre);
  detail::write_bytes(cfg.output_dir / "final.png", result.final_png);
  result.weights_fingerprint_after = weights.fingerprint();

  const auto& last = result.log.rows.back();
  meta["weights"]["fingerprint_after"] = result.weights_fingerprint_after;
  meta["result"] = {{"iterations", cfg.iterations},
                    {"final_total", last.total},
                    {"final_content", last.content},
                    {"wall_seconds",
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};
  detail::write_json(cfg.output_dir / "run_meta.json", meta);
  return result;
}

inline RunResult run(const RunConfig& cfg, const RunHooks& hooks = {}) {
  if (cfg.weights_path.empty()) throw ValidationError("weights_path is not set");
  return run(cfg, load_weights(cfg.weights_path), hooks);
}

}  // namespace steel
