#pragma once
/*
 * Run configuration and its JSON form.
 *
 * Parsing is strict: any key not listed here is rejected, since a mistyped
 * coefficient name would otherwise silently run a different experiment.
 */

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "steel/adam.hpp"
#include "steel/error.hpp"
#include "steel/layer_id.hpp"
#include "steel/style_loss.hpp"

namespace steel {

struct RunConfig {
  std::filesystem::path content_path;
  std::filesystem::path style_path;
  std::filesystem::path output_dir = "out";
  std::filesystem::path weights_path;
  std::size_t image_size = 256;
  std::int64_t iterations = 50000;
  std::int64_t log_every = 1000;
  std::int64_t snapshot_every = 1000;
  std::uint64_t seed = 0;
  StyleConfig style;
  AdamSettings optimizer;

  void validate() const {
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    if (image_size < 32 || image_size % 16 != 0) {
      throw ValidationError("image_size must be >= 32 and divisible by 16, got " + std::to_string(image_size));
    }
    if (log_every < 1) throw ValidationError("log_every must be >= 1");
    if (snapshot_every < 1) throw ValidationError("snapshot_every must be >= 1");
    style.validate();
    optimizer.validate();
  }
};

// Named coefficient sets. "baseline*" are the five-layer reference setups
// (style_weight 1e5); "coarse-block4" is conv1_1/conv1_2 at 2000 plus the
// whole fourth block at 200.
inline StyleConfig style_preset(std::string_view name) {
  StyleConfig s;
  const auto baseline = [&](double c) {
    for (const char* l : {"conv1_2", "conv2_2", "conv3_3", "conv4_3", "conv5_3"}) s.coefficients[LayerId::parse(l)] = c;
    s.style_weight = 1e5;
  };
  if (name == "baseline") {
    baseline(0.2);
  } else if (name == "baseline-0.02") {
    baseline(0.02);
  } else if (name == "baseline-0.002") {
    baseline(0.002);
  } else if (name == "coarse-block4") {
    s.coefficients[LayerId(1, 1)] = 2000;
    s.coefficients[LayerId(1, 2)] = 2000;
    for (const LayerId id : LayerId::block_layers(4)) s.coefficients[id] = 200;
  } else {
    throw ValidationError("unknown preset '" + std::string(name) +
                          "' (known: baseline, baseline-0.02, baseline-0.002, coarse-block4)");
  }
  return s;
}

namespace detail {

template <typename Fn>
void for_each_key(const nlohmann::json& j, std::string_view where, Fn&& fn) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!fn(key, value)) {
      throw ValidationError("unknown config key '" + (where.empty() ? key : std::string(where) + "." + key) + "'");
    }
  }
}

inline void style_from_json(const nlohmann::json& j, StyleConfig& s) {
  for_each_key(j, "style", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "coefficients") {
      for_each_key(v, "style.coefficients", [&](const std::string& layer, const nlohmann::json& c) {
        s.coefficients[LayerId::parse(layer)] = c.get<double>();
        return true;
      });
    } else if (key == "content_layer") {
      s.content_layer = LayerId::parse(v.get<std::string>());
    } else if (key == "content_weight") {
      s.content_weight = v.get<double>();
    } else if (key == "style_weight") {
      s.style_weight = v.get<double>();
    } else {
      return false;
    }
    return true;
  });
}

inline void optimizer_from_json(const nlohmann::json& j, AdamSettings& o) {
  for_each_key(j, "optimizer", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "lr") o.lr = v.get<double>();
    else if (key == "beta1") o.beta1 = v.get<double>();
    else if (key == "beta2") o.beta2 = v.get<double>();
    else if (key == "eps") o.eps = v.get<double>();
    else if (key == "weight_decay") o.weight_decay = v.get<double>();
    else return false;
    return true;
  });
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    if (j.is_object() && j.contains("preset")) cfg.style = style_preset(j.at("preset").get<std::string>());
    detail::for_each_key(j, "", [&](const std::string& key, const nlohmann::json& v) {
      if (key == "preset") {
        // applied above
      } else if (key == "content_path") {
        cfg.content_path = v.get<std::string>();
      } else if (key == "style_path") {
        cfg.style_path = v.get<std::string>();
      } else if (key == "output_dir") {
        cfg.output_dir = v.get<std::string>();
      } else if (key == "weights_path") {
        cfg.weights_path = v.get<std::string>();
      } else if (key == "image_size") {
        cfg.image_size = v.get<std::size_t>();
      } else if (key == "iterations") {
        cfg.iterations = v.get<std::int64_t>();
      } else if (key == "log_every") {
        cfg.log_every = v.get<std::int64_t>();
      } else if (key == "snapshot_every") {
        cfg.snapshot_every = v.get<std::int64_t>();
      } else if (key == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else if (key == "style") {
        detail::style_from_json(v, cfg.style);
      } else if (key == "optimizer") {
        detail::optimizer_from_json(v, cfg.optimizer);
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const StyleConfig& s) {
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [id, c] : s.coefficients) coeffs[id.str()] = c;
  return {{"coefficients", coeffs},
          {"content_layer", s.content_layer.str()},
          {"content_weight", s.content_weight},
          {"style_weight", s.style_weight}};
}

inline nlohmann::json to_json(const AdamSettings& o) {
  return {{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}, {"weight_decay", o.weight_decay}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"content_path", c.content_path.string()},
          {"style_path", c.style_path.string()},
          {"output_dir", c.output_dir.string()},
          {"weights_path", c.weights_path.string()},
          {"image_size", c.image_size},
          {"iterations", c.iterations},
          {"log_every", c.log_every},
          {"snapshot_every", c.snapshot_every},
          {"seed", c.seed},
          {"style", to_json(c.style)},
          {"optimizer", to_json(c.optimizer)}};
}

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible (numbers, booleans, arrays) and taken as a string otherwise.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace steel
