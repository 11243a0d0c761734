#pragma once
/*
 * Portable VGG16 weight files.
 *
 * A weight file is a JSON manifest plus one raw blob of little-endian f32:
 *
 *   {
 *     "version": 1,
 *     "checksum": "<sha256 of blob, hex>",
 *     "blob": "weights.bin",                  (optional, default: manifest stem + ".bin")
 *     "preprocessing": {"mean": [m0, m1, m2], "channel_order": "BGR" | "RGB"},
 *     "layers": [
 *       {"name": "conv1_1", "kernel_shape": [64, 3, 3, 3], "bias_shape": [64],
 *        "kernel_offset": 0, "bias_offset": 6912},
 *       ...
 *     ]
 *   }
 *
 * Offsets are byte offsets into the blob. Kernels are (out_c, in_c, kh, kw)
 * row-major. Reference-activation files use the same manifest+blob scheme,
 * see load_reference_activations().
 */

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steel/error.hpp"
#include "steel/layer_id.hpp"
#include "steel/sha256.hpp"
#include "steel/tensor.hpp"

namespace steel {

enum class ChannelOrder { RGB, BGR };

inline std::string to_string(ChannelOrder order) { return order == ChannelOrder::RGB ? "RGB" : "BGR"; }

inline ChannelOrder parse_channel_order(const std::string& s) {
  if (s == "RGB") return ChannelOrder::RGB;
  if (s == "BGR") return ChannelOrder::BGR;
  throw ValidationError("channel_order must be RGB or BGR, got '" + s + "'");
}

// Pixel values are in [0, 255]; mean is listed in the tensor's channel order.
struct Preprocessing {
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  ChannelOrder channel_order = ChannelOrder::BGR;

  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

template <typename T>
struct ConvWeights {
  BasicTensor4<T> kernel;  // (out_c, in_c, 3, 3)
  std::vector<T> bias;     // out_c
};

// The 13 conv layers of VGG16, validated against the channel plan.
template <typename T>
class BasicVggWeights {
 public:
  BasicVggWeights(std::array<ConvWeights<T>, LayerId::kCount> layers, Preprocessing pre)
      : layers_(std::move(layers)), pre_(pre) {
    for (const LayerId id : LayerId::all()) {
      const auto& cw = layers_[id.ordinal()];
      const Shape4 want{static_cast<std::size_t>(id.out_channels()),
                        static_cast<std::size_t>(id.in_channels()), 3, 3};
      if (!(cw.kernel.shape() == want)) {
        throw ShapeError(id.str() + ": kernel shape " + cw.kernel.shape().str() + " violates VGG16 plan " +
                         want.str());
      }
      if (cw.bias.size() != want.n) {
        throw ShapeError(id.str() + ": bias length " + std::to_string(cw.bias.size()) + ", expected " +
                         std::to_string(want.n));
      }
      if (!all_finite(cw.kernel.data()) || !all_finite(std::span<const T>(cw.bias))) {
        throw ValidationError(id.str() + ": non-finite weight values");
      }
    }
    for (float m : pre_.mean) {
      if (!std::isfinite(m)) throw ValidationError("preprocessing mean is not finite");
    }
  }

  const ConvWeights<T>& layer(LayerId id) const { return layers_[id.ordinal()]; }
  const Preprocessing& preprocessing() const { return pre_; }

  // Manifest checksum the weights were loaded from; empty when built in memory.
  const std::string& source_checksum() const { return source_checksum_; }
  void set_source_checksum(std::string s) { source_checksum_ = std::move(s); }

  // SHA-256 over every kernel and bias in architectural order.
  std::string fingerprint() const {
    Sha256 h;
    for (const auto& cw : layers_) {
      h.update_values(cw.kernel.data());
      h.update_values(std::span<const T>(cw.bias));
    }
    return h.hex_digest();
  }

  template <typename U>
  BasicVggWeights<U> cast() const {
    std::array<ConvWeights<U>, LayerId::kCount> out;
    for (std::size_t i = 0; i < LayerId::kCount; ++i) {
      out[i].kernel = layers_[i].kernel.template cast<U>();
      out[i].bias.assign(layers_[i].bias.begin(), layers_[i].bias.end());
    }
    BasicVggWeights<U> w(std::move(out), pre_);
    w.set_source_checksum(source_checksum_);
    return w;
  }

 private:
  std::array<ConvWeights<T>, LayerId::kCount> layers_;
  Preprocessing pre_;
  std::string source_checksum_;
};

using VggWeights = BasicVggWeights<float>;

struct ReferenceActivations {
  Tensor4 input_image;
  std::map<LayerId, Tensor4> activations;

  const Tensor4& activation(LayerId id) const {
    auto it = activations.find(id);
    if (it == activations.end()) throw ValidationError("reference file has no activation for " + id.str());
    return it->second;
  }

  std::vector<LayerId> layers() const {
    std::vector<LayerId> out;
    for (const auto& [id, _] : activations) out.push_back(id);
    return out;
  }
};

namespace detail {

inline nlohmann::json read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
  }
}

inline std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> bytes(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("short read from " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::filesystem::path blob_path(const std::filesystem::path& manifest, const nlohmann::json& j) {
  if (j.contains("blob")) return manifest.parent_path() / j.at("blob").get<std::string>();
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

inline std::vector<float> read_f32(std::span<const std::byte> blob, std::uint64_t offset, std::size_t count,
                                   const std::string& what) {
  if (offset % 4 != 0) throw ValidationError(what + ": offset " + std::to_string(offset) + " not 4-byte aligned");
  const std::uint64_t bytes = 4ull * count;
  if (offset > blob.size() || bytes > blob.size() - offset) {
    throw ValidationError(what + ": blob length " + std::to_string(blob.size()) + " too short for " +
                          std::to_string(bytes) + " bytes at offset " + std::to_string(offset));
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t word = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset + 4 * i);
    word = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
    out[i] = std::bit_cast<float>(word);
  }
  return out;
}

inline void append_f32(std::vector<std::byte>& blob, std::span<const float> values) {
  for (float v : values) {
    const auto word = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) blob.push_back(static_cast<std::byte>((word >> (8 * k)) & 0xFF));
  }
}

inline Shape4 shape_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ShapeError(what + ": expected a 4-element shape");
  const auto dim = [&](std::size_t i) {
    const auto v = j.at(i).get<std::int64_t>();
    if (v < 1) throw ShapeError(what + ": non-positive dimension");
    return static_cast<std::size_t>(v);
  };
  return Shape4{dim(0), dim(1), dim(2), dim(3)};
}

inline nlohmann::json shape_to_json(const Shape4& s) { return nlohmann::json::array({s.n, s.c, s.h, s.w}); }

inline void verify_checksum(const nlohmann::json& j, std::span<const std::byte> blob, const std::string& what) {
  const auto expected = j.at("checksum").get<std::string>();
  const auto actual = sha256_hex(blob);
  if (expected != actual) {
    throw ValidationError(what + ": checksum mismatch (manifest " + expected + ", blob " + actual + ")");
  }
}

}  // namespace detail

inline VggWeights load_weights(const std::filesystem::path& manifest_path) {
  const auto j = detail::read_manifest(manifest_path);
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported weight manifest version");

    Preprocessing pre;
    const auto& pj = j.at("preprocessing");
    const auto mean = pj.at("mean").get<std::vector<float>>();
    if (mean.size() != 3) throw ValidationError("preprocessing.mean must have 3 entries");
    std::copy(mean.begin(), mean.end(), pre.mean.begin());
    pre.channel_order = parse_channel_order(pj.at("channel_order").get<std::string>());

    const auto& lj = j.at("layers");
    if (!lj.is_array() || lj.size() != LayerId::kCount) {
      throw ValidationError("weight manifest must list exactly the 13 VGG16 conv layers, found " +
                            std::to_string(lj.is_array() ? lj.size() : 0));
    }

    // Shapes first, so plan violations are reported before any blob I/O.
    struct Entry {
      LayerId id;
      Shape4 kshape;
      std::uint64_t koff, boff;
    };
    std::vector<Entry> entries;
    std::set<LayerId> seen;
    for (const auto& e : lj) {
      const auto id = LayerId::parse(e.at("name").get<std::string>());
      if (!seen.insert(id).second) throw ValidationError("duplicate layer " + id.str());
      const auto kshape = detail::shape_from_json(e.at("kernel_shape"), id.str() + ".kernel_shape");
      const Shape4 want{static_cast<std::size_t>(id.out_channels()), static_cast<std::size_t>(id.in_channels()),
                        3, 3};
      if (!(kshape == want)) {
        throw ShapeError(id.str() + ": kernel_shape " + kshape.str() + " violates VGG16 channel plan " + want.str());
      }
      const auto bshape = e.at("bias_shape").get<std::vector<std::int64_t>>();
      if (bshape.size() != 1 || bshape[0] != id.out_channels()) {
        throw ShapeError(id.str() + ": bias_shape must be [" + std::to_string(id.out_channels()) + "]");
      }
      entries.push_back({id, kshape, e.at("kernel_offset").get<std::uint64_t>(),
                         e.at("bias_offset").get<std::uint64_t>()});
    }

    const auto blob = detail::read_file_bytes(detail::blob_path(manifest_path, j));
    if (blob.size() % 4 != 0) {
      throw ValidationError("blob length " + std::to_string(blob.size()) + " is not a multiple of 4");
    }
    std::array<ConvWeights<float>, LayerId::kCount> layers;
    for (const auto& e : entries) {
      auto& cw = layers[e.id.ordinal()];
      cw.kernel = Tensor4(e.kshape, detail::read_f32(blob, e.koff, e.kshape.count(), e.id.str() + ".kernel"));
      cw.bias = detail::read_f32(blob, e.boff, e.kshape.n, e.id.str() + ".bias");
    }
    detail::verify_checksum(j, blob, manifest_path.string());

    VggWeights w(std::move(layers), pre);
    w.set_source_checksum(j.at("checksum").get<std::string>());
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed weight manifest " + manifest_path.string() + ": " + e.what());
  }
}

// Writes manifest + blob; layers are laid out contiguously in architectural order.
inline std::string save_weights(const VggWeights& w, const std::filesystem::path& manifest_path,
                                const std::string& source_checkpoint = "") {
  std::vector<std::byte> blob;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerId id : LayerId::all()) {
    const auto& cw = w.layer(id);
    const auto koff = blob.size();
    detail::append_f32(blob, cw.kernel.data());
    const auto boff = blob.size();
    detail::append_f32(blob, cw.bias);
    layers.push_back({{"name", id.str()},
                      {"kernel_shape", detail::shape_to_json(cw.kernel.shape())},
                      {"bias_shape", {cw.bias.size()}},
                      {"kernel_offset", koff},
                      {"bias_offset", boff}});
  }
  auto blob_file = manifest_path;
  blob_file.replace_extension(".bin");
  const auto checksum = sha256_hex(blob);
  nlohmann::json j{{"version", 1},
                   {"checksum", checksum},
                   {"blob", blob_file.filename().string()},
                   {"preprocessing",
                    {{"mean", w.preprocessing().mean}, {"channel_order", to_string(w.preprocessing().channel_order)}}},
                   {"layers", layers}};
  if (!source_checkpoint.empty()) j["source_checkpoint"] = source_checkpoint;
  detail::write_file_bytes(blob_file, blob);
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << j.dump(2) << '\n';
  return checksum;
}

/*
 * Reference activations:
 *
 *   {
 *     "version": 1, "checksum": "...", "blob": "reference.bin",
 *     "input_image": {"shape": [1, 3, H, W], "offset": 0},
 *     "activations": {"conv1_2": {"shape": [1, 64, H, W], "offset": ...}, ...}
 *   }
 *
 * Activations are pre-ReLU conv outputs.
 */
inline ReferenceActivations load_reference_activations(const std::filesystem::path& path) {
  const auto j = detail::read_manifest(path);
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported reference manifest version");
    const auto blob = detail::read_file_bytes(detail::blob_path(path, j));
    detail::verify_checksum(j, blob, path.string());

    const auto read_entry = [&](const nlohmann::json& e, const std::string& what) {
      const auto shape = detail::shape_from_json(e.at("shape"), what);
      return Tensor4(shape, detail::read_f32(blob, e.at("offset").get<std::uint64_t>(), shape.count(), what));
    };

    ReferenceActivations ref;
    ref.input_image = read_entry(j.at("input_image"), "input_image");
    if (ref.input_image.c() != 3) throw ShapeError("reference input_image must have 3 channels");
    for (const auto& [name, e] : j.at("activations").items()) {
      const auto id = LayerId::parse(name);
      auto t = read_entry(e, name);
      const auto div = std::size_t{1} << id.pools_before();
      const Shape4 want{ref.input_image.n(), static_cast<std::size_t>(id.out_channels()),
                        ref.input_image.h() / div, ref.input_image.w() / div};
      if (!(t.shape() == want)) {
        throw ShapeError(name + ": activation shape " + t.shape().str() + " inconsistent with input, expected " +
                         want.str());
      }
      ref.activations.emplace(id, std::move(t));
    }
    return ref;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed reference manifest " + path.string() + ": " + e.what());
  }
}

inline void save_reference_activations(const ReferenceActivations& ref, const std::filesystem::path& path) {
  std::vector<std::byte> blob;
  nlohmann::json acts = nlohmann::json::object();
  nlohmann::json input{{"shape", detail::shape_to_json(ref.input_image.shape())}, {"offset", blob.size()}};
  detail::append_f32(blob, ref.input_image.data());
  for (const auto& [id, t] : ref.activations) {
    acts[id.str()] = {{"shape", detail::shape_to_json(t.shape())}, {"offset", blob.size()}};
    detail::append_f32(blob, t.data());
  }
  auto blob_file = path;
  blob_file.replace_extension(".bin");
  nlohmann::json j{{"version", 1},
                   {"checksum", sha256_hex(blob)},
                   {"blob", blob_file.filename().string()},
                   {"input_image", input},
                   {"activations", acts}};
  detail::write_file_bytes(blob_file, blob);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace steel
