#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "steel/error.hpp"

namespace steel {

// One of the 13 VGG16 conv layers, written conv{block}_{index}.
class LayerId {
 public:
  static constexpr int kBlocks = 5;
  static constexpr std::size_t kCount = 13;

  static constexpr int layers_in_block(int block) { return block <= 2 ? 2 : 3; }
  static constexpr int block_width(int block) {
    constexpr std::array<int, 5> widths{64, 128, 256, 512, 512};
    return widths[static_cast<std::size_t>(block - 1)];
  }
  static constexpr bool valid(int block, int index) {
    return block >= 1 && block <= kBlocks && index >= 1 && index <= layers_in_block(block);
  }

  constexpr LayerId() = default;
  constexpr LayerId(int block, int index) : block_(block), index_(index) {
    if (!valid(block, index)) {
      throw ValidationError("no VGG16 layer conv" + std::to_string(block) + "_" + std::to_string(index));
    }
  }

  static LayerId parse(std::string_view text) {
    // Canonical form only: "conv", one block digit, '_', one index digit.
    if (text.size() == 7 && text.substr(0, 4) == "conv" && text[5] == '_' && text[4] >= '1' &&
        text[4] <= '9' && text[6] >= '1' && text[6] <= '9') {
      const int block = text[4] - '0';
      const int index = text[6] - '0';
      if (valid(block, index)) return LayerId(block, index);
    }
    throw ValidationError("invalid layer name '" + std::string(text) + "' (expected convB_I)");
  }

  static LayerId from_ordinal(std::size_t ordinal) { return all()[ordinal]; }

  static const std::array<LayerId, kCount>& all() {
    static const std::array<LayerId, kCount> layers = [] {
      std::array<LayerId, kCount> out{};
      std::size_t k = 0;
      for (int b = 1; b <= kBlocks; ++b)
        for (int i = 1; i <= layers_in_block(b); ++i) out[k++] = LayerId(b, i);
      return out;
    }();
    return layers;
  }

  static std::vector<LayerId> block_layers(int block) {
    std::vector<LayerId> out;
    for (int i = 1; i <= layers_in_block(block); ++i) out.emplace_back(block, i);
    return out;
  }

  constexpr int block() const { return block_; }
  constexpr int index() const { return index_; }

  // Position in architectural order, 0 for conv1_1 through 12 for conv5_3.
  constexpr std::size_t ordinal() const {
    std::size_t k = 0;
    for (int b = 1; b < block_; ++b) k += static_cast<std::size_t>(layers_in_block(b));
    return k + static_cast<std::size_t>(index_ - 1);
  }

  constexpr int out_channels() const { return block_width(block_); }
  constexpr int in_channels() const {
    if (index_ > 1) return block_width(block_);
    return block_ == 1 ? 3 : block_width(block_ - 1);
  }
  // Number of 2x2 pools between the input and this layer.
  constexpr int pools_before() const { return block_ - 1; }
  constexpr bool last_in_block() const { return index_ == layers_in_block(block_); }

  std::string str() const { return "conv" + std::to_string(block_) + "_" + std::to_string(index_); }

  friend constexpr auto operator<=>(const LayerId& a, const LayerId& b) {
    return a.ordinal() <=> b.ordinal();
  }
  friend constexpr bool operator==(const LayerId&, const LayerId&) = default;

 private:
  int block_ = 1;
  int index_ = 1;
};

}  // namespace steel
