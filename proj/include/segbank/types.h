// Copyright 2026 The segbank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Shared domain records. Every module of the engine speaks only these types;
// their on-disk layout lives in io.h.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace segbank {

using ClassId = std::uint16_t;

inline constexpr ClassId kBackground = 0;
inline constexpr ClassId kUnassigned = 0xFFFF;
// Void label accepted only in ground-truth maps.
inline constexpr ClassId kIgnore = 0xFFFE;

// Dense h x w x d descriptor grid of one image, row-major with the channel
// axis innermost. `patch` is the edge length in pixels of one grid cell.
struct FeatureMap {
  std::string image_id;
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::uint32_t d = 0;
  std::uint32_t patch = 1;
  std::vector<float> data;

  std::span<const float> cell(std::uint32_t row, std::uint32_t col) const {
    return {data.data() + (static_cast<std::size_t>(row) * w + col) * d, d};
  }
  std::span<float> cell(std::uint32_t row, std::uint32_t col) {
    return {data.data() + (static_cast<std::size_t>(row) * w + col) * d, d};
  }

  // Throws ValidationError on a broken invariant.
  void validate() const;
  bool operator==(const FeatureMap&) const = default;
};

// Per-class logits at pixel resolution, laid out [class][row][col].
// Channel 0 is background. -inf marks a suppressed class.
struct DenseLogits {
  std::string image_id;
  std::uint32_t classes = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> data;

  float at(std::uint32_t c, std::uint32_t row, std::uint32_t col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  float& at(std::uint32_t c, std::uint32_t row, std::uint32_t col) {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }

  void validate() const;
  bool operator==(const DenseLogits&) const = default;
};

// Full-resolution binary mask. Pixel (r, c) is bit r * width + c of a
// packed little-endian array of 64-bit words (bit i lives in word i / 64 at
// position i % 64). Padding bits past height * width are always zero.
class BitMask {
 public:
  BitMask() = default;
  BitMask(std::uint32_t height, std::uint32_t width);

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::size_t size() const { return static_cast<std::size_t>(height_) * width_; }

  bool get(std::uint32_t row, std::uint32_t col) const {
    const std::size_t i = static_cast<std::size_t>(row) * width_ + col;
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::uint32_t row, std::uint32_t col, bool value = true) {
    const std::size_t i = static_cast<std::size_t>(row) * width_ + col;
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }

  std::size_t popcount() const;
  bool empty() const { return popcount() == 0; }
  // True when every set bit of *this is also set in `other`.
  bool subset_of(const BitMask& other) const;

  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }
  static std::size_t word_count(std::uint32_t height, std::uint32_t width) {
    return (static_cast<std::size_t>(height) * width + 63) / 64;
  }

  bool operator==(const BitMask&) const = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

// Soft assignment of a mask onto a feature grid; every weight in [0, 1].
struct SoftMask {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::vector<float> weights;

  float at(std::uint32_t row, std::uint32_t col) const {
    return weights[static_cast<std::size_t>(row) * w + col];
  }
  void validate() const;
  bool operator==(const SoftMask&) const = default;
};

struct Proposal {
  BitMask mask;
  float objectness = 0.0f;
  bool operator==(const Proposal&) const = default;
};

// Class-agnostic proposals for one image; every mask is height x width.
struct ProposalSet {
  std::string image_id;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<Proposal> proposals;

  void validate() const;
  bool operator==(const ProposalSet&) const = default;
};

struct BankEntry {
  std::vector<float> vector;
  ClassId class_id = 0;
  std::string source_image;
  bool operator==(const BankEntry&) const = default;
};

struct FeatureBank {
  std::uint32_t d = 0;
  ClassId class_count = 0;
  std::vector<BankEntry> entries;
  std::uint64_t config_fingerprint = 0;

  void validate() const;
  bool operator==(const FeatureBank&) const = default;
};

// H x W label grid. kUnassigned marks pixels no proposal has claimed.
struct SegmentationMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<ClassId> labels;

  SegmentationMap() = default;
  SegmentationMap(std::uint32_t height_px, std::uint32_t width_px, ClassId fill)
      : height(height_px),
        width(width_px),
        labels(static_cast<std::size_t>(height_px) * width_px, fill) {}

  ClassId at(std::uint32_t row, std::uint32_t col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  ClassId& at(std::uint32_t row, std::uint32_t col) {
    return labels[static_cast<std::size_t>(row) * width + col];
  }

  void validate() const;
  // Every label is either a sentinel allowed by the caller or < class_count.
  void validate_labels(ClassId class_count, bool allow_unassigned,
                       bool allow_ignore) const;
  bool operator==(const SegmentationMap&) const = default;
};

// 1(seg == c) as a BitMask.
BitMask class_mask(const SegmentationMap& seg, ClassId c);

}  // namespace segbank
