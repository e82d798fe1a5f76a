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

#include "segbank/types.h"

#include <bit>
#include <cmath>
#include <string>

#include "segbank/error.h"

namespace segbank {
namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void FeatureMap::validate() const {
  check(h >= 1 && w >= 1 && d >= 1 && patch >= 1,
        "FeatureMap '" + image_id + "': h, w, d, patch must all be >= 1");
  check(data.size() == static_cast<std::size_t>(h) * w * d,
        "FeatureMap '" + image_id + "': data length != h*w*d");
  for (float v : data) {
    check(std::isfinite(v), "FeatureMap '" + image_id + "': non-finite value");
  }
}

void DenseLogits::validate() const {
  check(classes >= 2, "DenseLogits '" + image_id + "': need >= 2 classes");
  check(height >= 1 && width >= 1, "DenseLogits '" + image_id + "': empty image");
  check(data.size() == static_cast<std::size_t>(classes) * height * width,
        "DenseLogits '" + image_id + "': data length != c*H*W");
  for (float v : data) {
    check(std::isfinite(v) || (std::isinf(v) && v < 0),
          "DenseLogits '" + image_id + "': value is NaN or +inf");
  }
}

BitMask::BitMask(std::uint32_t height, std::uint32_t width)
    : height_(height), width_(width), words_(word_count(height, width), 0) {}

std::size_t BitMask::popcount() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool BitMask::subset_of(const BitMask& other) const {
  if (height_ != other.height_ || width_ != other.width_) return false;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~other.words_[i]) return false;
  }
  return true;
}

void SoftMask::validate() const {
  check(h >= 1 && w >= 1, "SoftMask: empty grid");
  check(weights.size() == static_cast<std::size_t>(h) * w,
        "SoftMask: weight count != h*w");
  for (float v : weights) {
    check(v >= 0.0f && v <= 1.0f, "SoftMask: weight outside [0,1]");
  }
}

void ProposalSet::validate() const {
  check(height >= 1 && width >= 1, "ProposalSet '" + image_id + "': empty image");
  for (const auto& p : proposals) {
    check(p.mask.height() == height && p.mask.width() == width,
          "ProposalSet '" + image_id + "': mask dims differ from image dims");
    check(p.objectness >= 0.0f && p.objectness <= 1.0f,
          "ProposalSet '" + image_id + "': objectness outside [0,1]");
  }
}

void FeatureBank::validate() const {
  check(d >= 1, "FeatureBank: d must be >= 1");
  check(class_count >= 2, "FeatureBank: class_count must be >= 2");
  for (const auto& e : entries) {
    check(e.vector.size() == d, "FeatureBank: entry dim != d");
    check(e.class_id < class_count, "FeatureBank: entry class_id out of range");
    double sq = 0.0;
    for (float v : e.vector) {
      check(std::isfinite(v), "FeatureBank: non-finite entry value");
      sq += static_cast<double>(v) * v;
    }
    check(std::abs(std::sqrt(sq) - 1.0) <= 1e-4, "FeatureBank: entry is not unit-norm");
  }
}

void SegmentationMap::validate() const {
  check(labels.size() == static_cast<std::size_t>(height) * width,
        "SegmentationMap: label count != H*W");
}

void SegmentationMap::validate_labels(ClassId class_count, bool allow_unassigned,
                                      bool allow_ignore) const {
  for (ClassId l : labels) {
    if (l < class_count) continue;
    if (allow_unassigned && l == kUnassigned) continue;
    if (allow_ignore && l == kIgnore) continue;
    throw LabelRangeError("SegmentationMap: label " + std::to_string(l) +
                          " >= class_count " + std::to_string(class_count));
  }
}

BitMask class_mask(const SegmentationMap& seg, ClassId c) {
  BitMask m(seg.height, seg.width);
  auto words = m.words();
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    if (seg.labels[i] == c) words[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  return m;
}

}  // namespace segbank
