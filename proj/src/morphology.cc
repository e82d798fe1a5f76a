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

#include "segbank/morphology.h"

#include <span>
#include <string>
#include <vector>

#include "segbank/error.h"

namespace segbank::morphology {
namespace {

thread_local std::uint64_t g_erosion_calls = 0;

// Mask stored with every row starting on a word boundary, so that
// horizontal shifts never bleed between rows.
class RowBits {
 public:
  RowBits(std::uint32_t height, std::uint32_t width)
      : height_(height), width_(width), stride_((width + 63) / 64),
        bits_(static_cast<std::size_t>(height) * stride_, 0) {}

  static RowBits from_mask(const BitMask& m) {
    RowBits r(m.height(), m.width());
    const auto src = m.words();
    for (std::uint32_t y = 0; y < m.height(); ++y) {
      const std::size_t base = static_cast<std::size_t>(y) * m.width();
      auto dst = r.row(y);
      for (std::uint32_t x = 0; x < m.width(); x += 64) {
        // Gather 64 (or fewer) bits starting at linear index base + x.
        const std::size_t i = base + x;
        std::uint64_t v = src[i >> 6] >> (i & 63);
        if ((i & 63) != 0 && (i >> 6) + 1 < src.size()) {
          v |= src[(i >> 6) + 1] << (64 - (i & 63));
        }
        dst[x >> 6] = v;
      }
      r.clear_padding(y);
    }
    return r;
  }

  BitMask to_mask() const {
    BitMask m(height_, width_);
    auto dst = m.words();
    for (std::uint32_t y = 0; y < height_; ++y) {
      const std::size_t base = static_cast<std::size_t>(y) * width_;
      const auto src = row(y);
      for (std::uint32_t x = 0; x < width_; x += 64) {
        const std::uint32_t n = std::min<std::uint32_t>(64, width_ - x);
        const std::uint64_t v = n == 64 ? src[x >> 6] : src[x >> 6] & ((std::uint64_t{1} << n) - 1);
        const std::size_t i = base + x;
        dst[i >> 6] |= v << (i & 63);
        if ((i & 63) != 0 && (i & 63) + n > 64) dst[(i >> 6) + 1] |= v >> (64 - (i & 63));
      }
    }
    return m;
  }

  std::span<std::uint64_t> row(std::uint32_t y) {
    return {bits_.data() + static_cast<std::size_t>(y) * stride_, stride_};
  }
  std::span<const std::uint64_t> row(std::uint32_t y) const {
    return {bits_.data() + static_cast<std::size_t>(y) * stride_, stride_};
  }

  void clear_padding(std::uint32_t y) {
    if (width_ % 64 != 0) row(y)[stride_ - 1] &= (std::uint64_t{1} << (width_ % 64)) - 1;
  }

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::size_t stride() const { return stride_; }

 private:
  std::uint32_t height_;
  std::uint32_t width_;
  std::size_t stride_;
  std::vector<std::uint64_t> bits_;
};

// out[c] &= in[c + s]  (s > 0 reads to the right, s < 0 to the left; bits
// outside the row read as zero).
void and_shifted(std::span<const std::uint64_t> in, std::span<std::uint64_t> out, int s) {
  const std::size_t n = in.size();
  if (s == 0) {
    for (std::size_t i = 0; i < n; ++i) out[i] &= in[i];
    return;
  }
  const std::size_t mag = static_cast<std::size_t>(s > 0 ? s : -s);
  const std::size_t wshift = mag / 64;
  const unsigned bshift = static_cast<unsigned>(mag % 64);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    if (s > 0) {
      const std::size_t j = i + wshift;
      if (j < n) {
        v = bshift == 0 ? in[j] : in[j] >> bshift;
        if (bshift != 0 && j + 1 < n) v |= in[j + 1] << (64 - bshift);
      }
    } else if (i >= wshift) {
      const std::size_t j = i - wshift;
      v = bshift == 0 ? in[j] : in[j] << bshift;
      if (bshift != 0 && j >= 1) v |= in[j - 1] >> (64 - bshift);
    }
    out[i] &= v;
  }
}

RowBits erode_once(const RowBits& in, std::uint32_t radius) {
  const std::uint32_t h = in.height();
  RowBits horiz(h, in.width());
  for (std::uint32_t y = 0; y < h; ++y) {
    auto out = horiz.row(y);
    const auto src = in.row(y);
    std::copy(src.begin(), src.end(), out.begin());
    for (int s = 1; s <= static_cast<int>(radius); ++s) {
      and_shifted(src, out, s);
      and_shifted(src, out, -s);
    }
    horiz.clear_padding(y);
  }

  RowBits result(h, in.width());
  for (std::uint32_t y = 0; y < h; ++y) {
    if (y < radius || y + radius >= h) continue;  // window leaves the image
    auto out = result.row(y);
    const auto first = horiz.row(y - radius);
    std::copy(first.begin(), first.end(), out.begin());
    for (std::uint32_t yy = y - radius + 1; yy <= y + radius; ++yy) {
      const auto other = horiz.row(yy);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] &= other[i];
    }
  }
  return result;
}

}  // namespace

void MorphConfig::validate() const {
  if (kernel == 0 || kernel % 2 == 0) {
    throw ConfigError("morphology: kernel must be odd and >= 1, got " + std::to_string(kernel));
  }
}

BitMask erode(const BitMask& mask, const MorphConfig& cfg) {
  cfg.validate();
  ++g_erosion_calls;
  if (cfg.iterations == 0 || cfg.kernel == 1) return mask;
  const std::uint32_t radius = cfg.kernel / 2;
  RowBits cur = RowBits::from_mask(mask);
  for (std::uint32_t t = 0; t < cfg.iterations; ++t) {
    cur = erode_once(cur, radius);
  }
  return cur.to_mask();
}

BackoffResult erode_with_backoff(const BitMask& mask, const MorphConfig& cfg) {
  cfg.validate();
  if (!cfg.backoff) return {erode(mask, cfg), cfg.iterations};
  if (mask.empty()) return {mask, 0};
  std::uint32_t t = cfg.iterations;
  for (;;) {
    MorphConfig step = cfg;
    step.iterations = t;
    BitMask out = erode(mask, step);
    if (!out.empty() || t == 0) return {std::move(out), t};
    t /= 2;
  }
}

std::uint64_t erosion_invocations() { return g_erosion_calls; }

}  // namespace segbank::morphology
