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

#include "segbank/softmask.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "segbank/error.h"

namespace segbank::softmask {
namespace {

// Work in coordinates scaled by the grid size: pixel i spans
// [i*cells, (i+1)*cells) and cell x spans [x*pixels, (x+1)*pixels), so every
// overlap is an integer.
struct Span1D {
  std::uint32_t first_pixel;
  std::uint32_t last_pixel;  // inclusive
};

Span1D cell_span(std::uint32_t x, std::uint32_t pixels, std::uint32_t cells) {
  const std::uint64_t lo = static_cast<std::uint64_t>(x) * pixels;
  const std::uint64_t hi = lo + pixels;
  return {static_cast<std::uint32_t>(lo / cells), static_cast<std::uint32_t>((hi - 1) / cells)};
}

std::uint64_t overlap(std::uint32_t x, std::uint32_t i, std::uint32_t pixels, std::uint32_t cells) {
  const std::uint64_t c_lo = static_cast<std::uint64_t>(x) * pixels;
  const std::uint64_t c_hi = c_lo + pixels;
  const std::uint64_t p_lo = static_cast<std::uint64_t>(i) * cells;
  const std::uint64_t p_hi = p_lo + cells;
  const std::uint64_t lo = std::max(c_lo, p_lo);
  const std::uint64_t hi = std::min(c_hi, p_hi);
  return hi > lo ? hi - lo : 0;
}

}  // namespace

void AggConfig::validate() const {
  if (!(epsilon > 0.0f)) throw ConfigError("softmask: epsilon must be > 0");
}

std::vector<double> area_coverage(const BitMask& mask, std::uint32_t h, std::uint32_t w) {
  if (h == 0 || w == 0) throw ShapeError("downsample_area: grid dims must be >= 1");
  const std::uint32_t H = mask.height();
  const std::uint32_t W = mask.width();
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  if (H == 0 || W == 0) return out;

  // Column overlaps are the same for every row; precompute per cell column.
  std::vector<Span1D> col_spans(w);
  std::vector<std::vector<std::uint64_t>> col_weights(w);
  for (std::uint32_t y = 0; y < w; ++y) {
    col_spans[y] = cell_span(y, W, w);
    for (std::uint32_t j = col_spans[y].first_pixel; j <= col_spans[y].last_pixel; ++j) {
      col_weights[y].push_back(overlap(y, j, W, w));
    }
  }

  std::vector<std::uint64_t> covered(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::uint64_t> row_sums(w);
  for (std::uint32_t x = 0; x < h; ++x) {
    const Span1D rows = cell_span(x, H, h);
    for (std::uint32_t i = rows.first_pixel; i <= rows.last_pixel; ++i) {
      const std::uint64_t row_w = overlap(x, i, H, h);
      if (row_w == 0) continue;
      for (std::uint32_t y = 0; y < w; ++y) {
        std::uint64_t s = 0;
        const auto& cw = col_weights[y];
        for (std::uint32_t j = col_spans[y].first_pixel; j <= col_spans[y].last_pixel; ++j) {
          if (mask.get(i, j)) s += cw[j - col_spans[y].first_pixel];
        }
        covered[static_cast<std::size_t>(x) * w + y] += row_w * s;
      }
    }
  }

  const double cell_area = static_cast<double>(H) * static_cast<double>(W);
  for (std::size_t k = 0; k < covered.size(); ++k) {
    out[k] = std::min(1.0, static_cast<double>(covered[k]) / cell_area);
  }
  return out;
}

SoftMask downsample_area(const BitMask& mask, std::uint32_t h, std::uint32_t w) {
  const auto exact = area_coverage(mask, h, w);
  return {h, w, std::vector<float>(exact.begin(), exact.end())};
}

SoftMask project(const BitMask& mask, std::uint32_t h, std::uint32_t w, const AggConfig& cfg) {
  SoftMask soft = downsample_area(mask, h, w);
  if (cfg.projection == Projection::kHardThreshold) {
    for (float& v : soft.weights) v = v >= 0.5f ? 1.0f : 0.0f;
  }
  return soft;
}

std::optional<std::vector<float>> try_pool_features(const FeatureMap& feat, const SoftMask& soft,
                                                    const AggConfig& cfg) {
  cfg.validate();
  if (soft.h != feat.h || soft.w != feat.w) {
    throw ShapeError("pool_features: soft mask is " + std::to_string(soft.h) + "x" +
                     std::to_string(soft.w) + " but feature grid is " + std::to_string(feat.h) +
                     "x" + std::to_string(feat.w));
  }
  const std::uint32_t d = feat.d;
  std::vector<double> acc(d, 0.0);
  double mass = 0.0;
  for (std::uint32_t x = 0; x < feat.h; ++x) {
    for (std::uint32_t y = 0; y < feat.w; ++y) {
      const double wgt = soft.at(x, y);
      if (wgt == 0.0) continue;
      mass += wgt;
      const auto f = feat.cell(x, y);
      for (std::uint32_t k = 0; k < d; ++k) acc[k] += wgt * f[k];
    }
  }
  if (mass < cfg.epsilon) return std::nullopt;

  const double denom = mass + cfg.epsilon;
  double sq = 0.0;
  for (double& v : acc) {
    v /= denom;
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) return std::nullopt;
  std::vector<float> out(d);
  for (std::uint32_t k = 0; k < d; ++k) out[k] = static_cast<float>(acc[k] / norm);
  return out;
}

std::vector<float> pool_features(const FeatureMap& feat, const SoftMask& soft, const AggConfig& cfg) {
  auto v = try_pool_features(feat, soft, cfg);
  if (!v) throw DegenerateMask("pool_features: total mask weight below epsilon");
  return std::move(*v);
}

}  // namespace segbank::softmask
