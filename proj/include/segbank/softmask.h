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

// Soft-masked feature aggregation: pixel masks are projected onto the feature
// grid by exact area coverage, and the covered patch features are pooled into
// one unit-norm descriptor.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "segbank/types.h"

namespace segbank::softmask {

enum class Projection {
  kArea,
  // Cell weight is 1 when area coverage >= 0.5, else 0. Baseline for
  // ablations only.
  kHardThreshold,
};

struct AggConfig {
  float epsilon = 1e-6f;
  Projection projection = Projection::kArea;

  void validate() const;
};

// Cell (x, y) covers the pixel rectangle [x*H/h, (x+1)*H/h) x [y*W/w, (y+1)*W/w)
// and gets the fraction of that rectangle covered by the mask. Fractional
// pixel overlaps are computed exactly in integer arithmetic.
std::vector<double> area_coverage(const BitMask& mask, std::uint32_t h, std::uint32_t w);

// area_coverage rounded to the f32 SoftMask record.
SoftMask downsample_area(const BitMask& mask, std::uint32_t h, std::uint32_t w);

// downsample_area followed by the projection rule in `cfg`.
SoftMask project(const BitMask& mask, std::uint32_t h, std::uint32_t w, const AggConfig& cfg);

// Normalize(sum W*F / (sum W + eps)). Returns nullopt when sum W < eps or the
// pooled vector is zero, since a zero prototype cannot be normalized.
std::optional<std::vector<float>> try_pool_features(const FeatureMap& feat, const SoftMask& soft,
                                                    const AggConfig& cfg);

// As try_pool_features, but throws DegenerateMask instead of returning nullopt.
std::vector<float> pool_features(const FeatureMap& feat, const SoftMask& soft, const AggConfig& cfg);

}  // namespace segbank::softmask
