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

// Offline construction of the feature bank: label-restricted pseudo-masks,
// boundary erosion, soft pooling of one prototype per (image, class), and
// distance-quantile outlier rejection per foreground class.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segbank/io.h"
#include "segbank/morphology.h"
#include "segbank/softmask.h"
#include "segbank/types.h"

namespace segbank::bankbuild {

struct PurifyConfig {
  // Percentage of farthest-from-centroid prototypes dropped per class.
  float alpha_pct = 25.0f;
  bool exempt_background = true;

  void validate() const;
};

struct ExtractConfig {
  // Apply erosion to the background region too.
  bool erode_background = true;
  // One prototype per 8-connected component instead of per (image, class).
  bool split_components = false;
};

struct ClassPrototype {
  ClassId class_id = 0;
  std::vector<float> centroid;
  std::uint32_t member_count = 0;
};

// Sets every channel outside allowed + {background} to -inf. Throws
// LabelRangeError for ids >= logits.classes.
DenseLogits filter_logits(const DenseLogits& logits, std::span<const ClassId> allowed);

// Per-pixel argmax; ties go to the smaller class id. Throws InvalidLogits on
// a pixel with no finite logit.
SegmentationMap argmax_map(const DenseLogits& logits);

// What happened to one candidate region during extraction.
struct InstanceLog {
  std::string image_id;
  ClassId class_id = 0;
  std::uint32_t component = 0;
  std::size_t raw_pixels = 0;
  std::size_t kept_pixels = 0;
  std::uint32_t effective_iterations = 0;
  bool degenerate = false;
};

struct Extraction {
  std::vector<BankEntry> entries;
  std::vector<InstanceLog> log;
  std::size_t degenerate = 0;
};

Extraction extract_prototypes(const SegmentationMap& seg, const FeatureMap& feat,
                              std::span<const ClassId> labels,
                              const morphology::MorphConfig& morph,
                              const softmask::AggConfig& agg, const ExtractConfig& extract = {});

// Mean of the entry vectors (not re-normalized).
ClassPrototype class_prototype(std::span<const BankEntry> entries);

// floor(alpha * n / 100).
std::size_t drop_count(std::size_t n, float alpha_pct);

// Drops the drop_count(n) entries farthest from the class mean, breaking
// distance ties toward the earlier entry. Survivors keep their input order.
// Background is returned untouched when cfg.exempt_background is set.
std::vector<BankEntry> purify_class(std::vector<BankEntry> entries, const PurifyConfig& cfg);

struct BuildConfig {
  morphology::MorphConfig morph;
  softmask::AggConfig agg;
  PurifyConfig purify;
  ExtractConfig extract;
  unsigned threads = 1;
};

struct ClassStats {
  std::size_t extracted = 0;
  std::size_t kept = 0;
};

struct BuildResult {
  FeatureBank bank;
  std::vector<InstanceLog> instances;
  std::vector<ClassStats> class_stats;
  std::vector<std::string> warnings;

  // Human-readable build log: one line per instance, then per-class counts.
  std::string log_text() const;
};

std::uint64_t config_fingerprint(const morphology::MorphConfig& morph, const PurifyConfig& purify,
                                 std::string_view backbone);

// Builds the bank from every "train" image of the manifest. Images must
// provide features plus logits or a precomputed seg map; otherwise
// MissingInput lists the offending ids.
BuildResult build_bank(const DatasetManifest& manifest, const BuildConfig& cfg);

}  // namespace segbank::bankbuild
