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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segbank/types.h"

namespace segbank::eval {

// Rows are ground truth, columns are prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(ClassId classes);

  // Adds one image. Ground-truth kIgnore pixels are skipped; a kUnassigned
  // prediction counts as background. Throws ShapeError on a size mismatch
  // and LabelRangeError on an out-of-range label.
  void accumulate(const SegmentationMap& gt, const SegmentationMap& pred);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(ClassId gt, ClassId pred) const {
    return counts_[static_cast<std::size_t>(gt) * classes_ + pred];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(ClassId gt) const;
  std::uint64_t col_sum(ClassId pred) const;
  ClassId classes() const { return classes_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  ClassId classes_;
  std::vector<std::uint64_t> counts_;
};

struct MiouResult {
  // nullopt for classes absent from both ground truth and prediction; those
  // are left out of the mean.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

// Throws MetricError when every class has an empty union.
MiouResult miou(const ConfusionMatrix& cm);

// UTF-8 JSON report (schema in docs/report.md).
std::string report_json(const ConfusionMatrix& cm, const MiouResult& result,
                        const std::vector<std::string>& class_names, std::size_t images);

}  // namespace segbank::eval
