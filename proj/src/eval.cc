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

#include "segbank/eval.h"

#include <string>

#include "json.hpp"
#include "segbank/error.h"

namespace segbank::eval {

ConfusionMatrix::ConfusionMatrix(ClassId classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {}

void ConfusionMatrix::accumulate(const SegmentationMap& gt, const SegmentationMap& pred) {
  if (gt.height != pred.height || gt.width != pred.width || gt.labels.size() != pred.labels.size()) {
    throw ShapeError("accumulate: ground truth is " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width) + " but prediction is " + std::to_string(pred.height) +
                     "x" + std::to_string(pred.width));
  }
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const ClassId g = gt.labels[i];
    if (g == kIgnore) continue;
    ClassId p = pred.labels[i];
    if (p == kUnassigned) p = kBackground;
    if (g >= classes_ || p >= classes_) {
      throw LabelRangeError("accumulate: label " + std::to_string(g >= classes_ ? g : p) +
                            " >= class count " + std::to_string(classes_));
    }
    ++counts_[static_cast<std::size_t>(g) * classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("merge: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(ClassId gt) const {
  std::uint64_t t = 0;
  for (ClassId p = 0; p < classes_; ++p) t += at(gt, p);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(ClassId pred) const {
  std::uint64_t t = 0;
  for (ClassId g = 0; g < classes_; ++g) t += at(g, pred);
  return t;
}

MiouResult miou(const ConfusionMatrix& cm) {
  MiouResult r;
  r.per_class.resize(cm.classes());
  double sum = 0.0;
  std::size_t valid = 0;
  for (ClassId c = 0; c < cm.classes(); ++c) {
    const std::uint64_t inter = cm.at(c, c);
    const std::uint64_t uni = cm.row_sum(c) + cm.col_sum(c) - inter;
    if (uni == 0) continue;
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    r.per_class[c] = iou;
    sum += iou;
    ++valid;
  }
  if (valid == 0) throw MetricError("miou: no class has any ground-truth or predicted pixel");
  r.mean = sum / static_cast<double>(valid);
  return r;
}

std::string report_json(const ConfusionMatrix& cm, const MiouResult& result,
                        const std::vector<std::string>& class_names, std::size_t images) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["images"] = images;
  j["total_pixels"] = cm.total();
  std::uint64_t correct = 0;
  for (ClassId c = 0; c < cm.classes(); ++c) correct += cm.at(c, c);
  j["pixel_accuracy"] =
      cm.total() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(cm.total());
  j["miou"] = result.mean;
  ordered_json classes = ordered_json::array();
  for (ClassId c = 0; c < cm.classes(); ++c) {
    ordered_json e;
    e["id"] = c;
    e["name"] = c < class_names.size() ? class_names[c] : std::to_string(c);
    if (result.per_class[c]) {
      e["iou"] = *result.per_class[c];
    } else {
      e["iou"] = nullptr;
    }
    e["gt_pixels"] = cm.row_sum(c);
    e["pred_pixels"] = cm.col_sum(c);
    e["intersection"] = cm.at(c, c);
    classes.push_back(std::move(e));
  }
  j["classes"] = std::move(classes);
  ordered_json matrix = ordered_json::array();
  for (ClassId g = 0; g < cm.classes(); ++g) {
    ordered_json row = ordered_json::array();
    for (ClassId p = 0; p < cm.classes(); ++p) row.push_back(cm.at(g, p));
    matrix.push_back(std::move(row));
  }
  j["confusion_matrix"] = std::move(matrix);
  return j.dump(2) + "\n";
}

}  // namespace segbank::eval
