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

// Per-image labeling of class-agnostic proposals: objectness filtering,
// retrieval-based classification of raw (un-eroded) masks, class-specific NMS
// and confidence-priority rasterization.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segbank/retrieval.h"
#include "segbank/softmask.h"
#include "segbank/types.h"

namespace segbank::inference {

struct InferConfig {
  float tau_obj = 0.5f;
  float tau_nms = 0.5f;
  // Pixels no proposal claims become background.
  bool background_fill = true;

  void validate() const;
};

// Confidence given to proposals whose pooled query is degenerate; loses
// every rasterization tie.
inline constexpr float kDegenerateConfidence = -1.0f;

struct ClassifiedProposal {
  BitMask mask;
  ClassId class_id = 0;
  float sem_conf = 0.0f;
  float objectness = 0.0f;
};

// Keeps proposals with objectness >= tau_obj, in input order.
ProposalSet filter_proposals(const ProposalSet& props, float tau_obj);

struct ClassifyDetail {
  retrieval::VoteResult vote;
  bool degenerate = false;
  bool short_list = false;
};

// Pools the raw mask over the feature grid (no erosion), retrieves the top
// cfg.k bank entries and votes. A degenerate pool yields background with
// kDegenerateConfidence.
ClassifiedProposal classify_proposal(const BitMask& mask, float objectness, const FeatureMap& feat,
                                     const retrieval::Index& index, const softmask::AggConfig& agg,
                                     const retrieval::RetrievalConfig& cfg,
                                     ClassifyDetail* detail = nullptr);

// |a & b| / |a | b|, 0 for an empty union. Throws ShapeError on mismatched
// dimensions.
float mask_iou(const BitMask& a, const BitMask& b);

// Greedy NMS run separately inside each predicted class. Candidates are
// visited by (sem_conf desc, objectness desc, input position asc); one
// survives iff its IoU with every kept same-class mask is < tau_nms.
// Survivors are returned in input order.
std::vector<ClassifiedProposal> nms_per_class(std::span<const ClassifiedProposal> props,
                                              float tau_nms);

// First-come-first-served painting in (sem_conf desc, objectness desc,
// input position asc) order: a proposal claims only still-unassigned pixels.
SegmentationMap rasterize(std::span<const ClassifiedProposal> props, std::uint32_t height,
                          std::uint32_t width, bool background_fill);

struct PipelineConfig {
  InferConfig infer;
  softmask::AggConfig agg;
  retrieval::RetrievalConfig retrieval;
};

// One line per classified proposal, for the optional debug log.
struct ProposalLog {
  std::uint32_t proposal = 0;
  ClassId class_id = 0;
  float sem_conf = 0.0f;
  float objectness = 0.0f;
  bool degenerate = false;
  bool kept_by_nms = false;
  std::map<ClassId, std::uint32_t> votes;
};

// filter_proposals -> classify_proposal -> nms_per_class -> rasterize.
// Empty masks are dropped before classification.
SegmentationMap segment_image(const FeatureMap& feat, const ProposalSet& props,
                              const retrieval::Index& index, const PipelineConfig& cfg,
                              std::vector<ProposalLog>* log = nullptr);

std::string format_log(const std::string& image_id, std::span<const ProposalLog> log);

}  // namespace segbank::inference
