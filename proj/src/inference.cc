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

#include "segbank/inference.h"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

#include "segbank/error.h"

namespace segbank::inference {
namespace {

struct Overlap {
  std::size_t inter = 0;
  std::size_t uni = 0;
};

Overlap overlap(const BitMask& a, const BitMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("mask_iou: masks have different dimensions");
  }
  Overlap o;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    o.inter += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    o.uni += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  return o;
}

// Visiting order shared by NMS and rasterization.
std::vector<std::size_t> priority_order(std::span<const ClassifiedProposal> props) {
  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (props[a].sem_conf != props[b].sem_conf) return props[a].sem_conf > props[b].sem_conf;
    return props[a].objectness > props[b].objectness;
  });
  return order;
}

}  // namespace

void InferConfig::validate() const {
  if (!(tau_obj >= 0.0f && tau_obj <= 1.0f)) throw ConfigError("tau_obj must lie in [0, 1]");
  if (!(tau_nms > 0.0f && tau_nms <= 1.0f)) throw ConfigError("tau_nms must lie in (0, 1]");
}

ProposalSet filter_proposals(const ProposalSet& props, float tau_obj) {
  ProposalSet out;
  out.image_id = props.image_id;
  out.height = props.height;
  out.width = props.width;
  for (const auto& p : props.proposals) {
    if (p.objectness >= tau_obj) out.proposals.push_back(p);
  }
  return out;
}

ClassifiedProposal classify_proposal(const BitMask& mask, float objectness, const FeatureMap& feat,
                                     const retrieval::Index& index, const softmask::AggConfig& agg,
                                     const retrieval::RetrievalConfig& cfg, ClassifyDetail* detail) {
  ClassifiedProposal out{mask, kBackground, kDegenerateConfidence, objectness};
  const SoftMask soft = softmask::project(mask, feat.h, feat.w, agg);
  const auto query = softmask::try_pool_features(feat, soft, agg);
  if (!query) {
    if (detail != nullptr) detail->degenerate = true;
    return out;
  }
  const auto found = index.search(*query, cfg.k);
  auto v = retrieval::vote(found.neighbors);
  out.class_id = v.class_id;
  out.sem_conf = v.confidence;
  if (detail != nullptr) {
    detail->degenerate = false;
    detail->short_list = found.short_list;
    detail->vote = std::move(v);
  }
  return out;
}

float mask_iou(const BitMask& a, const BitMask& b) {
  const Overlap o = overlap(a, b);
  if (o.uni == 0) return 0.0f;
  return static_cast<float>(static_cast<double>(o.inter) / static_cast<double>(o.uni));
}

namespace {

std::vector<bool> nms_keep(std::span<const ClassifiedProposal> props, float tau_nms) {
  const auto order = priority_order(props);
  std::vector<bool> keep(props.size(), false);
  std::map<ClassId, std::vector<std::size_t>> kept_by_class;
  for (std::size_t idx : order) {
    auto& kept = kept_by_class[props[idx].class_id];
    bool survives = true;
    for (std::size_t other : kept) {
      const Overlap o = overlap(props[idx].mask, props[other].mask);
      const double iou = o.uni == 0 ? 0.0 : static_cast<double>(o.inter) / static_cast<double>(o.uni);
      if (iou >= static_cast<double>(tau_nms)) {
        survives = false;
        break;
      }
    }
    if (survives) {
      kept.push_back(idx);
      keep[idx] = true;
    }
  }
  return keep;
}

}  // namespace

std::vector<ClassifiedProposal> nms_per_class(std::span<const ClassifiedProposal> props,
                                              float tau_nms) {
  const auto keep = nms_keep(props, tau_nms);
  std::vector<ClassifiedProposal> out;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (keep[i]) out.push_back(props[i]);
  }
  return out;
}

SegmentationMap rasterize(std::span<const ClassifiedProposal> props, std::uint32_t height,
                          std::uint32_t width, bool background_fill) {
  SegmentationMap seg(height, width, kUnassigned);
  BitMask assigned(height, width);
  auto taken = assigned.words();
  for (std::size_t idx : priority_order(props)) {
    const auto& p = props[idx];
    if (p.mask.height() != height || p.mask.width() != width) {
      throw ShapeError("rasterize: proposal mask dims differ from the image");
    }
    const auto words = p.mask.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::uint64_t fresh = words[w] & ~taken[w];
      taken[w] |= fresh;
      while (fresh != 0) {
        const int bit = std::countr_zero(fresh);
        seg.labels[w * 64 + static_cast<std::size_t>(bit)] = p.class_id;
        fresh &= fresh - 1;
      }
    }
  }
  if (background_fill) {
    std::replace(seg.labels.begin(), seg.labels.end(), kUnassigned, kBackground);
  }
  return seg;
}

SegmentationMap segment_image(const FeatureMap& feat, const ProposalSet& props,
                              const retrieval::Index& index, const PipelineConfig& cfg,
                              std::vector<ProposalLog>* log) {
  cfg.infer.validate();
  cfg.agg.validate();
  for (const auto& p : props.proposals) {
    if (p.mask.height() != props.height || p.mask.width() != props.width) {
      throw ShapeError("segment_image: proposal mask dims differ from the image");
    }
  }

  const std::size_t log_base = log != nullptr ? log->size() : 0;
  std::vector<ClassifiedProposal> classified;
  for (std::uint32_t i = 0; i < props.proposals.size(); ++i) {
    const auto& p = props.proposals[i];
    if (p.objectness < cfg.infer.tau_obj || p.mask.empty()) continue;
    ClassifyDetail detail;
    classified.push_back(
        classify_proposal(p.mask, p.objectness, feat, index, cfg.agg, cfg.retrieval, &detail));
    if (log != nullptr) {
      const auto& c = classified.back();
      log->push_back(ProposalLog{i, c.class_id, c.sem_conf, c.objectness, detail.degenerate, false,
                                 detail.vote.votes});
    }
  }

  const auto keep = nms_keep(classified, cfg.infer.tau_nms);
  std::vector<ClassifiedProposal> survivors;
  for (std::size_t i = 0; i < classified.size(); ++i) {
    if (!keep[i]) continue;
    survivors.push_back(std::move(classified[i]));
    if (log != nullptr) (*log)[log_base + i].kept_by_nms = true;
  }
  return rasterize(survivors, props.height, props.width, cfg.infer.background_fill);
}

std::string format_log(const std::string& image_id, std::span<const ProposalLog> log) {
  std::ostringstream s;
  for (const auto& l : log) {
    s << "proposal image=" << image_id << " index=" << l.proposal << " class=" << l.class_id
      << " sem_conf=" << l.sem_conf << " objectness=" << l.objectness
      << " nms=" << (l.kept_by_nms ? "kept" : "suppressed");
    if (l.degenerate) s << " degenerate=1";
    s << " votes=";
    bool first = true;
    for (const auto& [c, n] : l.votes) {
      s << (first ? "" : ",") << c << ":" << n;
      first = false;
    }
    s << "\n";
  }
  return s.str();
}

}  // namespace segbank::inference
