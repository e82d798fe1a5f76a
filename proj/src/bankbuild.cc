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

#include "segbank/bankbuild.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "segbank/error.h"
#include "segbank/parallel.h"

namespace segbank::bankbuild {
namespace {

// 8-connected components in raster order of their first pixel.
std::vector<BitMask> connected_components(const BitMask& mask) {
  const std::uint32_t H = mask.height();
  const std::uint32_t W = mask.width();
  std::vector<std::int32_t> label(mask.size(), -1);
  std::vector<BitMask> out;
  std::vector<std::size_t> stack;
  for (std::uint32_t r = 0; r < H; ++r) {
    for (std::uint32_t c = 0; c < W; ++c) {
      const std::size_t start = static_cast<std::size_t>(r) * W + c;
      if (!mask.get(r, c) || label[start] >= 0) continue;
      const auto id = static_cast<std::int32_t>(out.size());
      BitMask comp(H, W);
      stack.push_back(start);
      label[start] = id;
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const auto pr = static_cast<std::int64_t>(p / W);
        const auto pc = static_cast<std::int64_t>(p % W);
        comp.set(static_cast<std::uint32_t>(pr), static_cast<std::uint32_t>(pc));
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const std::int64_t nr = pr + dr;
            const std::int64_t nc = pc + dc;
            if (nr < 0 || nc < 0 || nr >= H || nc >= W) continue;
            const std::size_t q = static_cast<std::size_t>(nr) * W + static_cast<std::size_t>(nc);
            if (label[q] >= 0 || !mask.get(static_cast<std::uint32_t>(nr), static_cast<std::uint32_t>(nc))) {
              continue;
            }
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct ImageResult {
  Extraction extraction;
};

}  // namespace

void PurifyConfig::validate() const {
  if (!(alpha_pct >= 0.0f && alpha_pct < 100.0f)) {
    throw ConfigError("purify: alpha must lie in [0, 100), got " + std::to_string(alpha_pct));
  }
}

DenseLogits filter_logits(const DenseLogits& logits, std::span<const ClassId> allowed) {
  std::vector<bool> keep(logits.classes, false);
  keep[kBackground] = true;
  for (ClassId c : allowed) {
    if (c >= logits.classes) {
      throw LabelRangeError("filter_logits: label " + std::to_string(c) + " >= class count " +
                            std::to_string(logits.classes));
    }
    keep[c] = true;
  }
  DenseLogits out = logits;
  const std::size_t plane = static_cast<std::size_t>(logits.height) * logits.width;
  for (std::uint32_t c = 0; c < logits.classes; ++c) {
    if (keep[c]) continue;
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                -std::numeric_limits<float>::infinity());
  }
  return out;
}

SegmentationMap argmax_map(const DenseLogits& logits) {
  SegmentationMap seg(logits.height, logits.width, kBackground);
  const std::size_t plane = static_cast<std::size_t>(logits.height) * logits.width;
  for (std::size_t p = 0; p < plane; ++p) {
    float best = -std::numeric_limits<float>::infinity();
    std::int32_t arg = -1;
    for (std::uint32_t c = 0; c < logits.classes; ++c) {
      const float v = logits.data[c * plane + p];
      if (std::isfinite(v) && (arg < 0 || v > best)) {
        best = v;
        arg = static_cast<std::int32_t>(c);
      }
    }
    if (arg < 0) {
      throw InvalidLogits("argmax_map: image '" + logits.image_id + "' pixel " + std::to_string(p) +
                          " has no finite logit");
    }
    seg.labels[p] = static_cast<ClassId>(arg);
  }
  return seg;
}

Extraction extract_prototypes(const SegmentationMap& seg, const FeatureMap& feat,
                              std::span<const ClassId> labels,
                              const morphology::MorphConfig& morph,
                              const softmask::AggConfig& agg, const ExtractConfig& extract) {
  if (feat.h > seg.height || feat.w > seg.width) {
    throw ShapeError("extract_prototypes: feature grid " + std::to_string(feat.h) + "x" +
                     std::to_string(feat.w) + " is finer than the " + std::to_string(seg.height) +
                     "x" + std::to_string(seg.width) + " label map");
  }
  const std::set<ClassId> allowed(labels.begin(), labels.end());
  std::set<ClassId> present(seg.labels.begin(), seg.labels.end());

  Extraction out;
  for (ClassId c : present) {
    if (c == kUnassigned || c == kIgnore) continue;
    if (c != kBackground && !allowed.contains(c)) continue;

    const BitMask raw = class_mask(seg, c);
    std::vector<BitMask> regions;
    if (extract.split_components) {
      regions = connected_components(raw);
    } else {
      regions.push_back(raw);
    }

    morphology::MorphConfig m = morph;
    if (c == kBackground && !extract.erode_background) m.iterations = 0;

    for (std::uint32_t k = 0; k < regions.size(); ++k) {
      InstanceLog entry_log{feat.image_id, c, k, regions[k].popcount(), 0, 0, false};
      auto [pure, iters] = morphology::erode_with_backoff(regions[k], m);
      entry_log.effective_iterations = iters;
      entry_log.kept_pixels = pure.popcount();
      const SoftMask soft = softmask::project(pure, feat.h, feat.w, agg);
      auto vec = softmask::try_pool_features(feat, soft, agg);
      if (!vec) {
        entry_log.degenerate = true;
        ++out.degenerate;
      } else {
        out.entries.push_back(BankEntry{std::move(*vec), c, feat.image_id});
      }
      out.log.push_back(std::move(entry_log));
    }
  }
  return out;
}

ClassPrototype class_prototype(std::span<const BankEntry> entries) {
  ClassPrototype proto;
  if (entries.empty()) return proto;
  proto.class_id = entries.front().class_id;
  proto.member_count = static_cast<std::uint32_t>(entries.size());
  const std::size_t d = entries.front().vector.size();
  std::vector<double> acc(d, 0.0);
  for (const auto& e : entries) {
    for (std::size_t k = 0; k < d; ++k) acc[k] += e.vector[k];
  }
  proto.centroid.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    proto.centroid[k] = static_cast<float>(acc[k] / static_cast<double>(entries.size()));
  }
  return proto;
}

std::size_t drop_count(std::size_t n, float alpha_pct) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(alpha_pct) * static_cast<double>(n) / 100.0));
}

std::vector<BankEntry> purify_class(std::vector<BankEntry> entries, const PurifyConfig& cfg) {
  cfg.validate();
  if (entries.empty()) return entries;
  const ClassId c = entries.front().class_id;
  for (const auto& e : entries) {
    if (e.class_id != c) throw ValidationError("purify_class: entries span several classes");
  }
  if (c == kBackground && cfg.exempt_background) return entries;

  const std::size_t n = entries.size();
  const std::size_t drop = drop_count(n, cfg.alpha_pct);
  if (drop == 0) return entries;

  // Mean in double; float centroid would perturb near-tied distances.
  const std::size_t d = entries.front().vector.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : entries) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += e.vector[k];
  }
  for (double& v : mean) v /= static_cast<double>(n);

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = entries[i].vector[k] - mean[k];
      sq += diff * diff;
    }
    dist[i] = std::sqrt(sq);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;

  std::vector<BankEntry> kept;
  kept.reserve(n - drop);
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) kept.push_back(std::move(entries[i]));
  }
  return kept;
}

std::uint64_t config_fingerprint(const morphology::MorphConfig& morph, const PurifyConfig& purify,
                                 std::string_view backbone) {
  std::ostringstream s;
  s << "k=" << morph.kernel << ";t=" << morph.iterations << ";alpha=" << purify.alpha_pct
    << ";backbone=" << backbone;
  return fnv1a(s.str());
}

BuildResult build_bank(const DatasetManifest& manifest, const BuildConfig& cfg) {
  cfg.morph.validate();
  cfg.agg.validate();
  cfg.purify.validate();

  const auto train = manifest.split("train");
  std::string missing;
  for (const ImageRecord* img : train) {
    if (img->features.empty() || (img->logits.empty() && img->seg.empty())) {
      missing += (missing.empty() ? "" : ", ") + img->image_id;
    }
  }
  if (!missing.empty()) {
    throw MissingInput("build_bank: train images lack features or logits/seg: " + missing);
  }

  std::vector<Extraction> per_image(train.size());
  std::vector<std::uint32_t> dims(train.size(), 0);
  parallel_for(train.size(), cfg.threads, [&](std::size_t i) {
    const ImageRecord& img = *train[i];
    FeatureMap feat = read_blob<FeatureMap>(manifest.resolve(img.features));
    feat.image_id = img.image_id;
    SegmentationMap seg;
    if (!img.logits.empty()) {
      const auto logits = read_blob<DenseLogits>(manifest.resolve(img.logits));
      if (logits.classes != manifest.class_count()) {
        throw ShapeError("build_bank: image '" + img.image_id + "' logits have " +
                         std::to_string(logits.classes) + " classes, manifest declares " +
                         std::to_string(manifest.class_count()));
      }
      seg = argmax_map(filter_logits(logits, img.labels));
    } else {
      seg = read_blob<SegmentationMap>(manifest.resolve(img.seg));
      seg.validate_labels(manifest.class_count(), false, true);
    }
    dims[i] = feat.d;
    per_image[i] = extract_prototypes(seg, feat, img.labels, cfg.morph, cfg.agg, cfg.extract);
  });

  BuildResult result;
  const ClassId classes = manifest.class_count();
  result.bank.class_count = classes;
  result.bank.config_fingerprint = config_fingerprint(cfg.morph, cfg.purify, manifest.backbone);
  result.class_stats.resize(classes);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (result.bank.d == 0) result.bank.d = dims[i];
    if (dims[i] != result.bank.d) {
      throw ShapeError("build_bank: image '" + train[i]->image_id + "' has feature dim " +
                       std::to_string(dims[i]) + ", expected " + std::to_string(result.bank.d));
    }
  }

  std::vector<std::vector<BankEntry>> by_class(classes);
  for (auto& ex : per_image) {
    for (auto& e : ex.entries) by_class[e.class_id].push_back(std::move(e));
    for (auto& l : ex.log) result.instances.push_back(std::move(l));
  }

  std::set<ClassId> labelled;
  for (const ImageRecord* img : train) labelled.insert(img->labels.begin(), img->labels.end());

  for (ClassId c = 0; c < classes; ++c) {
    result.class_stats[c].extracted = by_class[c].size();
    auto kept = purify_class(std::move(by_class[c]), cfg.purify);
    result.class_stats[c].kept = kept.size();
    if (kept.empty() && labelled.contains(c)) {
      result.warnings.push_back("class " + std::to_string(c) + " (" + manifest.class_names[c] +
                                ") has no surviving bank entries");
    }
    for (auto& e : kept) result.bank.entries.push_back(std::move(e));
  }
  return result;
}

std::string BuildResult::log_text() const {
  std::ostringstream s;
  for (const auto& l : instances) {
    s << "instance image=" << l.image_id << " class=" << l.class_id << " component=" << l.component
      << " raw_px=" << l.raw_pixels << " kept_px=" << l.kept_pixels
      << " effective_t=" << l.effective_iterations
      << " status=" << (l.degenerate ? "degenerate" : "ok") << "\n";
  }
  for (std::size_t c = 0; c < class_stats.size(); ++c) {
    s << "class " << c << " extracted=" << class_stats[c].extracted << " kept=" << class_stats[c].kept
      << "\n";
  }
  for (const auto& w : warnings) s << "warning " << w << "\n";
  s << "bank entries=" << bank.entries.size() << " d=" << bank.d << " fingerprint=" << std::hex
    << bank.config_fingerprint << std::dec << "\n";
  return s.str();
}

}  // namespace segbank::bankbuild
