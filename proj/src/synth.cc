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

#include "segbank/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "segbank/error.h"

namespace segbank::synth {
namespace {

constexpr int kPlacementRetries = 200;
constexpr int kLayoutRetries = 20;
constexpr int kCentroidRetries = 1000;

// Distribution code is written out here instead of using <random>
// distributions, whose output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(engine_() % span);
  }
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Shape {
  bool disk = false;
  ClassId cls = 0;
  // Rectangle: rows [top, bottom), cols [left, right).
  int top = 0, left = 0, bottom = 0, right = 0;
  // Disk: center in pixel coordinates and radius.
  double cy = 0, cx = 0, radius = 0;

  // `grow` enlarges (> 0) or shrinks (< 0) the shape by that many pixels.
  bool contains(int r, int c, int grow = 0) const {
    if (disk) {
      const double dy = r + 0.5 - cy;
      const double dx = c + 0.5 - cx;
      const double rad = radius + grow;
      return rad > 0 && dy * dy + dx * dx <= rad * rad;
    }
    return r >= top - grow && r < bottom + grow && c >= left - grow && c < right + grow;
  }
};

std::vector<float> normalized(std::vector<double> v) {
  double sq = 0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

std::vector<std::vector<float>> draw_centroids(const SynthConfig& cfg, Rng& rng) {
  const double max_cos = std::cos(cfg.centroid_min_angle_deg * std::numbers::pi / 180.0);
  std::vector<std::vector<float>> out;
  for (std::uint32_t c = 0; c < cfg.classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kCentroidRetries && !placed; ++attempt) {
      std::vector<double> g(cfg.d);
      for (double& x : g) x = rng.gaussian();
      auto cand = normalized(std::move(g));
      bool ok = true;
      for (const auto& prev : out) {
        double dot = 0;
        for (std::uint32_t k = 0; k < cfg.d; ++k) dot += static_cast<double>(cand[k]) * prev[k];
        if (dot > max_cos) {
          ok = false;
          break;
        }
      }
      if (ok) {
        out.push_back(std::move(cand));
        placed = true;
      }
    }
    if (!placed) {
      // Orthonormal basis: every pair is 90 degrees apart.
      if (cfg.d < cfg.classes) {
        throw GenerationError("synth: cannot place " + std::to_string(cfg.classes) +
                              " centroids at the requested angle in d=" + std::to_string(cfg.d));
      }
      out.assign(cfg.classes, std::vector<float>(cfg.d, 0.0f));
      for (std::uint32_t k = 0; k < cfg.classes; ++k) out[k][k] = 1.0f;
      return out;
    }
  }
  return out;
}

std::vector<Shape> place_shapes(const SynthConfig& cfg, Rng& rng, const std::string& image_id) {
  const int px = static_cast<int>(cfg.image_px);
  const auto count = std::min<std::int64_t>(rng.range(cfg.shapes_min, cfg.shapes_max), cfg.classes - 1);
  // One shape per class: draw foreground classes without replacement.
  std::vector<ClassId> pool(cfg.classes - 1);
  for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = static_cast<ClassId>(k + 1);
  for (std::int64_t s = 0; s < count; ++s) {
    const auto j = static_cast<std::size_t>(rng.range(s, static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
  }
  for (int layout = 0; layout < kLayoutRetries; ++layout) {
    std::vector<Shape> shapes;
    std::vector<bool> taken(static_cast<std::size_t>(px) * px, false);
    for (std::int64_t s = 0; s < count; ++s) {
      Shape shape;
      shape.cls = pool[static_cast<std::size_t>(s)];
      shape.disk = rng.uniform() < 0.5;
      bool placed = false;
      for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
        if (shape.disk) {
          shape.radius = rng.uniform(px * 0.16, px * 0.22);
          shape.cy = rng.uniform(shape.radius, px - shape.radius);
          shape.cx = rng.uniform(shape.radius, px - shape.radius);
        } else {
          const int h = static_cast<int>(rng.range(px / 4, px * 3 / 8));
          const int w = static_cast<int>(rng.range(px / 4, px * 3 / 8));
          shape.top = static_cast<int>(rng.range(0, px - h));
          shape.left = static_cast<int>(rng.range(0, px - w));
          shape.bottom = shape.top + h;
          shape.right = shape.left + w;
        }
        placed = true;
        for (int r = 0; r < px && placed; ++r) {
          for (int c = 0; c < px; ++c) {
            if (shape.contains(r, c) && taken[static_cast<std::size_t>(r) * px + c]) {
              placed = false;
              break;
            }
          }
        }
      }
      if (!placed) break;
      for (int r = 0; r < px; ++r) {
        for (int c = 0; c < px; ++c) {
          if (shape.contains(r, c)) taken[static_cast<std::size_t>(r) * px + c] = true;
        }
      }
      shapes.push_back(shape);
    }
    if (static_cast<std::int64_t>(shapes.size()) == count) return shapes;
  }
  throw GenerationError("synth: could not place " + std::to_string(count) + " shapes in image '" +
                        image_id + "' after " + std::to_string(kLayoutRetries) + " layouts of " +
                        std::to_string(kPlacementRetries) + " tries");
}

SegmentationMap paint(const std::vector<Shape>& shapes, std::uint32_t px, const std::vector<int>& grow) {
  SegmentationMap seg(px, px, kBackground);
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::uint32_t r = 0; r < px; ++r) {
      for (std::uint32_t c = 0; c < px; ++c) {
        if (shapes[s].contains(static_cast<int>(r), static_cast<int>(c), grow[s])) {
          seg.at(r, c) = shapes[s].cls;
        }
      }
    }
  }
  return seg;
}

FeatureMap make_features(const SynthConfig& cfg, const SegmentationMap& gt,
                         const std::vector<std::vector<float>>& centroids, Rng& rng,
                         const std::string& image_id) {
  const std::uint32_t patch = cfg.image_px / cfg.grid;
  FeatureMap f{image_id, cfg.grid, cfg.grid, cfg.d, patch,
               std::vector<float>(static_cast<std::size_t>(cfg.grid) * cfg.grid * cfg.d)};
  std::vector<std::uint32_t> votes(cfg.classes);
  for (std::uint32_t x = 0; x < cfg.grid; ++x) {
    for (std::uint32_t y = 0; y < cfg.grid; ++y) {
      std::fill(votes.begin(), votes.end(), 0u);
      for (std::uint32_t r = x * patch; r < (x + 1) * patch; ++r) {
        for (std::uint32_t c = y * patch; c < (y + 1) * patch; ++c) ++votes[gt.at(r, c)];
      }
      // Majority class; ties go to the larger id so half-covered cells read as foreground.
      const auto majority = static_cast<std::size_t>(
          votes.rend() - std::max_element(votes.rbegin(), votes.rend()) - 1);
      std::vector<double> v(cfg.d);
      for (std::uint32_t k = 0; k < cfg.d; ++k) {
        v[k] = centroids[majority][k] + cfg.noise_sigma * rng.gaussian();
      }
      const auto n = normalized(std::move(v));
      std::copy(n.begin(), n.end(), f.cell(x, y).begin());
    }
  }
  return f;
}

DenseLogits make_logits(const SynthConfig& cfg, const SegmentationMap& pseudo,
                        const std::vector<ClassId>& labels, Rng& rng, const std::string& image_id) {
  const std::uint32_t px = cfg.image_px;
  DenseLogits l{image_id, cfg.classes, px, px,
                std::vector<float>(static_cast<std::size_t>(cfg.classes) * px * px)};
  for (std::uint32_t c = 0; c < cfg.classes; ++c) {
    for (std::uint32_t r = 0; r < px; ++r) {
      for (std::uint32_t q = 0; q < px; ++q) {
        const double base = pseudo.at(r, q) == c ? 1.0 : 0.0;
        l.at(c, r, q) = static_cast<float>(base + rng.uniform(-0.4, 0.4));
      }
    }
  }
  // A hallucinated absent class that only label filtering removes.
  if (rng.uniform() < cfg.hallucination_prob && labels.size() + 1 < cfg.classes) {
    std::vector<ClassId> absent;
    for (ClassId c = 1; c < cfg.classes; ++c) {
      if (std::find(labels.begin(), labels.end(), c) == labels.end()) absent.push_back(c);
    }
    const ClassId ghost = absent[static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(absent.size()) - 1))];
    const auto side = static_cast<std::uint32_t>(rng.range(px / 6, px / 3));
    const auto top = static_cast<std::uint32_t>(rng.range(0, px - side));
    const auto left = static_cast<std::uint32_t>(rng.range(0, px - side));
    for (std::uint32_t r = top; r < top + side; ++r) {
      for (std::uint32_t q = left; q < left + side; ++q) l.at(ghost, r, q) = 2.0f;
    }
  }
  return l;
}

BitMask shape_mask(const Shape& s, std::uint32_t px, int dy = 0, int dx = 0) {
  BitMask m(px, px);
  for (std::uint32_t r = 0; r < px; ++r) {
    for (std::uint32_t c = 0; c < px; ++c) {
      if (s.contains(static_cast<int>(r) - dy, static_cast<int>(c) - dx)) m.set(r, c);
    }
  }
  return m;
}

ProposalSet make_proposals(const SynthConfig& cfg, const std::vector<Shape>& shapes,
                           const SegmentationMap& gt, Rng& rng, const std::string& image_id) {
  const std::uint32_t px = cfg.image_px;
  ProposalSet ps{image_id, px, px, {}};
  for (const auto& s : shapes) {
    ps.proposals.push_back(Proposal{shape_mask(s, px), static_cast<float>(rng.uniform(0.8, 1.0))});
  }
  const BitMask foreground = [&] {
    BitMask m(px, px);
    for (std::uint32_t r = 0; r < px; ++r) {
      for (std::uint32_t c = 0; c < px; ++c) {
        if (gt.at(r, c) != kBackground) m.set(r, c);
      }
    }
    return m;
  }();
  // Even distractors: shifted copies of a shape, scored below tau_obj.
  // Odd distractors: blobs on background, scored at or above tau_obj.
  for (std::uint32_t j = 0; j < cfg.distractors; ++j) {
    BitMask m;
    double obj = 0;
    if (j % 2 == 0 && !shapes.empty()) {
      const auto& s = shapes[static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(shapes.size()) - 1))];
      int dy = 0;
      int dx = 0;
      while (dy == 0 && dx == 0) {
        dy = static_cast<int>(rng.range(-4, 4));
        dx = static_cast<int>(rng.range(-4, 4));
      }
      m = shape_mask(s, px, dy, dx);
      obj = rng.uniform(0.0, cfg.tau_obj * 0.9);
    } else {
      for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
        Shape blob;
        blob.disk = true;
        blob.radius = rng.uniform(px * 0.05, px * 0.125);
        blob.cy = rng.uniform(0, px);
        blob.cx = rng.uniform(0, px);
        BitMask cand = shape_mask(blob, px);
        bool clear = true;
        for (std::size_t w = 0; w < cand.words().size() && clear; ++w) {
          clear = (cand.words()[w] & foreground.words()[w]) == 0;
        }
        if (clear) {
          m = std::move(cand);
          break;
        }
      }
      obj = rng.uniform(cfg.tau_obj, (cfg.tau_obj + 1.0) / 2.0);
    }
    if (m.empty()) continue;
    ps.proposals.push_back(Proposal{std::move(m), static_cast<float>(obj)});
  }
  // Shuffle so ground-truth masks are not always first.
  for (std::size_t i = ps.proposals.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.range(0, static_cast<std::int64_t>(i) - 1));
    std::swap(ps.proposals[i - 1], ps.proposals[j]);
  }
  return ps;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synth: need at least 2 classes (background included)");
  if (grid == 0 || image_px == 0 || image_px % grid != 0) {
    throw ConfigError("synth: image_px must be a positive multiple of grid");
  }
  if (image_px < 10) throw ConfigError("synth: image_px must be >= 10");
  if (d == 0) throw ConfigError("synth: d must be >= 1");
  if (shapes_min > shapes_max) throw ConfigError("synth: shapes_min > shapes_max");
  if (!(noise_sigma >= 0.0f)) throw ConfigError("synth: noise_sigma must be >= 0");
  if (!(tau_obj > 0.0f && tau_obj <= 1.0f)) throw ConfigError("synth: tau_obj must lie in (0, 1]");
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds;
  ds.class_names.push_back("background");
  for (std::uint32_t c = 1; c < cfg.classes; ++c) ds.class_names.push_back("class" + std::to_string(c));

  Rng centroid_rng(splitmix(cfg.seed));
  ds.centroids = draw_centroids(cfg, centroid_rng);

  const std::uint32_t total = cfg.train_images + cfg.test_images;
  for (std::uint32_t i = 0; i < total; ++i) {
    const bool train = i < cfg.train_images;
    // Independent stream per image so one image never shifts another.
    Rng rng(splitmix(cfg.seed ^ splitmix(i + 1)));
    SynthImage img;
    img.split = train ? "train" : "test";
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%04u", img.split.c_str(), train ? i : i - cfg.train_images);
    img.image_id = id;

    const auto shapes = place_shapes(cfg, rng, img.image_id);
    std::set<ClassId> labels;
    for (const auto& s : shapes) labels.insert(s.cls);
    img.labels.assign(labels.begin(), labels.end());

    img.gt = paint(shapes, cfg.image_px, std::vector<int>(shapes.size(), 0));
    img.features = make_features(cfg, img.gt, ds.centroids, rng, img.image_id);
    if (train) {
      std::vector<int> grow(shapes.size(), 0);
      const auto b = static_cast<std::int64_t>(cfg.boundary_noise_px);
      for (int& g : grow) g = static_cast<int>(rng.range(-b, b));
      const SegmentationMap pseudo = paint(shapes, cfg.image_px, grow);
      img.logits = make_logits(cfg, pseudo, img.labels, rng, img.image_id);
    } else {
      img.proposals = make_proposals(cfg, shapes, img.gt, rng, img.image_id);
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

DatasetManifest write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");
  DatasetManifest m;
  m.class_names = ds.class_names;
  m.backbone = "synthetic";
  m.root = dir;
  for (const auto& img : ds.images) {
    ImageRecord r;
    r.image_id = img.image_id;
    r.split = img.split;
    r.labels = img.labels;
    const std::string base = img.split + "/" + img.image_id;
    r.features = base + ".feat";
    r.gt = base + ".gt";
    write_blob(img.features, dir / r.features);
    write_blob(img.gt, dir / r.gt);
    if (img.split == "train") {
      r.logits = base + ".logits";
      write_blob(img.logits, dir / r.logits);
    } else {
      r.proposals = base + ".props";
      write_blob(img.proposals, dir / r.proposals);
    }
    m.images.push_back(std::move(r));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace segbank::synth
