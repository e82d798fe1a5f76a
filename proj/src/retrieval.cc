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

#include "segbank/retrieval.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "segbank/error.h"
#include "segbank/io.h"

namespace segbank::retrieval {
namespace {

using Scored = std::pair<double, std::uint32_t>;

// Higher similarity first, then lower entry index.
bool better(const Scored& a, const Scored& b) {
  return a.first > b.first || (a.first == b.first && a.second < b.second);
}

double dot(const float* a, const float* b, std::uint32_t d) {
  double s = 0.0;
  for (std::uint32_t k = 0; k < d; ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

double sq_dist(const float* a, const float* b, std::uint32_t d) {
  double s = 0.0;
  for (std::uint32_t k = 0; k < d; ++k) {
    const double diff = static_cast<double>(a[k]) - b[k];
    s += diff * diff;
  }
  return s;
}

// Uniform [0, 1) from the top 53 bits; stable across standard libraries,
// unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint32_t nearest_centroid(const float* v, const std::vector<float>& centroids,
                               std::uint32_t n_list, std::uint32_t d) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 0; c < n_list; ++c) {
    const double dist = sq_dist(v, centroids.data() + static_cast<std::size_t>(c) * d, d);
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

std::vector<float> kmeans(const std::vector<float>& data, std::uint32_t n, std::uint32_t d,
                          std::uint32_t n_list, std::uint32_t iters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<float> centroids(static_cast<std::size_t>(n_list) * d);
  auto row = [&](std::uint32_t i) { return data.data() + static_cast<std::size_t>(i) * d; };

  // k-means++ seeding.
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::uint32_t pick = std::min<std::uint32_t>(static_cast<std::uint32_t>(uniform01(rng) * n), n - 1);
  for (std::uint32_t c = 0; c < n_list; ++c) {
    std::copy_n(row(pick), d, centroids.begin() + static_cast<std::ptrdiff_t>(c) * d);
    double total = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], sq_dist(row(i), row(pick), d));
      total += min_d[i];
    }
    if (c + 1 == n_list) break;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      std::uint32_t chosen = n;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (min_d[i] <= 0.0) continue;
        acc += min_d[i];
        chosen = i;
        if (acc > target) break;
      }
      pick = chosen;
    } else {
      // Every point coincides with a centroid already; duplicates are fine.
      pick = std::min<std::uint32_t>(static_cast<std::uint32_t>(uniform01(rng) * n), n - 1);
    }
  }

  // Lloyd iterations. Empty clusters keep their previous centroid.
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<double> sums(static_cast<std::size_t>(n_list) * d);
  std::vector<std::uint32_t> counts(n_list);
  for (std::uint32_t it = 0; it < iters; ++it) {
    bool changed = it == 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t a = nearest_centroid(row(i), centroids, n_list, d);
      changed |= a != assign[i];
      assign[i] = a;
    }
    if (!changed) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0u);
    for (std::uint32_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * d;
      for (std::uint32_t k = 0; k < d; ++k) s[k] += row(i)[k];
    }
    for (std::uint32_t c = 0; c < n_list; ++c) {
      if (counts[c] == 0) continue;
      for (std::uint32_t k = 0; k < d; ++k) {
        centroids[static_cast<std::size_t>(c) * d + k] =
            static_cast<float>(sums[static_cast<std::size_t>(c) * d + k] / counts[c]);
      }
    }
  }
  return centroids;
}

}  // namespace

std::uint64_t bank_fingerprint(const FeatureBank& bank) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  };
  mix(bank.d, 4);
  mix(bank.class_count, 2);
  mix(bank.config_fingerprint, 8);
  mix(bank.entries.size(), 8);
  for (const auto& e : bank.entries) {
    mix(e.class_id, 2);
    for (float v : e.vector) mix(std::bit_cast<std::uint32_t>(v), 4);
  }
  return h;
}

void Index::attach(const FeatureBank& bank) {
  d_ = bank.d;
  bank_size_ = static_cast<std::uint32_t>(bank.entries.size());
  bank_fingerprint_ = retrieval::bank_fingerprint(bank);
  vectors_.clear();
  vectors_.reserve(static_cast<std::size_t>(bank_size_) * d_);
  labels_.clear();
  labels_.reserve(bank_size_);
  for (const auto& e : bank.entries) {
    if (e.vector.size() != d_) throw ShapeError("index: bank entry dim != bank d");
    vectors_.insert(vectors_.end(), e.vector.begin(), e.vector.end());
    labels_.push_back(e.class_id);
  }
}

Index Index::build(const FeatureBank& bank, const RetrievalConfig& cfg) {
  if (bank.entries.empty()) throw ConfigError("index: bank is empty");
  Index idx;
  idx.kind_ = cfg.index_kind;
  idx.attach(bank);
  if (cfg.index_kind == IndexKind::kFlat) return idx;

  const auto n = idx.bank_size_;
  const std::uint32_t n_list =
      cfg.n_list != 0 ? cfg.n_list
                      : static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  if (n_list > n) {
    throw ConfigError("index: n_list " + std::to_string(n_list) + " exceeds bank size " +
                      std::to_string(n));
  }
  const std::uint32_t n_probe = cfg.n_probe != 0 ? cfg.n_probe : std::max(1u, n_list / 8);
  if (n_probe > n_list) {
    throw ConfigError("index: n_probe " + std::to_string(n_probe) + " exceeds n_list " +
                      std::to_string(n_list));
  }
  idx.n_probe_ = n_probe;
  idx.centroids_ = kmeans(idx.vectors_, n, idx.d_, n_list, cfg.kmeans_iters, cfg.seed);
  idx.lists_.assign(n_list, {});
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto c = nearest_centroid(idx.vectors_.data() + static_cast<std::size_t>(i) * idx.d_,
                                    idx.centroids_, n_list, idx.d_);
    idx.lists_[c].push_back(i);
  }
  return idx;
}

void Index::set_n_probe(std::uint32_t n_probe) {
  if (kind_ == IndexKind::kIvf && (n_probe == 0 || n_probe > n_list())) {
    throw ConfigError("index: n_probe must lie in [1, n_list]");
  }
  n_probe_ = n_probe;
}

void Index::scan(std::span<const float> query, std::span<const std::uint32_t> ids,
                 std::vector<Scored>& out) const {
  for (std::uint32_t id : ids) {
    out.emplace_back(dot(query.data(), vectors_.data() + static_cast<std::size_t>(id) * d_, d_), id);
  }
}

SearchResult Index::search(std::span<const float> query, std::uint32_t k) const {
  if (k == 0) throw ConfigError("search: k must be >= 1");
  if (query.size() != d_) {
    throw ShapeError("search: query dim " + std::to_string(query.size()) + " != index dim " +
                     std::to_string(d_));
  }
  std::vector<Scored> cand;
  if (kind_ == IndexKind::kFlat) {
    cand.reserve(labels_.size());
    for (std::uint32_t i = 0; i < labels_.size(); ++i) {
      cand.emplace_back(dot(query.data(), vectors_.data() + static_cast<std::size_t>(i) * d_, d_), i);
    }
  } else {
    std::vector<std::pair<double, std::uint32_t>> cdist(n_list());
    for (std::uint32_t c = 0; c < n_list(); ++c) {
      cdist[c] = {sq_dist(query.data(), centroids_.data() + static_cast<std::size_t>(c) * d_, d_), c};
    }
    std::partial_sort(cdist.begin(), cdist.begin() + n_probe_, cdist.end());
    for (std::uint32_t p = 0; p < n_probe_; ++p) scan(query, lists_[cdist[p].second], cand);
  }

  SearchResult res;
  const std::size_t take = std::min<std::size_t>(k, cand.size());
  res.short_list = take < k;
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
  res.neighbors.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    res.neighbors.push_back(
        Neighbor{static_cast<float>(cand[i].first), labels_[cand[i].second], cand[i].second});
  }
  return res;
}

std::vector<std::byte> Index::encode() const {
  ByteWriter out;
  out.header(RecordType::kIndex);
  out.u8(static_cast<std::uint8_t>(kind_));
  out.u32(d_);
  out.u32(bank_size_);
  out.u64(bank_fingerprint_);
  out.u32(n_probe_);
  out.u32(n_list());
  for (float v : centroids_) out.f32(v);
  for (const auto& list : lists_) {
    out.u32(static_cast<std::uint32_t>(list.size()));
    for (std::uint32_t id : list) out.u32(id);
  }
  return out.take();
}

Index Index::decode(std::span<const std::byte> bytes, const FeatureBank& bank) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kIndex);
  Index idx;
  const std::uint8_t kind = in.u8();
  if (kind > 1) throw CorruptError("index: unknown kind " + std::to_string(kind));
  idx.kind_ = static_cast<IndexKind>(kind);
  const std::uint32_t d = in.u32();
  const std::uint32_t size = in.u32();
  const std::uint64_t fp = in.u64();
  idx.n_probe_ = in.u32();
  const std::uint32_t n_list = in.u32();
  idx.centroids_ = in.f32_array(static_cast<std::size_t>(n_list) * d);
  std::vector<bool> seen(size, false);
  idx.lists_.resize(n_list);
  for (auto& list : idx.lists_) {
    const std::uint32_t len = in.u32();
    if (len > in.remaining() / 4) in.require(static_cast<std::size_t>(len) * 4);
    list.resize(len);
    for (auto& id : list) {
      id = in.u32();
      if (id >= size || seen[id]) throw CorruptError("index: list ids do not partition the bank");
      seen[id] = true;
    }
  }
  in.expect_end();

  idx.attach(bank);
  if (idx.d_ != d || idx.bank_size_ != size || idx.bank_fingerprint_ != fp) {
    throw ValidationError("index: built from a different bank");
  }
  if (idx.kind_ == IndexKind::kIvf) {
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw CorruptError("index: some bank entries are in no list");
    }
    if (n_list == 0 || idx.n_probe_ == 0 || idx.n_probe_ > n_list) {
      throw CorruptError("index: n_probe outside [1, n_list]");
    }
  }
  return idx;
}

void Index::save(const std::filesystem::path& path) const { write_file(path, encode()); }

Index Index::load(const std::filesystem::path& path, const FeatureBank& bank) {
  return decode(read_file(path), bank);
}

VoteResult vote(std::span<const Neighbor> neighbors) {
  if (neighbors.empty()) throw ConfigError("vote: empty neighbor list");
  VoteResult r;
  std::map<ClassId, std::vector<float>> supporters;
  for (const auto& n : neighbors) {
    ++r.votes[n.class_id];
    supporters[n.class_id].push_back(n.similarity);
  }
  // Summing in sorted order makes the result independent of neighbor order.
  std::map<ClassId, double> sums;
  for (auto& [c, sims] : supporters) {
    std::sort(sims.begin(), sims.end());
    sums[c] = std::accumulate(sims.begin(), sims.end(), 0.0);
  }
  bool first = true;
  std::uint32_t best_count = 0;
  double best_sum = 0.0;
  // std::map iterates in ascending class id, so strict comparisons keep the
  // smallest id on a full tie.
  for (const auto& [c, count] : r.votes) {
    const double s = sums[c];
    if (first || count > best_count || (count == best_count && s > best_sum)) {
      first = false;
      r.class_id = c;
      best_count = count;
      best_sum = s;
    }
  }
  r.confidence = static_cast<float>(best_sum / best_count);
  r.neighbors.assign(neighbors.begin(), neighbors.end());
  return r;
}

}  // namespace segbank::retrieval
