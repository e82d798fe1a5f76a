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

// Cosine Top-K retrieval over a feature bank and class voting.
//
// Bank vectors are unit-norm, so cosine similarity is a plain dot product.
// Two index kinds share one search contract: Flat scans everything; IVF
// clusters the bank with seeded k-means++ and scans only the n_probe lists
// whose centroids are nearest to the query.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "segbank/types.h"

namespace segbank::retrieval {

enum class IndexKind : std::uint8_t { kFlat = 0, kIvf = 1 };

struct RetrievalConfig {
  std::uint32_t k = 25;
  IndexKind index_kind = IndexKind::kFlat;
  // 0 selects ceil(sqrt(n)).
  std::uint32_t n_list = 0;
  // 0 selects max(1, n_list / 8).
  std::uint32_t n_probe = 0;
  std::uint32_t kmeans_iters = 20;
  std::uint64_t seed = 0;
};

struct Neighbor {
  float similarity = 0.0f;
  ClassId class_id = 0;
  std::uint32_t entry_index = 0;
  bool operator==(const Neighbor&) const = default;
};

struct SearchResult {
  std::vector<Neighbor> neighbors;
  // Fewer than k entries were reachable.
  bool short_list = false;
};

class Index {
 public:
  // Throws ConfigError for an empty bank, n_list > bank size or
  // n_probe > n_list.
  static Index build(const FeatureBank& bank, const RetrievalConfig& cfg);

  // Best k entries by dot product, descending, ties by ascending entry index.
  // IVF considers only entries in the n_probe probed lists.
  SearchResult search(std::span<const float> query, std::uint32_t k) const;

  IndexKind kind() const { return kind_; }
  std::size_t size() const { return labels_.size(); }
  std::uint32_t dim() const { return d_; }
  std::uint32_t n_list() const { return static_cast<std::uint32_t>(lists_.size()); }
  std::uint32_t n_probe() const { return n_probe_; }
  void set_n_probe(std::uint32_t n_probe);
  const std::vector<std::vector<std::uint32_t>>& lists() const { return lists_; }
  const std::vector<float>& centroids() const { return centroids_; }
  std::uint64_t bank_fingerprint() const { return bank_fingerprint_; }

  // Index record: structure only; vectors are re-attached from the bank on
  // load, which must match the one the index was built from.
  std::vector<std::byte> encode() const;
  static Index decode(std::span<const std::byte> bytes, const FeatureBank& bank);
  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path, const FeatureBank& bank);

 private:
  void attach(const FeatureBank& bank);
  void scan(std::span<const float> query, std::span<const std::uint32_t> ids,
            std::vector<std::pair<double, std::uint32_t>>& out) const;

  IndexKind kind_ = IndexKind::kFlat;
  std::uint32_t d_ = 0;
  std::uint32_t n_probe_ = 1;
  std::uint64_t bank_fingerprint_ = 0;
  std::uint32_t bank_size_ = 0;
  std::vector<float> vectors_;  // row-major copy of bank vectors
  std::vector<ClassId> labels_;
  std::vector<float> centroids_;  // IVF only, n_list x d
  std::vector<std::vector<std::uint32_t>> lists_;  // IVF only
};

struct VoteResult {
  ClassId class_id = 0;
  float confidence = 0.0f;
  std::map<ClassId, std::uint32_t> votes;
  std::vector<Neighbor> neighbors;
};

// Majority class among the neighbors; count ties go to the larger summed
// similarity, then to the smaller class id. Confidence is the mean
// similarity of the winning class's neighbors. Throws ConfigError on an
// empty list.
VoteResult vote(std::span<const Neighbor> neighbors);

// Content hash of a bank (dimension, labels and vector bits).
std::uint64_t bank_fingerprint(const FeatureBank& bank);

}  // namespace segbank::retrieval
