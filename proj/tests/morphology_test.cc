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

#include "segbank/morphology.h"

#include <gtest/gtest.h>

#include <random>

#include "segbank/error.h"
#include "test_util.h"

namespace segbank::morphology {
namespace {

using testing::from_grid;
using testing::to_grid;

BitMask filled(std::uint32_t h, std::uint32_t w) {
  BitMask m(h, w);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) m.set(r, c);
  }
  return m;
}

BitMask disk(std::uint32_t size, double radius) {
  BitMask m(size, size);
  const double c = size / 2.0;
  for (std::uint32_t r = 0; r < size; ++r) {
    for (std::uint32_t col = 0; col < size; ++col) {
      const double dy = r + 0.5 - c;
      const double dx = col + 0.5 - c;
      if (dy * dy + dx * dx <= radius * radius) m.set(r, col);
    }
  }
  return m;
}

TEST(ErodeTest, ZeroIterationsIsIdentity) {
  std::mt19937_64 rng(1);
  const BitMask m = testing::random_mask(rng, 17, 23);
  EXPECT_EQ(erode(m, {3, 0, false}), m);
}

TEST(ErodeTest, BorderCountsAsBackground) {
  const BitMask out = erode(filled(10, 10), {3, 1, false});
  for (std::uint32_t r = 0; r < 10; ++r) {
    for (std::uint32_t c = 0; c < 10; ++c) {
      const bool inner = r >= 1 && r <= 8 && c >= 1 && c <= 8;
      EXPECT_EQ(out.get(r, c), inner) << r << "," << c;
    }
  }
}

TEST(ErodeTest, MatchesOracleOnRandomMasks) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const BitMask m = testing::random_blobs(rng, 32, 32, 4);
    for (std::uint32_t k : {3u, 5u}) {
      for (std::uint32_t t = 1; t <= 4; ++t) {
        EXPECT_EQ(to_grid(erode(m, {k, t, false})).px,
                  oracle::erode(to_grid(m), static_cast<int>(k), static_cast<int>(t)).px)
            << "case " << i << " k=" << k << " t=" << t;
      }
    }
  }
}

TEST(ErodeTest, OddShapesAndWordBoundaries) {
  std::mt19937_64 rng(3);
  for (std::uint32_t h : {1u, 2u, 7u, 63u, 65u}) {
    for (std::uint32_t w : {1u, 3u, 64u, 65u, 130u}) {
      const BitMask m = testing::random_mask(rng, h, w);
      EXPECT_EQ(to_grid(erode(m, {3, 2, false})).px, oracle::erode(to_grid(m), 3, 2).px)
          << h << "x" << w;
    }
  }
}

TEST(ErodeTest, LargeKernelClearsSmallImage) {
  EXPECT_TRUE(erode(filled(4, 4), {5, 1, false}).empty());
  EXPECT_EQ(erode(filled(5, 5), {5, 1, false}).popcount(), 1u);
}

TEST(ErodeTest, EvenKernelIsConfigError) {
  EXPECT_THROW(erode(filled(4, 4), {2, 1, false}), ConfigError);
  EXPECT_THROW(erode(filled(4, 4), {0, 1, false}), ConfigError);
}

TEST(BackoffTest, TinySquareFallsBackToRawMask) {
  const BitMask m = filled(2, 2);
  const auto r = erode_with_backoff(m, {3, 20, true});
  EXPECT_EQ(r.effective_iterations, 0u);
  EXPECT_EQ(r.mask, m);
}

TEST(BackoffTest, ThreeByThreeKeepsCenterAfterOnePass) {
  // The centre pixel's window is the whole square, so t' = 1 survives.
  const auto r = erode_with_backoff(filled(3, 3), {3, 20, true});
  EXPECT_EQ(r.effective_iterations, 1u);
  EXPECT_EQ(r.mask.popcount(), 1u);
  EXPECT_TRUE(r.mask.get(1, 1));
}

TEST(BackoffTest, LargeDiskKeepsFullIterations) {
  const BitMask m = disk(100, 40);
  const auto r = erode_with_backoff(m, {3, 20, true});
  EXPECT_EQ(r.effective_iterations, 20u);
  EXPECT_FALSE(r.mask.empty());
  EXPECT_EQ(to_grid(r.mask).px, oracle::erode(to_grid(m), 3, 20).px);
}

TEST(BackoffTest, EmptyMaskStaysEmpty) {
  const auto r = erode_with_backoff(BitMask(8, 8), {3, 20, true});
  EXPECT_EQ(r.effective_iterations, 0u);
  EXPECT_TRUE(r.mask.empty());
}

TEST(BackoffTest, HalvesUntilNonEmpty) {
  // A 9x9 square survives at most 4 iterations of a 3x3 kernel.
  BitMask m(20, 20);
  for (std::uint32_t r = 5; r < 14; ++r) {
    for (std::uint32_t c = 5; c < 14; ++c) m.set(r, c);
  }
  const auto r = erode_with_backoff(m, {3, 20, true});
  EXPECT_EQ(r.effective_iterations, 2u);  // 20 -> 10 -> 5 -> 2
  EXPECT_EQ(r.mask.popcount(), 25u);
}

TEST(BackoffTest, DisabledBackoffMayReturnEmpty) {
  const auto r = erode_with_backoff(filled(3, 3), {3, 20, false});
  EXPECT_TRUE(r.mask.empty());
  EXPECT_EQ(r.effective_iterations, 20u);
}

TEST(BackoffTest, NonEmptyInputNeverGivesEmptyOutput) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const BitMask m = testing::random_blobs(rng, 24, 24, 2);
    if (m.empty()) continue;
    const auto r = erode_with_backoff(m, {3, 20, true});
    EXPECT_FALSE(r.mask.empty());
    EXPECT_TRUE(r.mask.subset_of(m));
  }
}

TEST(ErodeTest, CountsInvocations) {
  const auto before = erosion_invocations();
  erode(filled(4, 4), {3, 1, false});
  erode(filled(4, 4), {3, 1, false});
  EXPECT_EQ(erosion_invocations() - before, 2u);
}

}  // namespace
}  // namespace segbank::morphology
