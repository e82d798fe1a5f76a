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

#include "segbank/softmask.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "segbank/error.h"
#include "test_util.h"

namespace segbank::softmask {
namespace {

std::vector<double> as_doubles(const SoftMask& s) { return {s.weights.begin(), s.weights.end()}; }

std::vector<std::vector<double>> cells(const FeatureMap& f) {
  std::vector<std::vector<double>> out;
  for (std::uint32_t r = 0; r < f.h; ++r) {
    for (std::uint32_t c = 0; c < f.w; ++c) {
      const auto v = f.cell(r, c);
      out.emplace_back(v.begin(), v.end());
    }
  }
  return out;
}

TEST(DownsampleTest, FullMaskGivesAllOnes) {
  BitMask m(12, 9);
  for (std::uint32_t r = 0; r < 12; ++r) {
    for (std::uint32_t c = 0; c < 9; ++c) m.set(r, c);
  }
  const SoftMask s = downsample_area(m, 5, 4);
  for (float v : s.weights) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(DownsampleTest, AlignedQuadrant) {
  BitMask m(4, 4);
  m.set(0, 0);
  m.set(0, 1);
  m.set(1, 0);
  m.set(1, 1);
  const SoftMask s = downsample_area(m, 2, 2);
  EXPECT_EQ(s.weights, (std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f}));
}

TEST(DownsampleTest, MatchesOracleOnNonDivisibleGrid) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const BitMask m = testing::random_mask(rng, 33, 33);
    const SoftMask s = downsample_area(m, 4, 4);
    const auto want = oracle::downsample(testing::to_grid(m), 4, 4);
    for (std::size_t k = 0; k < want.size(); ++k) {
      // Weights are stored as f32; compare at f32 resolution.
      EXPECT_NEAR(s.weights[k], want[k], 1e-6) << "case " << i << " cell " << k;
    }
  }
}

TEST(DownsampleTest, GridFinerThanImage) {
  BitMask m(2, 3);
  m.set(0, 0);
  m.set(1, 2);
  const SoftMask s = downsample_area(m, 5, 7);
  const auto want = oracle::downsample(testing::to_grid(m), 5, 7);
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(s.weights[k], want[k], 1e-6);
}

TEST(DownsampleTest, ZeroGridIsShapeError) {
  EXPECT_THROW(downsample_area(BitMask(4, 4), 0, 2), ShapeError);
}

TEST(ProjectTest, HardThresholdRoundsAtHalf) {
  BitMask m(4, 4);
  m.set(0, 0);
  m.set(0, 1);  // top-left cell half covered
  m.set(2, 2);  // bottom-right cell quarter covered
  const SoftMask s = project(m, 2, 2, {1e-6f, Projection::kHardThreshold});
  EXPECT_EQ(s.weights, (std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f}));
  const SoftMask a = project(m, 2, 2, {});
  EXPECT_EQ(a.weights, (std::vector<float>{0.5f, 0.0f, 0.0f, 0.25f}));
}

TEST(PoolTest, UniformWeightsGiveNormalizedMean) {
  std::mt19937_64 rng(6);
  const FeatureMap f = testing::random_features(rng, 3, 4, 5);
  const SoftMask s{3, 4, std::vector<float>(12, 1.0f)};
  const auto got = pool_features(f, s, {});
  std::vector<double> mean(5, 0.0);
  for (const auto& c : cells(f)) {
    for (int k = 0; k < 5; ++k) mean[k] += c[k];
  }
  double n = 0;
  for (double v : mean) n += v * v;
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(got[k], mean[k] / std::sqrt(n), 1e-6);
}

TEST(PoolTest, OneHotWeightPicksCell) {
  std::mt19937_64 rng(7);
  const FeatureMap f = testing::random_features(rng, 2, 2, 3);
  SoftMask s{2, 2, {0.0f, 0.0f, 1.0f, 0.0f}};
  const auto got = pool_features(f, s, {});
  const auto cell = f.cell(1, 0);
  double n = 0;
  for (float v : cell) n += static_cast<double>(v) * v;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], cell[k] / std::sqrt(n), 1e-6);
}

TEST(PoolTest, MatchesOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint32_t> side(1, 8);
  std::uniform_int_distribution<std::uint32_t> dim(1, 16);
  std::uniform_real_distribution<float> weight(0.0f, 1.0f);
  for (int i = 0; i < 200; ++i) {
    const FeatureMap f = testing::random_features(rng, side(rng), side(rng), dim(rng));
    SoftMask s{f.h, f.w, std::vector<float>(static_cast<std::size_t>(f.h) * f.w)};
    for (auto& w : s.weights) w = weight(rng);
    const auto got = pool_features(f, s, {});
    const auto want = oracle::pool(cells(f), as_doubles(s), 1e-6);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-5);
  }
}

TEST(PoolTest, ZeroMassIsDegenerate) {
  std::mt19937_64 rng(9);
  const FeatureMap f = testing::random_features(rng, 2, 2, 3);
  const SoftMask s{2, 2, std::vector<float>(4, 0.0f)};
  EXPECT_FALSE(try_pool_features(f, s, {}).has_value());
  EXPECT_THROW(pool_features(f, s, {}), DegenerateMask);
}

TEST(PoolTest, ZeroFeaturesAreDegenerate) {
  const FeatureMap f{"z", 1, 1, 2, 1, {0.0f, 0.0f}};
  EXPECT_THROW(pool_features(f, SoftMask{1, 1, {1.0f}}, {}), DegenerateMask);
}

TEST(PoolTest, TinyPixelOnLargeImage) {
  // One pixel of a 512x512 image on a 32x32 grid covers 1/256 of a cell,
  // well above the default epsilon.
  BitMask m(512, 512);
  m.set(100, 200);
  const SoftMask s = downsample_area(m, 32, 32);
  EXPECT_FLOAT_EQ(s.at(6, 12), 1.0f / 256.0f);
  std::mt19937_64 rng(10);
  const FeatureMap f = testing::random_features(rng, 32, 32, 4);
  EXPECT_TRUE(try_pool_features(f, s, {}).has_value());
  // With a larger epsilon the same mask is degenerate.
  EXPECT_FALSE(try_pool_features(f, s, {0.01f, Projection::kArea}).has_value());
}

TEST(PoolTest, DimensionMismatchIsShapeError) {
  std::mt19937_64 rng(11);
  const FeatureMap f = testing::random_features(rng, 2, 2, 3);
  EXPECT_THROW(pool_features(f, SoftMask{2, 3, std::vector<float>(6, 1.0f)}, {}), ShapeError);
}

}  // namespace
}  // namespace segbank::softmask
