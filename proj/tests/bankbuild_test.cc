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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "segbank/error.h"
#include "segbank/synth.h"
#include "test_util.h"

namespace segbank::bankbuild {
namespace {

namespace fs = std::filesystem;

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

DenseLogits random_logits(std::mt19937_64& rng, std::uint32_t c, std::uint32_t h, std::uint32_t w) {
  DenseLogits l{"rand", c, h, w, std::vector<float>(static_cast<std::size_t>(c) * h * w)};
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (auto& v : l.data) v = g(rng);
  return l;
}

morphology::MorphConfig no_erosion() { return {3, 0, true}; }

TEST(FilterLogitsTest, AllClassesIsIdentity) {
  std::mt19937_64 rng(1);
  const DenseLogits l = random_logits(rng, 4, 5, 6);
  const std::vector<ClassId> all = {0, 1, 2, 3};
  EXPECT_EQ(filter_logits(l, all), l);
}

TEST(FilterLogitsTest, BackgroundIsAlwaysKept) {
  std::mt19937_64 rng(2);
  const DenseLogits l = random_logits(rng, 3, 2, 2);
  const std::vector<ClassId> only2 = {2};
  const DenseLogits f = filter_logits(l, only2);
  for (std::uint32_t r = 0; r < 2; ++r) {
    for (std::uint32_t c = 0; c < 2; ++c) {
      EXPECT_EQ(f.at(0, r, c), l.at(0, r, c));
      EXPECT_EQ(f.at(1, r, c), kNegInf);
      EXPECT_EQ(f.at(2, r, c), l.at(2, r, c));
    }
  }
}

TEST(FilterLogitsTest, OutOfRangeLabelIsLabelRangeError) {
  std::mt19937_64 rng(3);
  const std::vector<ClassId> bad = {3};
  EXPECT_THROW(filter_logits(random_logits(rng, 3, 2, 2), bad), LabelRangeError);
}

TEST(FilterLogitsTest, ArgmaxNeverLandsOnDisallowedClass) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const DenseLogits l = random_logits(rng, 6, 8, 8);
    std::vector<ClassId> allowed;
    for (ClassId c = 1; c < 6; ++c) {
      if (std::bernoulli_distribution(0.4)(rng)) allowed.push_back(c);
    }
    const SegmentationMap seg = argmax_map(filter_logits(l, allowed));
    for (ClassId label : seg.labels) {
      EXPECT_TRUE(label == 0 || std::find(allowed.begin(), allowed.end(), label) != allowed.end());
    }
  }
}

TEST(ArgmaxTest, OneHot) {
  DenseLogits l{"x", 3, 1, 3, std::vector<float>(9, 0.0f)};
  l.at(2, 0, 0) = 1.0f;
  l.at(0, 0, 1) = 1.0f;
  l.at(1, 0, 2) = 1.0f;
  EXPECT_EQ(argmax_map(l).labels, (std::vector<ClassId>{2, 0, 1}));
}

TEST(ArgmaxTest, TieGoesToSmallerId) {
  DenseLogits l{"x", 3, 1, 1, {0.7f, 0.1f, 0.7f}};
  EXPECT_EQ(argmax_map(l).labels[0], 0);
  DenseLogits m{"x", 3, 1, 1, {kNegInf, 0.5f, 0.5f}};
  EXPECT_EQ(argmax_map(m).labels[0], 1);
}

TEST(ArgmaxTest, AllNegativeInfinityIsInvalidLogits) {
  DenseLogits l{"x", 2, 1, 2, {0.0f, kNegInf, 1.0f, kNegInf}};
  EXPECT_THROW(argmax_map(l), InvalidLogits);
}

TEST(ArgmaxTest, MatchesPerPixelScan) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const DenseLogits l = random_logits(rng, 3, 8, 8);
    const SegmentationMap seg = argmax_map(l);
    for (std::uint32_t r = 0; r < 8; ++r) {
      for (std::uint32_t c = 0; c < 8; ++c) {
        ClassId best = 0;
        for (ClassId k = 1; k < 3; ++k) {
          if (l.at(k, r, c) > l.at(best, r, c)) best = k;
        }
        EXPECT_EQ(seg.at(r, c), best);
      }
    }
  }
}

TEST(ExtractTest, AllBackgroundGivesOneEntry) {
  std::mt19937_64 rng(6);
  const FeatureMap f = testing::random_features(rng, 4, 4, 8);
  const SegmentationMap seg(16, 16, kBackground);
  const auto ex = extract_prototypes(seg, f, {}, {3, 20, true}, {});
  ASSERT_EQ(ex.entries.size(), 1u);
  EXPECT_EQ(ex.entries[0].class_id, kBackground);
}

TEST(ExtractTest, ClassesOutsideImageLabelsAreSkipped) {
  std::mt19937_64 rng(7);
  const FeatureMap f = testing::random_features(rng, 4, 4, 8);
  SegmentationMap seg(16, 16, kBackground);
  for (std::uint32_t r = 0; r < 8; ++r) {
    for (std::uint32_t c = 0; c < 8; ++c) seg.at(r, c) = 1;
  }
  for (std::uint32_t r = 8; r < 16; ++r) {
    for (std::uint32_t c = 8; c < 16; ++c) seg.at(r, c) = 2;
  }
  const std::vector<ClassId> labels = {1};
  const auto ex = extract_prototypes(seg, f, labels, no_erosion(), {});
  ASSERT_EQ(ex.entries.size(), 2u);
  EXPECT_EQ(ex.entries[0].class_id, 0);
  EXPECT_EQ(ex.entries[1].class_id, 1);
}

TEST(ExtractTest, EntryMatchesComposedOracles) {
  std::mt19937_64 rng(8);
  const FeatureMap f = testing::random_features(rng, 4, 4, 6);
  SegmentationMap seg(16, 16, kBackground);
  for (std::uint32_t r = 3; r < 13; ++r) {
    for (std::uint32_t c = 2; c < 11; ++c) seg.at(r, c) = 1;
  }
  const std::vector<ClassId> labels = {1};
  const auto ex = extract_prototypes(seg, f, labels, {3, 2, true}, {});
  ASSERT_EQ(ex.entries.size(), 2u);
  const auto& entry = ex.entries[1];
  ASSERT_EQ(entry.class_id, 1);

  const oracle::Grid eroded = oracle::erode(testing::to_grid(class_mask(seg, 1)), 3, 2);
  const auto weights = oracle::downsample(eroded, 4, 4);
  std::vector<std::vector<double>> cells;
  for (std::uint32_t r = 0; r < 4; ++r) {
    for (std::uint32_t c = 0; c < 4; ++c) {
      const auto v = f.cell(r, c);
      cells.emplace_back(v.begin(), v.end());
    }
  }
  const auto want = oracle::pool(cells, weights, 1e-6);
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(entry.vector[k], want[k], 1e-5);
}

TEST(ExtractTest, SplitComponentsGivesOneEntryPerComponent) {
  std::mt19937_64 rng(9);
  const FeatureMap f = testing::random_features(rng, 4, 4, 4);
  SegmentationMap seg(16, 16, kBackground);
  for (std::uint32_t r = 0; r < 4; ++r) {
    for (std::uint32_t c = 0; c < 4; ++c) {
      seg.at(r, c) = 1;
      seg.at(r + 10, c + 10) = 1;
    }
  }
  const std::vector<ClassId> labels = {1};
  const auto merged = extract_prototypes(seg, f, labels, no_erosion(), {});
  const auto split = extract_prototypes(seg, f, labels, no_erosion(), {}, {true, true});
  EXPECT_EQ(merged.entries.size(), 2u);
  EXPECT_EQ(split.entries.size(), 3u);
}

TEST(ExtractTest, FeatureGridFinerThanMapIsShapeError) {
  std::mt19937_64 rng(10);
  const FeatureMap f = testing::random_features(rng, 8, 8, 4);
  EXPECT_THROW(extract_prototypes(SegmentationMap(4, 4, 0), f, {}, no_erosion(), {}), ShapeError);
}

std::vector<BankEntry> entries_of(const std::vector<std::vector<float>>& vecs, ClassId c) {
  std::vector<BankEntry> out;
  for (std::size_t i = 0; i < vecs.size(); ++i) out.push_back({vecs[i], c, "e" + std::to_string(i)});
  return out;
}

TEST(PurifyTest, ZeroAlphaIsIdentity) {
  std::mt19937_64 rng(11);
  std::vector<std::vector<float>> v;
  for (int i = 0; i < 9; ++i) v.push_back(testing::random_unit(rng, 5));
  const auto in = entries_of(v, 1);
  EXPECT_EQ(purify_class(in, {0.0f, true}), in);
}

TEST(PurifyTest, IdenticalVectorsDropEarliest) {
  const std::vector<std::vector<float>> v(4, std::vector<float>{0.6f, 0.8f});
  const auto out = purify_class(entries_of(v, 2), {25.0f, true});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].source_image, "e1");
  EXPECT_EQ(out[1].source_image, "e2");
  EXPECT_EQ(out[2].source_image, "e3");
}

TEST(PurifyTest, MatchesSortOracle) {
  std::mt19937_64 rng(12);
  std::vector<std::vector<float>> v;
  for (int i = 0; i < 100; ++i) v.push_back(testing::random_unit(rng, 8));
  const auto out = purify_class(entries_of(v, 3), {25.0f, true});
  const auto want = oracle::purify(v, 25.0);
  ASSERT_EQ(out.size(), 75u);
  ASSERT_EQ(want.size(), 75u);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(out[i].source_image, "e" + std::to_string(want[i]));
  }
}

TEST(PurifyTest, BackgroundIsExempt) {
  std::mt19937_64 rng(13);
  std::vector<std::vector<float>> v;
  for (int i = 0; i < 8; ++i) v.push_back(testing::random_unit(rng, 4));
  EXPECT_EQ(purify_class(entries_of(v, kBackground), {50.0f, true}).size(), 8u);
  EXPECT_EQ(purify_class(entries_of(v, kBackground), {50.0f, false}).size(), 4u);
}

TEST(PurifyTest, EmptyAndSingleEntry) {
  EXPECT_TRUE(purify_class({}, {25.0f, true}).empty());
  const std::vector<std::vector<float>> one = {{1.0f, 0.0f}};
  EXPECT_EQ(purify_class(entries_of(one, 1), {99.0f, true}).size(), 1u);
}

TEST(PurifyTest, DropCountIsFloor) {
  EXPECT_EQ(drop_count(4, 25.0f), 1u);
  EXPECT_EQ(drop_count(3, 25.0f), 0u);
  EXPECT_EQ(drop_count(1, 99.0f), 0u);
  EXPECT_EQ(drop_count(200, 99.0f), 198u);
  EXPECT_EQ(drop_count(7, 50.0f), 3u);
}

TEST(PurifyTest, InvalidAlphaIsConfigError) {
  EXPECT_THROW(purify_class({}, {100.0f, true}), ConfigError);
  EXPECT_THROW(purify_class({}, {-1.0f, true}), ConfigError);
}

class BuildBankTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing::scratch_dir("buildbank"); }

  // One 16x16 train image with an 8x8 class-1 square over a 4x4 grid.
  DatasetManifest single_square() {
    std::mt19937_64 rng(14);
    FeatureMap f = testing::random_features(rng, 4, 4, 8);
    f.image_id = "img0";
    DenseLogits l{"img0", 2, 16, 16, std::vector<float>(2 * 16 * 16, 0.0f)};
    for (std::uint32_t r = 0; r < 16; ++r) {
      for (std::uint32_t c = 0; c < 16; ++c) {
        const bool fg = r >= 4 && r < 12 && c >= 4 && c < 12;
        l.at(fg ? 1 : 0, r, c) = 1.0f;
      }
    }
    write_blob(f, dir_ / "img0.feat");
    write_blob(l, dir_ / "img0.logits");
    DatasetManifest m;
    m.class_names = {"background", "square"};
    m.backbone = "test";
    m.images.push_back({"img0", "train", {1}, "img0.feat", "img0.logits", "", "", ""});
    save_manifest(m, dir_ / "manifest.json");
    return load_manifest(dir_ / "manifest.json");
  }

  fs::path dir_;
};

TEST_F(BuildBankTest, SingleSquareGivesForegroundAndBackground) {
  const auto r = build_bank(single_square(), {});
  ASSERT_EQ(r.bank.entries.size(), 2u);
  EXPECT_EQ(r.bank.entries[0].class_id, 0);
  EXPECT_EQ(r.bank.entries[1].class_id, 1);
  EXPECT_EQ(r.bank.d, 8u);
  EXPECT_EQ(r.bank.class_count, 2);
  EXPECT_NO_THROW(r.bank.validate());
  EXPECT_TRUE(r.warnings.empty());
}

TEST_F(BuildBankTest, HighAlphaKeepsSingleEntry) {
  BuildConfig cfg;
  cfg.purify.alpha_pct = 99.0f;
  EXPECT_EQ(build_bank(single_square(), cfg).bank.entries.size(), 2u);
}

TEST_F(BuildBankTest, MissingLogitsIsMissingInput) {
  auto m = single_square();
  m.images[0].logits.clear();
  try {
    build_bank(m, {});
    FAIL() << "expected MissingInput";
  } catch (const MissingInput& e) {
    EXPECT_NE(std::string(e.what()).find("img0"), std::string::npos);
  }
}

TEST_F(BuildBankTest, ClassWithoutSurvivorsWarns) {
  auto m = single_square();
  // Label class 1 in the manifest but make its logits lose everywhere.
  auto l = read_blob<DenseLogits>(dir_ / "img0.logits");
  for (std::uint32_t r = 0; r < 16; ++r) {
    for (std::uint32_t c = 0; c < 16; ++c) {
      l.at(0, r, c) = 1.0f;
      l.at(1, r, c) = 0.0f;
    }
  }
  write_blob(l, dir_ / "img0.logits");
  const auto r = build_bank(m, {});
  EXPECT_EQ(r.bank.entries.size(), 1u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("square"), std::string::npos);
}

TEST(BuildBankSynthTest, PerClassCountsFollowFloorRule) {
  synth::SynthConfig cfg;
  cfg.classes = 4;
  cfg.train_images = 30;
  cfg.test_images = 1;
  cfg.seed = 21;
  const auto dir = testing::scratch_dir("buildbank_synth");
  const auto manifest = synth::write_dataset(synth::generate(cfg), dir);
  const auto r = build_bank(manifest, {});
  std::map<ClassId, std::size_t> counts;
  for (const auto& e : r.bank.entries) ++counts[e.class_id];
  for (ClassId c = 1; c < 4; ++c) {
    const std::size_t n = r.class_stats[c].extracted;
    ASSERT_GT(n, 0u);
    EXPECT_EQ(counts[c], n - n * 25 / 100) << "class " << c;
  }
  EXPECT_EQ(counts[0], r.class_stats[0].extracted);
}

TEST(BuildBankSynthTest, ThreadCountDoesNotChangeTheBank) {
  synth::SynthConfig cfg;
  cfg.train_images = 12;
  cfg.test_images = 1;
  cfg.seed = 5;
  const auto dir = testing::scratch_dir("buildbank_threads");
  const auto manifest = synth::write_dataset(synth::generate(cfg), dir);
  BuildConfig one;
  BuildConfig four;
  four.threads = 4;
  const auto a = build_bank(manifest, one);
  const auto b = build_bank(manifest, four);
  EXPECT_EQ(encode(a.bank), encode(b.bank));
  EXPECT_EQ(a.log_text(), b.log_text());
}

}  // namespace
}  // namespace segbank::bankbuild
