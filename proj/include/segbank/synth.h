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

// Deterministic synthetic datasets that stand in for a real backbone, logit
// source and mask proposer.
//
// Each class owns a unit centroid (pairwise angle >= centroid_min_angle_deg).
// Images hold non-overlapping rectangles and disks on background; a feature
// cell is the normalized centroid of its majority class plus Gaussian noise,
// logits are a noisy one-hot of the (optionally boundary-jittered)
// ground truth, and proposals are the exact shape masks plus distractors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segbank/io.h"
#include "segbank/types.h"

namespace segbank::synth {

struct SynthConfig {
  std::uint32_t classes = 5;  // including background
  std::uint32_t train_images = 50;
  std::uint32_t test_images = 20;
  std::uint32_t image_px = 64;
  std::uint32_t grid = 8;
  std::uint32_t d = 32;
  float centroid_min_angle_deg = 60.0f;
  float noise_sigma = 0.05f;
  std::uint32_t shapes_min = 2;  // shapes per image, at most one per class
  std::uint32_t shapes_max = 3;
  // Extra proposals per test image: even ones are shifted shape copies scored
  // below tau_obj, odd ones are background blobs scored above it.
  std::uint32_t distractors = 4;
  float tau_obj = 0.5f;
  // Pseudo-mask boundaries are grown or shrunk by up to this many pixels.
  std::uint32_t boundary_noise_px = 0;
  // Chance that a train image's logits hallucinate an absent class.
  float hallucination_prob = 0.3f;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthImage {
  std::string image_id;
  std::string split;
  std::vector<ClassId> labels;
  FeatureMap features;
  SegmentationMap gt;
  DenseLogits logits;     // train only
  ProposalSet proposals;  // test only
};

struct SynthDataset {
  std::vector<std::string> class_names;
  std::vector<std::vector<float>> centroids;
  std::vector<SynthImage> images;
};

// Pure function of the config. Throws GenerationError if shapes cannot be
// placed or the centroid angle is unattainable.
SynthDataset generate(const SynthConfig& cfg);

// Writes every record plus manifest.json into `dir` and returns the manifest.
DatasetManifest write_dataset(const SynthDataset& ds, const std::filesystem::path& dir);

}  // namespace segbank::synth
