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

// Binary erosion used to strip unreliable boundary pixels from pseudo-masks
// before features are pooled.

#pragma once

#include <cstdint>

#include "segbank/types.h"

namespace segbank::morphology {

struct MorphConfig {
  // Edge length of the square structuring element; odd, >= 1.
  std::uint32_t kernel = 3;
  std::uint32_t iterations = 20;
  // Halve the iteration count while the eroded mask comes out empty.
  bool backoff = true;

  void validate() const;
};

// Erodes `mask` `cfg.iterations` times with a kernel x kernel square. A pixel
// survives one pass iff its whole window is foreground; pixels outside the
// image count as background, so the result always shrinks away from the
// border. Ignores `cfg.backoff`.
BitMask erode(const BitMask& mask, const MorphConfig& cfg);

struct BackoffResult {
  BitMask mask;
  std::uint32_t effective_iterations = 0;
};

// erode() with the largest t' in {t, t/2, t/4, ..., 0} whose output is not
// empty. An empty input yields an empty mask with t' = 0. With backoff off
// this is erode() at the full t.
BackoffResult erode_with_backoff(const BitMask& mask, const MorphConfig& cfg);

// Number of erode() calls made on the current thread. Lets tests assert that
// a code path never erodes.
std::uint64_t erosion_invocations();

}  // namespace segbank::morphology
