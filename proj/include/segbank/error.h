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

#pragma once

#include <stdexcept>
#include <string>

namespace segbank {

// Base of every error the engine raises. `kind()` is the stable, machine
// readable name printed by the CLI (e.g. "ShapeError").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SEGBANK_DEFINE_ERROR(Name)                                 \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

SEGBANK_DEFINE_ERROR(FormatError);
SEGBANK_DEFINE_ERROR(VersionError);
SEGBANK_DEFINE_ERROR(CorruptError);
SEGBANK_DEFINE_ERROR(ValidationError);
SEGBANK_DEFINE_ERROR(ShapeError);
SEGBANK_DEFINE_ERROR(ConfigError);
SEGBANK_DEFINE_ERROR(LabelRangeError);
SEGBANK_DEFINE_ERROR(InvalidLogits);
SEGBANK_DEFINE_ERROR(DegenerateMask);
SEGBANK_DEFINE_ERROR(MissingInput);
SEGBANK_DEFINE_ERROR(GenerationError);
SEGBANK_DEFINE_ERROR(IoError);
SEGBANK_DEFINE_ERROR(MetricError);

#undef SEGBANK_DEFINE_ERROR

}  // namespace segbank
