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

// Binary interchange format and dataset manifest.
//
// Every record file is
//
//   "MSEG"  u16 format_version  u16 type_tag  payload...
//
// with all integers and floats little-endian. Strings are a u32 byte length
// followed by UTF-8 bytes. Payload layouts are documented in
// docs/interchange.md.

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segbank/types.h"

namespace segbank {

inline constexpr std::uint16_t kFormatVersion = 1;

enum class RecordType : std::uint16_t {
  kFeatureMap = 1,
  kDenseLogits = 2,
  kBitMask = 3,
  kSoftMask = 4,
  kProposalSet = 5,
  kFeatureBank = 6,
  kSegmentationMap = 7,
  kIndex = 8,
};

std::string_view record_type_name(RecordType type);

// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void str(std::string_view s);
  void bytes(std::span<const std::byte> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }

  void header(RecordType type);
  const std::vector<std::byte>& buffer() const { return buf_; }
  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }
  }
  std::vector<std::byte> buf_;
};

// Bounds-checked decoder; running past the end throws CorruptError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
  std::string str();
  // Reads `count` f32 values after checking that they fit in the input.
  std::vector<float> f32_array(std::size_t count);

  // Consumes the header and returns the type tag. Throws FormatError or
  // VersionError.
  RecordType header();
  void expect_header(RecordType type);
  // Throws CorruptError when bytes remain.
  void expect_end() const;
  std::size_t remaining() const { return data_.size() - pos_; }
  void require(std::size_t n) const;

 private:
  std::uint64_t get(int n);
  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> encode(const FeatureMap& v);
std::vector<std::byte> encode(const DenseLogits& v);
std::vector<std::byte> encode(const BitMask& v);
std::vector<std::byte> encode(const SoftMask& v);
std::vector<std::byte> encode(const ProposalSet& v);
std::vector<std::byte> encode(const FeatureBank& v);
std::vector<std::byte> encode(const SegmentationMap& v);

// Decoders validate the record's invariants; a violation raises
// ValidationError, never a silent repair.
template <typename T>
T decode(std::span<const std::byte> bytes);

template <> FeatureMap decode<FeatureMap>(std::span<const std::byte>);
template <> DenseLogits decode<DenseLogits>(std::span<const std::byte>);
template <> BitMask decode<BitMask>(std::span<const std::byte>);
template <> SoftMask decode<SoftMask>(std::span<const std::byte>);
template <> ProposalSet decode<ProposalSet>(std::span<const std::byte>);
template <> FeatureBank decode<FeatureBank>(std::span<const std::byte>);
template <> SegmentationMap decode<SegmentationMap>(std::span<const std::byte>);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

template <typename T>
void write_blob(const T& record, const std::filesystem::path& path) {
  write_file(path, encode(record));
}

template <typename T>
T read_blob(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode<T>(bytes);
}

// Reads only the header of `path` and returns its type tag.
RecordType peek_record_type(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset manifest (UTF-8 JSON, schema in docs/manifest.md).

struct ImageRecord {
  std::string image_id;
  std::string split;  // "train" or "test"
  std::vector<ClassId> labels;
  // Paths relative to the manifest directory; empty when absent.
  std::string features;
  std::string logits;
  std::string seg;
  std::string proposals;
  std::string gt;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::string backbone = "unknown";
  std::vector<ImageRecord> images;
  // Directory the relative paths resolve against. Not serialized.
  std::filesystem::path root;

  ClassId class_count() const { return static_cast<ClassId>(class_names.size()); }
  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
  std::vector<const ImageRecord*> split(std::string_view name) const;
};

// Parses and validates a manifest. Every referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);
// Writes the manifest JSON; paths are stored exactly as given.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

}  // namespace segbank
