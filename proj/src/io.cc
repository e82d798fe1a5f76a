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

#include "segbank/io.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "segbank/error.h"

namespace segbank {
namespace {

constexpr char kMagic[4] = {'M', 'S', 'E', 'G'};

void put_mask_words(ByteWriter& out, const BitMask& m) {
  for (std::uint64_t w : m.words()) out.u64(w);
}

BitMask get_mask(ByteReader& in, std::uint32_t height, std::uint32_t width) {
  const std::size_t n = BitMask::word_count(height, width);
  in.require(n * 8);
  BitMask m(height, width);
  auto words = m.words();
  for (std::size_t i = 0; i < n; ++i) words[i] = in.u64();
  const std::size_t bits = m.size();
  if (bits % 64 != 0 && (words[n - 1] >> (bits % 64)) != 0) {
    throw CorruptError("BitMask: non-zero padding bits");
  }
  return m;
}

template <typename T>
T validated(T v) {
  v.validate();
  return v;
}

}  // namespace

std::string_view record_type_name(RecordType type) {
  switch (type) {
    case RecordType::kFeatureMap: return "FeatureMap";
    case RecordType::kDenseLogits: return "DenseLogits";
    case RecordType::kBitMask: return "BitMask";
    case RecordType::kSoftMask: return "SoftMask";
    case RecordType::kProposalSet: return "ProposalSet";
    case RecordType::kFeatureBank: return "FeatureBank";
    case RecordType::kSegmentationMap: return "SegmentationMap";
    case RecordType::kIndex: return "Index";
  }
  return "Unknown";
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  for (char c : s) buf_.push_back(static_cast<std::byte>(c));
}

void ByteWriter::header(RecordType type) {
  for (char c : kMagic) buf_.push_back(static_cast<std::byte>(c));
  u16(kFormatVersion);
  u16(static_cast<std::uint16_t>(type));
}

std::uint64_t ByteReader::get(int n) {
  require(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += static_cast<std::size_t>(n);
  return v;
}

void ByteReader::require(std::size_t n) const {
  if (remaining() < n) {
    throw CorruptError("truncated payload: need " + std::to_string(n) + " bytes, have " +
                       std::to_string(remaining()));
  }
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  require(n);
  std::string s(n, '\0');
  for (std::uint32_t i = 0; i < n; ++i) s[i] = static_cast<char>(data_[pos_ + i]);
  pos_ += n;
  return s;
}

std::vector<float> ByteReader::f32_array(std::size_t count) {
  if (count > remaining() / 4) require(count * 4);
  std::vector<float> v(count);
  for (auto& x : v) x = f32();
  return v;
}

RecordType ByteReader::header() {
  if (remaining() < 4 || !std::equal(kMagic, kMagic + 4, data_.begin() + pos_,
                                     [](char a, std::byte b) { return static_cast<std::byte>(a) == b; })) {
    throw FormatError("bad magic: not an MSEG record");
  }
  pos_ += 4;
  const std::uint16_t version = u16();
  if (version != kFormatVersion) {
    throw VersionError("unsupported format version " + std::to_string(version) +
                       " (expected " + std::to_string(kFormatVersion) + ")");
  }
  return static_cast<RecordType>(u16());
}

void ByteReader::expect_header(RecordType type) {
  const RecordType got = header();
  if (got != type) {
    throw FormatError("expected " + std::string(record_type_name(type)) + " record, found tag " +
                      std::to_string(static_cast<unsigned>(got)));
  }
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw CorruptError(std::to_string(remaining()) + " trailing bytes after payload");
  }
}

// --- encoders ---------------------------------------------------------------

std::vector<std::byte> encode(const FeatureMap& v) {
  ByteWriter out;
  out.header(RecordType::kFeatureMap);
  out.str(v.image_id);
  out.u32(v.h);
  out.u32(v.w);
  out.u32(v.d);
  out.u32(v.patch);
  for (float x : v.data) out.f32(x);
  return out.take();
}

std::vector<std::byte> encode(const DenseLogits& v) {
  ByteWriter out;
  out.header(RecordType::kDenseLogits);
  out.str(v.image_id);
  out.u32(v.classes);
  out.u32(v.height);
  out.u32(v.width);
  for (float x : v.data) out.f32(x);
  return out.take();
}

std::vector<std::byte> encode(const BitMask& v) {
  ByteWriter out;
  out.header(RecordType::kBitMask);
  out.u32(v.height());
  out.u32(v.width());
  put_mask_words(out, v);
  return out.take();
}

std::vector<std::byte> encode(const SoftMask& v) {
  ByteWriter out;
  out.header(RecordType::kSoftMask);
  out.u32(v.h);
  out.u32(v.w);
  for (float x : v.weights) out.f32(x);
  return out.take();
}

std::vector<std::byte> encode(const ProposalSet& v) {
  ByteWriter out;
  out.header(RecordType::kProposalSet);
  out.str(v.image_id);
  out.u32(v.height);
  out.u32(v.width);
  out.u32(static_cast<std::uint32_t>(v.proposals.size()));
  for (const auto& p : v.proposals) {
    out.f32(p.objectness);
    put_mask_words(out, p.mask);
  }
  return out.take();
}

std::vector<std::byte> encode(const FeatureBank& v) {
  ByteWriter out;
  out.header(RecordType::kFeatureBank);
  out.u32(v.d);
  out.u16(v.class_count);
  out.u64(v.config_fingerprint);
  out.u32(static_cast<std::uint32_t>(v.entries.size()));
  for (const auto& e : v.entries) {
    out.u16(e.class_id);
    out.str(e.source_image);
    for (float x : e.vector) out.f32(x);
  }
  return out.take();
}

std::vector<std::byte> encode(const SegmentationMap& v) {
  ByteWriter out;
  out.header(RecordType::kSegmentationMap);
  out.u32(v.height);
  out.u32(v.width);
  for (ClassId l : v.labels) out.u16(l);
  return out.take();
}

// --- decoders ---------------------------------------------------------------

template <>
FeatureMap decode<FeatureMap>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kFeatureMap);
  FeatureMap v;
  v.image_id = in.str();
  v.h = in.u32();
  v.w = in.u32();
  v.d = in.u32();
  v.patch = in.u32();
  v.data = in.f32_array(static_cast<std::size_t>(v.h) * v.w * v.d);
  in.expect_end();
  return validated(std::move(v));
}

template <>
DenseLogits decode<DenseLogits>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kDenseLogits);
  DenseLogits v;
  v.image_id = in.str();
  v.classes = in.u32();
  v.height = in.u32();
  v.width = in.u32();
  v.data = in.f32_array(static_cast<std::size_t>(v.classes) * v.height * v.width);
  in.expect_end();
  return validated(std::move(v));
}

template <>
BitMask decode<BitMask>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kBitMask);
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  BitMask m = get_mask(in, h, w);
  in.expect_end();
  return m;
}

template <>
SoftMask decode<SoftMask>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kSoftMask);
  SoftMask v;
  v.h = in.u32();
  v.w = in.u32();
  v.weights = in.f32_array(static_cast<std::size_t>(v.h) * v.w);
  in.expect_end();
  return validated(std::move(v));
}

template <>
ProposalSet decode<ProposalSet>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kProposalSet);
  ProposalSet v;
  v.image_id = in.str();
  v.height = in.u32();
  v.width = in.u32();
  const std::uint32_t m = in.u32();
  const std::size_t per = 4 + 8 * BitMask::word_count(v.height, v.width);
  if (m > in.remaining() / per) in.require(static_cast<std::size_t>(m) * per);
  v.proposals.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    Proposal p;
    p.objectness = in.f32();
    p.mask = get_mask(in, v.height, v.width);
    v.proposals.push_back(std::move(p));
  }
  in.expect_end();
  return validated(std::move(v));
}

template <>
FeatureBank decode<FeatureBank>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kFeatureBank);
  FeatureBank v;
  v.d = in.u32();
  v.class_count = in.u16();
  v.config_fingerprint = in.u64();
  const std::uint32_t n = in.u32();
  // Smallest possible entry: class id + empty string + d floats.
  const std::size_t min_entry = 2 + 4 + 4 * static_cast<std::size_t>(v.d);
  if (n > in.remaining() / min_entry) in.require(static_cast<std::size_t>(n) * min_entry);
  v.entries.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    BankEntry e;
    e.class_id = in.u16();
    e.source_image = in.str();
    e.vector = in.f32_array(v.d);
    v.entries.push_back(std::move(e));
  }
  in.expect_end();
  return validated(std::move(v));
}

template <>
SegmentationMap decode<SegmentationMap>(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kSegmentationMap);
  SegmentationMap v;
  v.height = in.u32();
  v.width = in.u32();
  const std::size_t n = static_cast<std::size_t>(v.height) * v.width;
  if (n > in.remaining() / 2) in.require(n * 2);
  v.labels.resize(n);
  for (auto& l : v.labels) l = in.u16();
  in.expect_end();
  return validated(std::move(v));
}

// --- files ------------------------------------------------------------------

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("short read on " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed on " + path.string());
}

RecordType peek_record_type(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::byte head[8] = {};
  f.read(reinterpret_cast<char*>(head), sizeof(head));
  ByteReader in(std::span<const std::byte>(head, static_cast<std::size_t>(f.gcount())));
  return in.header();
}

// --- manifest ---------------------------------------------------------------

std::vector<const ImageRecord*> DatasetManifest::split(std::string_view name) const {
  std::vector<const ImageRecord*> out;
  for (const auto& img : images) {
    if (img.split == name) out.push_back(&img);
  }
  return out;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = "segbank-manifest";
  j["version"] = 1;
  j["backbone"] = manifest.backbone;
  j["class_names"] = manifest.class_names;
  ordered_json images = ordered_json::array();
  for (const auto& img : manifest.images) {
    ordered_json r;
    r["image_id"] = img.image_id;
    r["split"] = img.split;
    r["labels"] = img.labels;
    const std::pair<const char*, const std::string*> files[] = {
        {"features", &img.features}, {"logits", &img.logits}, {"seg", &img.seg},
        {"proposals", &img.proposals}, {"gt", &img.gt}};
    for (const auto& [key, value] : files) {
      if (!value->empty()) r[key] = *value;
    }
    images.push_back(std::move(r));
  }
  j["images"] = std::move(images);
  return j.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const std::string text = manifest_to_json(manifest);
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  using nlohmann::json;
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(reinterpret_cast<const char*>(bytes.data()),
                    reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.root = path.parent_path();
  try {
    if (j.value("format", "") != "segbank-manifest") {
      throw FormatError("manifest " + path.string() + ": missing format tag");
    }
    if (j.value("version", 0) != 1) {
      throw VersionError("manifest " + path.string() + ": unsupported version");
    }
    m.backbone = j.value("backbone", "unknown");
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (m.class_names.size() < 2 || m.class_names.size() >= kIgnore) {
      throw ValidationError("manifest: need between 2 and 65533 classes (class 0 = background)");
    }
    std::set<std::string> ids;
    for (const auto& r : j.at("images")) {
      ImageRecord img;
      img.image_id = r.at("image_id").get<std::string>();
      img.split = r.at("split").get<std::string>();
      img.labels = r.value("labels", std::vector<ClassId>{});
      img.features = r.value("features", "");
      img.logits = r.value("logits", "");
      img.seg = r.value("seg", "");
      img.proposals = r.value("proposals", "");
      img.gt = r.value("gt", "");
      if (img.split != "train" && img.split != "test") {
        throw ValidationError("manifest: image '" + img.image_id + "' has split '" + img.split +
                              "' (expected train or test)");
      }
      if (!ids.insert(img.image_id).second) {
        throw ValidationError("manifest: duplicate image_id '" + img.image_id + "'");
      }
      for (ClassId c : img.labels) {
        if (c >= m.class_count()) {
          throw LabelRangeError("manifest: image '" + img.image_id + "' label " + std::to_string(c) +
                                " >= class count " + std::to_string(m.class_count()));
        }
      }
      for (const std::string* f : {&img.features, &img.logits, &img.seg, &img.proposals, &img.gt}) {
        if (!f->empty() && !std::filesystem::exists(m.resolve(*f))) {
          throw MissingInput("manifest: image '" + img.image_id + "' references missing file " + *f);
        }
      }
      m.images.push_back(std::move(img));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace segbank
