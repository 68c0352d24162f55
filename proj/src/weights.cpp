/* Copyright 2026 The roadseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadseg/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <zlib.h>

namespace roadseg {

// ---------------------------------------------------------------------------
// WeightStore

void WeightStore::add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
  if (name.size() > 0xFFFF) {
    throw FormatError(FormatErrorKind::kInvalidEntry, "weight name longer than 65535 bytes");
  }
  if (dims.size() > 0xFF) {
    throw FormatError(FormatErrorKind::kInvalidEntry, fmt::format("'{}': too many dims", name));
  }
  std::uint64_t count = 1;
  for (auto d : dims) {
    if (d == 0) {
      throw FormatError(FormatErrorKind::kInvalidEntry, fmt::format("'{}': zero dimension", name));
    }
    count *= d;
  }
  if (count != data.size()) {
    throw FormatError(FormatErrorKind::kInvalidEntry,
                      fmt::format("'{}': dims hold {} values, data has {}", name, count,
                                  data.size()));
  }
  if (index_.count(name)) {
    throw FormatError(FormatErrorKind::kInvalidEntry, fmt::format("duplicate entry '{}'", name));
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(dims), std::move(data)});
}

void WeightStore::add(std::string name, const Tensor& tensor) {
  const Shape& s = tensor.shape();
  std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                  static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  add(std::move(name), std::move(dims), {tensor.data().begin(), tensor.data().end()});
}

const WeightEntry* WeightStore::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const WeightEntry& WeightStore::at(std::string_view name) const {
  const auto* e = find(name);
  if (!e) throw BindError(fmt::format("no weight entry named '{}'", name));
  return *e;
}

Tensor WeightStore::tensor(std::string_view name) const {
  const auto& e = at(name);
  if (e.dims.size() > 4) {
    throw ShapeError(fmt::format("'{}' has {} dims; tensors hold at most 4", name, e.dims.size()));
  }
  int d[4] = {1, 1, 1, 1};
  const std::size_t off = 4 - e.dims.size();
  for (std::size_t i = 0; i < e.dims.size(); ++i) d[off + i] = static_cast<int>(e.dims[i]);
  return Tensor({d[0], d[1], d[2], d[3]}, e.data);
}

// ---------------------------------------------------------------------------
// Codec

std::string_view to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad-magic";
    case FormatErrorKind::kBadVersion: return "bad-version";
    case FormatErrorKind::kChecksum: return "checksum";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kUnsupportedDtype: return "unsupported-dtype";
    case FormatErrorKind::kInvalidEntry: return "invalid-entry";
    case FormatErrorKind::kIo: return "io";
  }
  return "?";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto len = static_cast<uInt>(std::min(kChunk, bytes.size() - off));
    crc = ::crc32(crc, bytes.data() + off, len);
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'F', 'D', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  void f32s(std::span<float> out) {
    need(out.size() * 4);
    for (auto& v : out) v = std::bit_cast<float>(u32());
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatErrorKind::kTruncated,
                        fmt::format("truncated weight file: need {} bytes at offset {}, have {}",
                                    n, pos_, bytes_.size() - pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const WeightStore& store) {
  ByteWriter w;
  for (auto b : kMagic) w.u8(b);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.u32(d);
    for (float v : e.data) w.f32(v);
  }
  auto& buf = w.buffer();
  const std::uint32_t crc = crc32(buf);
  w.u32(crc);
  return std::move(buf);
}

WeightStore decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (auto b : kMagic) {
    if (r.u8() != b) throw FormatError(FormatErrorKind::kBadMagic, "not an LFDW weight file");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw FormatError(FormatErrorKind::kBadVersion,
                      fmt::format("unsupported weight file version {}", version));
  }
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF32) {
      throw FormatError(FormatErrorKind::kUnsupportedDtype,
                        fmt::format("entry '{}': unsupported dtype {}", name, dtype));
    }
    const std::uint8_t ndim = r.u8();
    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      d = r.u32();
      numel *= d;
    }
    if (numel * 4 > r.remaining()) {
      throw FormatError(FormatErrorKind::kTruncated,
                        fmt::format("entry '{}': {} values exceed the file", name, numel));
    }
    std::vector<float> data(numel);
    r.f32s(data);
    store.add(std::move(name), std::move(dims), std::move(data));
  }
  const std::size_t payload = r.pos();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kInvalidEntry,
                      fmt::format("{} trailing bytes after checksum", r.remaining()));
  }
  const std::uint32_t actual = crc32(bytes.first(payload));
  if (stored != actual) {
    throw FormatError(FormatErrorKind::kChecksum,
                      fmt::format("checksum mismatch: stored {:08x}, computed {:08x}", stored,
                                  actual));
  }
  return store;
}

void write(const WeightStore& store, std::ostream& sink) {
  const auto bytes = encode(store);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw FormatError(FormatErrorKind::kIo, "failed writing weight stream");
}

WeightStore read(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)),
                                  std::istreambuf_iterator<char>());
  if (source.bad()) throw FormatError(FormatErrorKind::kIo, "failed reading weight stream");
  return decode(bytes);
}

void write_file(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string() + " for writing");
  write(store, out);
}

WeightStore read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------
// Binding

namespace {

bool dims_match(const WeightSlot& slot, const WeightEntry& entry) {
  if (slot.dims.size() != entry.dims.size()) return false;
  for (std::size_t i = 0; i < slot.dims.size(); ++i) {
    if (static_cast<std::uint32_t>(slot.dims[i]) != entry.dims[i]) return false;
  }
  return true;
}

}  // namespace

BindReport check_binding(const ModelGraph& graph, const WeightStore& store) {
  BindReport report;
  std::map<std::string_view, bool> used;
  for (const auto& slot : graph.weight_slots()) {
    const auto* e = store.find(slot.name);
    if (!e) {
      report.unbound.push_back(slot.name);
      continue;
    }
    used[e->name] = true;
    if (!dims_match(slot, *e)) {
      report.mismatched.push_back(fmt::format("{} (expected {}, got {})", slot.name,
                                              fmt::join(slot.dims, "x"), fmt::join(e->dims, "x")));
    }
  }
  for (const auto& e : store.entries()) {
    if (!used.count(e.name)) report.unused.push_back(e.name);
  }
  return report;
}

BoundModel bind(ModelGraph graph, const WeightStore& store) {
  BindReport report = check_binding(graph, store);
  if (!report.ok()) {
    std::string msg = "cannot bind weights:";
    for (const auto& s : report.unbound) msg += "\n  unbound slot " + s;
    for (const auto& s : report.mismatched) msg += "\n  dim mismatch " + s;
    throw BindError(msg);
  }
  BoundModel model;
  model.weights_.resize(graph.nodes().size());
  for (const auto& n : graph.nodes()) {
    for (const auto& slot : n.slots) model.weights_[n.id].push_back(store.tensor(slot.name));
  }
  model.graph_ = std::move(graph);
  model.report_ = std::move(report);
  return model;
}

// ---------------------------------------------------------------------------
// Generated stores

namespace {

std::vector<std::uint32_t> to_u32(const std::vector<int>& dims) {
  return {dims.begin(), dims.end()};
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

WeightStore synthesize_weights(const ModelGraph& graph, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  WeightStore store;
  for (const auto& n : graph.nodes()) {
    for (const auto& slot : n.slots) {
      std::vector<float> data(static_cast<std::size_t>(slot.numel()));
      if (n.kind == OpKind::kConv && ends_with(slot.name, ".weight")) {
        const int fan_in = slot.dims[1] * slot.dims[2] * slot.dims[3];
        const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
        for (auto& v : data) v = normal(rng) * stddev;
      } else if (ends_with(slot.name, ".running_var")) {
        for (auto& v : data) v = 0.5f + uniform(rng);
      } else if (ends_with(slot.name, ".running_mean") || ends_with(slot.name, ".bias")) {
        for (auto& v : data) v = 0.1f * normal(rng);
      } else {  // BN gamma
        for (auto& v : data) v = 0.5f + 0.5f * uniform(rng);
      }
      store.add(slot.name, to_u32(slot.dims), std::move(data));
    }
  }
  return store;
}

WeightStore zero_weights(const ModelGraph& graph) {
  WeightStore store;
  for (const auto& n : graph.nodes()) {
    for (const auto& slot : n.slots) {
      float fill = 0.0f;
      if (n.kind == OpKind::kBatchNorm &&
          (ends_with(slot.name, ".weight") || ends_with(slot.name, ".running_var"))) {
        fill = 1.0f;
      }
      store.add(slot.name, to_u32(slot.dims),
                std::vector<float>(static_cast<std::size_t>(slot.numel()), fill));
    }
  }
  return store;
}

}  // namespace roadseg
