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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roadseg/error.hpp"
#include "roadseg/graph.hpp"
#include "roadseg/tensor.hpp"

namespace roadseg {

struct WeightEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const WeightEntry&) const = default;
};

// Ordered name -> tensor map; names are unique and data length equals the
// product of dims.
class WeightStore {
 public:
  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data);
  // Stores a tensor with its four NCHW dims.
  void add(std::string name, const Tensor& tensor);

  const std::vector<WeightEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view name) const { return index_.count(name) > 0; }
  const WeightEntry* find(std::string_view name) const;
  const WeightEntry& at(std::string_view name) const;

  // Entry as a tensor; dims are right-aligned into (n, c, h, w).
  Tensor tensor(std::string_view name) const;

  bool operator==(const WeightStore& other) const { return entries_ == other.entries_; }

 private:
  std::vector<WeightEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class FormatErrorKind {
  kBadMagic,
  kBadVersion,
  kChecksum,
  kTruncated,
  kUnsupportedDtype,
  kInvalidEntry,
  kIo,
};

std::string_view to_string(FormatErrorKind kind);

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

// .lfdw container, little-endian:
//   "LFDW" | u32 version (1) | u32 count |
//   count x { u16 name_len | name | u8 dtype (0 = f32) | u8 ndim | ndim x u32 | f32 data } |
//   u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode(const WeightStore& store);
WeightStore decode(std::span<const std::uint8_t> bytes);

void write(const WeightStore& store, std::ostream& sink);
WeightStore read(std::istream& source);
void write_file(const WeightStore& store, const std::filesystem::path& path);
WeightStore read_file(const std::filesystem::path& path);

struct BindReport {
  std::vector<std::string> unbound;     // graph slots missing from the store
  std::vector<std::string> mismatched;  // present but with different dims
  std::vector<std::string> unused;      // store entries no slot asked for

  bool ok() const { return unbound.empty() && mismatched.empty(); }
};

BindReport check_binding(const ModelGraph& graph, const WeightStore& store);

// A graph with every weight slot resolved to a tensor. Immutable and safe to
// share between threads.
class BoundModel {
 public:
  const ModelGraph& graph() const { return graph_; }
  // Tensors for the node's slots, in slot order.
  std::span<const Tensor> weights(int node_id) const { return weights_.at(node_id); }
  const BindReport& report() const { return report_; }

 private:
  friend BoundModel bind(ModelGraph graph, const WeightStore& store);
  ModelGraph graph_;
  std::vector<std::vector<Tensor>> weights_;
  BindReport report_;
};

// Throws BindError naming every unbound or mismatched slot.
BoundModel bind(ModelGraph graph, const WeightStore& store);

// Deterministic He-style random weights with plausible BN statistics.
WeightStore synthesize_weights(const ModelGraph& graph, std::uint64_t seed);

// Zero conv weights and biases; BN parameters set to the identity transform
// (gamma 1, beta 0, mean 0, var 1).
WeightStore zero_weights(const ModelGraph& graph);

}  // namespace roadseg
