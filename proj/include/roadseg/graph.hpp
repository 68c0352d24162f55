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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "roadseg/kernels.hpp"
#include "roadseg/tensor.hpp"

namespace roadseg {

enum class OpKind {
  kInput,
  kConv,
  kBatchNorm,
  kRelu,
  kSigmoid,
  kSoftmax,
  kMaxPool,
  kResize,
  kAdd,
  kMul,
  kConcat,
};

std::string_view to_string(OpKind kind);

struct ConvAttrs {
  ConvSpec spec;
  int out_channels = 0;
};

struct BatchNormAttrs {
  float eps = 1e-5f;
};

struct PoolAttrs {
  PoolSpec spec;
};

struct ResizeAttrs {
  int out_h = 0;
  int out_w = 0;
  // Integer downsample factor used to map receptive fields back to the
  // source grid; {0, 0} means "derive from the shapes".
  Pair2 rf_ratio{0, 0};
};

using NodeAttrs = std::variant<std::monostate, ConvAttrs, BatchNormAttrs, PoolAttrs, ResizeAttrs>;

struct WeightSlot {
  std::string name;
  std::vector<int> dims;
  // Learned parameters count toward the model size; BN running statistics
  // are buffers and do not.
  bool trainable = true;

  std::int64_t numel() const;
};

struct LayerNode {
  int id = 0;
  std::string name;
  OpKind kind = OpKind::kInput;
  NodeAttrs attrs;
  std::vector<int> inputs;
  std::vector<WeightSlot> slots;
  Shape out_shape;
};

enum class Variant {
  kFull,
  kSdbOnly,
  kCsbOnly,
  kCsbAgg,
  kSelFuseNoAgg,
  kConcat,
  kProduct,
  kAdd,
  kStageProbe,
};

struct VariantConfig {
  Variant variant = Variant::kFull;
  int stage = 0;  // 1..4 for kStageProbe
  Pair2 input_hw{375, 1240};
  Pair2 csb_ratio{2, 4};
};

// Stable variant names: full, sdb, csb, csb-agg, selfuse-noagg, concat,
// product, add, stage1..stage4.
std::string variant_name(const VariantConfig& config);
// Throws std::invalid_argument for unknown names. Size and ratio keep their defaults.
VariantConfig parse_variant(std::string_view name);
std::vector<std::string> all_variant_names();

// Canonical activation taps exposed by the graphs.
namespace taps {
inline constexpr std::string_view kInput = "input";
inline constexpr std::string_view kCsbInput = "csb.input";
inline constexpr std::string_view kF1High = "f1_high";
inline constexpr std::string_view kF2Low = "f2_low";
inline constexpr std::string_view kAggBlock1 = "agg.block1.out";
inline constexpr std::string_view kAggBlock2 = "agg.block2.out";
inline constexpr std::string_view kFaLow = "fa_low";
inline constexpr std::string_view kAdjusted = "adjusted";
inline constexpr std::string_view kAttention = "attention";
inline constexpr std::string_view kFused = "fused";
inline constexpr std::string_view kLogitsLow = "logits_low";
inline constexpr std::string_view kLogits = "logits";
}  // namespace taps

class GraphBuilder;

// Immutable, topologically ordered layer list for one variant at one input size.
class ModelGraph {
 public:
  const VariantConfig& config() const { return config_; }
  const std::vector<LayerNode>& nodes() const { return nodes_; }
  const LayerNode& node(int id) const { return nodes_.at(id); }
  int output() const { return output_; }

  // Resolves a tap alias or a node name.
  std::optional<int> find(std::string_view name) const;
  const LayerNode& node(std::string_view name) const;
  const std::map<std::string, int, std::less<>>& aliases() const { return aliases_; }

  // All weight slots in graph order.
  std::vector<WeightSlot> weight_slots() const;

 private:
  friend class GraphBuilder;
  VariantConfig config_;
  std::vector<LayerNode> nodes_;
  std::map<std::string, int, std::less<>> names_;
  std::map<std::string, int, std::less<>> aliases_;
  int output_ = -1;
};

// Wires the requested variant. Throws GraphError naming the first layer whose
// output would be empty when input_hw is too small.
ModelGraph build(const VariantConfig& config);

// Spatial dims of the spatial-detail feature for an input of `input_hw`.
Pair2 detail_feature_hw(Pair2 input_hw);

// Sum of trainable weight-slot sizes over nodes whose name starts with `prefix`.
std::int64_t count_params(const ModelGraph& graph, std::string_view prefix = {});

// Multiply-accumulates of one node: kh*kw*(c_in/groups)*c_out*h_out*w_out for
// convolutions, zero for every other kind.
std::int64_t node_macs(const ModelGraph& graph, const LayerNode& node);
std::int64_t count_macs(const ModelGraph& graph, std::string_view prefix = {});

struct BranchCost {
  std::string branch;  // node-name prefix before the first '.'
  std::int64_t params = 0;
  std::int64_t macs = 0;
};
std::vector<BranchCost> cost_breakdown(const ModelGraph& graph);

struct ReceptiveField {
  int rf_h = 1;
  int rf_w = 1;
  int jump_h = 1;
  int jump_w = 1;
  bool operator==(const ReceptiveField&) const = default;
};

// Receptive field of a node in original-image pixels. Per layer and axis:
// rf += (k - 1) * d * jump, jump *= s. Downsampling resizes scale both by the
// declared ratio; bilinear upsampling adds one input jump (two-tap support).
// Multi-input nodes take the per-axis maximum.
ReceptiveField receptive_field(const ModelGraph& graph, std::string_view node_name);

// Text manifest of weight slots: one "name dims trainable|buffer" line each.
std::string manifest(const ModelGraph& graph);

}  // namespace roadseg
