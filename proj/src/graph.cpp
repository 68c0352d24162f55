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

#include "roadseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "roadseg/error.hpp"

namespace roadseg {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConv: return "conv";
    case OpKind::kBatchNorm: return "bn";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kMaxPool: return "maxpool";
    case OpKind::kResize: return "resize";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
  }
  return "?";
}

std::int64_t WeightSlot::numel() const {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1},
                         [](std::int64_t a, int d) { return a * d; });
}

// ---------------------------------------------------------------------------
// Variant names

namespace {

struct NamedVariant {
  std::string_view name;
  Variant variant;
  int stage;
};

constexpr NamedVariant kVariantNames[] = {
    {"full", Variant::kFull, 0},
    {"sdb", Variant::kSdbOnly, 0},
    {"csb", Variant::kCsbOnly, 0},
    {"csb-agg", Variant::kCsbAgg, 0},
    {"selfuse-noagg", Variant::kSelFuseNoAgg, 0},
    {"concat", Variant::kConcat, 0},
    {"product", Variant::kProduct, 0},
    {"add", Variant::kAdd, 0},
    {"stage1", Variant::kStageProbe, 1},
    {"stage2", Variant::kStageProbe, 2},
    {"stage3", Variant::kStageProbe, 3},
    {"stage4", Variant::kStageProbe, 4},
};

}  // namespace

std::string variant_name(const VariantConfig& config) {
  for (const auto& nv : kVariantNames) {
    if (nv.variant == config.variant && nv.stage == config.stage) return std::string(nv.name);
  }
  if (config.variant == Variant::kStageProbe) return fmt::format("stage{}", config.stage);
  return "unknown";
}

VariantConfig parse_variant(std::string_view name) {
  for (const auto& nv : kVariantNames) {
    if (nv.name == name) {
      VariantConfig cfg;
      cfg.variant = nv.variant;
      cfg.stage = nv.stage;
      return cfg;
    }
  }
  throw std::invalid_argument(fmt::format("unknown variant '{}'", name));
}

std::vector<std::string> all_variant_names() {
  std::vector<std::string> out;
  for (const auto& nv : kVariantNames) out.emplace_back(nv.name);
  return out;
}

// ---------------------------------------------------------------------------
// ModelGraph

std::optional<int> ModelGraph::find(std::string_view name) const {
  if (auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  if (auto it = names_.find(name); it != names_.end()) return it->second;
  return std::nullopt;
}

const LayerNode& ModelGraph::node(std::string_view name) const {
  auto id = find(name);
  if (!id) throw GraphError(fmt::format("no node or tap named '{}'", name));
  return nodes_[*id];
}

std::vector<WeightSlot> ModelGraph::weight_slots() const {
  std::vector<WeightSlot> out;
  for (const auto& n : nodes_) out.insert(out.end(), n.slots.begin(), n.slots.end());
  return out;
}

// ---------------------------------------------------------------------------
// Builder

class GraphBuilder {
 public:
  explicit GraphBuilder(const VariantConfig& cfg) { graph_.config_ = cfg; }

  int input(std::string name, Shape shape) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = OpKind::kInput;
    n.out_shape = shape;
    return push(std::move(n));
  }

  int conv(std::string name, int in, int out_c, ConvSpec spec) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = OpKind::kConv;
    n.inputs = {in};
    const int in_c = shape(in).c;
    n.attrs = ConvAttrs{spec, out_c};
    n.slots.push_back({n.name + ".weight", {out_c, in_c / std::max(1, spec.groups), spec.kernel.h,
                                            spec.kernel.w}});
    if (spec.bias) n.slots.push_back({n.name + ".bias", {out_c}});
    return push(std::move(n));
  }

  int batchnorm(std::string name, int in) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = OpKind::kBatchNorm;
    n.inputs = {in};
    n.attrs = BatchNormAttrs{};
    const int c = shape(in).c;
    n.slots = {{n.name + ".weight", {c}, true},
               {n.name + ".bias", {c}, true},
               {n.name + ".running_mean", {c}, false},
               {n.name + ".running_var", {c}, false}};
    return push(std::move(n));
  }

  int unary(OpKind kind, std::string name, int in) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = kind;
    n.inputs = {in};
    return push(std::move(n));
  }

  int maxpool(std::string name, int in, PoolSpec spec = {}) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = OpKind::kMaxPool;
    n.inputs = {in};
    n.attrs = PoolAttrs{spec};
    return push(std::move(n));
  }

  int resize(std::string name, int in, int out_h, int out_w, Pair2 rf_ratio = {0, 0}) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = OpKind::kResize;
    n.inputs = {in};
    n.attrs = ResizeAttrs{out_h, out_w, rf_ratio};
    return push(std::move(n));
  }

  int binary(OpKind kind, std::string name, int a, int b) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = kind;
    n.inputs = {a, b};
    return push(std::move(n));
  }

  void alias(std::string_view tap, int id) { graph_.aliases_.emplace(std::string(tap), id); }

  const Shape& shape(int id) const { return graph_.nodes_.at(id).out_shape; }

  ModelGraph finish(int output) {
    graph_.output_ = output;
    return std::move(graph_);
  }

 private:
  int push(LayerNode n) {
    if (graph_.names_.count(n.name)) {
      throw GraphError(fmt::format("duplicate layer name '{}'", n.name));
    }
    n.id = static_cast<int>(graph_.nodes_.size());
    for (int in : n.inputs) {
      if (in < 0 || in >= n.id) throw GraphError(fmt::format("layer '{}': bad input id", n.name));
    }
    try {
      n.out_shape = infer_shape(n);
    } catch (const ShapeError& e) {
      throw GraphError(fmt::format("layer '{}' ({}): {}", n.name, to_string(n.kind), e.what()));
    }
    graph_.names_.emplace(n.name, n.id);
    graph_.nodes_.push_back(std::move(n));
    return graph_.nodes_.back().id;
  }

  Shape infer_shape(const LayerNode& n) const {
    auto in = [&](std::size_t i) -> const Shape& { return shape(n.inputs.at(i)); };
    switch (n.kind) {
      case OpKind::kInput:
        if (n.out_shape.h < 1 || n.out_shape.w < 1) {
          throw ShapeError(fmt::format("input {} is empty", to_string(n.out_shape)));
        }
        return n.out_shape;
      case OpKind::kConv: {
        const auto& a = std::get<ConvAttrs>(n.attrs);
        return conv_output_shape(in(0), a.out_channels, a.spec);
      }
      case OpKind::kBatchNorm:
      case OpKind::kRelu:
      case OpKind::kSigmoid:
      case OpKind::kSoftmax:
        return in(0);
      case OpKind::kMaxPool:
        return maxpool_output_shape(in(0), std::get<PoolAttrs>(n.attrs).spec);
      case OpKind::kResize: {
        const auto& a = std::get<ResizeAttrs>(n.attrs);
        if (a.out_h < 1 || a.out_w < 1) {
          throw ShapeError(fmt::format("resize target {}x{} is empty", a.out_h, a.out_w));
        }
        return {in(0).n, in(0).c, a.out_h, a.out_w};
      }
      case OpKind::kAdd:
        if (in(0) != in(1)) {
          throw ShapeError("add operands " + to_string(in(0)) + " vs " + to_string(in(1)));
        }
        return in(0);
      case OpKind::kMul:
        if (in(0).n != in(1).n || in(0).h != in(1).h || in(0).w != in(1).w ||
            (in(0).c != in(1).c && in(1).c != 1)) {
          throw ShapeError("mul operands " + to_string(in(0)) + " vs " + to_string(in(1)));
        }
        return in(0);
      case OpKind::kConcat:
        if (in(0).n != in(1).n || in(0).h != in(1).h || in(0).w != in(1).w) {
          throw ShapeError("concat operands " + to_string(in(0)) + " vs " + to_string(in(1)));
        }
        return {in(0).n, in(0).c + in(1).c, in(0).h, in(0).w};
    }
    throw ShapeError("unknown op kind");
  }

  ModelGraph graph_;
};

// ---------------------------------------------------------------------------
// Network pieces

namespace {

ConvSpec make_conv(int k, int stride, int pad, bool bias) {
  ConvSpec s;
  s.kernel = {k, k};
  s.stride = {stride, stride};
  s.padding = {pad, pad};
  s.bias = bias;
  return s;
}

// 1x1 conv (with bias) + BN + ReLU.
int pointwise_block(GraphBuilder& b, const std::string& prefix, int in, int out_c) {
  int x = b.conv(prefix + ".conv", in, out_c, make_conv(1, 1, 0, true));
  x = b.batchnorm(prefix + ".bn", x);
  return b.unary(OpKind::kRelu, prefix + ".relu", x);
}

// ResNet-18 stem: 7x7/2 conv, BN, ReLU, 3x3/2 max pool.
int resnet_stem(GraphBuilder& b, const std::string& prefix, int in) {
  int x = b.conv(prefix + ".stem.conv", in, 64, make_conv(7, 2, 3, false));
  x = b.batchnorm(prefix + ".stem.bn", x);
  x = b.unary(OpKind::kRelu, prefix + ".stem.relu", x);
  return b.maxpool(prefix + ".stem.pool", x);
}

int basic_block(GraphBuilder& b, const std::string& prefix, int in, int out_c, int stride) {
  const int in_c = b.shape(in).c;
  int x = b.conv(prefix + ".conv1", in, out_c, make_conv(3, stride, 1, false));
  x = b.batchnorm(prefix + ".bn1", x);
  x = b.unary(OpKind::kRelu, prefix + ".relu1", x);
  x = b.conv(prefix + ".conv2", x, out_c, make_conv(3, 1, 1, false));
  x = b.batchnorm(prefix + ".bn2", x);
  int shortcut = in;
  if (stride != 1 || in_c != out_c) {
    shortcut = b.conv(prefix + ".downsample.conv", in, out_c, make_conv(1, stride, 0, false));
    shortcut = b.batchnorm(prefix + ".downsample.bn", shortcut);
  }
  x = b.binary(OpKind::kAdd, prefix + ".add", x, shortcut);
  return b.unary(OpKind::kRelu, prefix + ".out", x);
}

constexpr int kStageChannels[] = {64, 128, 256, 512};

int resnet_stage(GraphBuilder& b, const std::string& prefix, int in, int stage) {
  const int out_c = kStageChannels[stage - 1];
  const int stride = stage == 1 ? 1 : 2;
  int x = basic_block(b, prefix + ".0", in, out_c, stride);
  return basic_block(b, prefix + ".1", x, out_c, 1);
}

// Depthwise 1x5 row conv -> depthwise 5x1 column conv -> 1x1 block, plus the
// block input. `row_dilation` widens the row conv horizontally.
int cross_conv_block(GraphBuilder& b, const std::string& prefix, int in, int row_dilation) {
  const int c = b.shape(in).c;
  ConvSpec row;
  row.kernel = {1, 5};
  row.dilation = {1, row_dilation};
  row.padding = {0, 2 * row_dilation};
  row.groups = c;
  row.bias = true;
  ConvSpec col;
  col.kernel = {5, 1};
  col.padding = {2, 0};
  col.groups = c;
  col.bias = true;
  int x = b.conv(prefix + ".row", in, c, row);
  x = b.conv(prefix + ".col", x, c, col);
  x = pointwise_block(b, prefix + ".pw", x, c);
  return b.binary(OpKind::kAdd, prefix + ".out", x, in);
}

struct Branches {
  int detail = -1;   // F_1^h (64 channels)
  int context = -1;  // context feature aligned to the detail grid (128 channels)
};

int spatial_detail_branch(GraphBuilder& b, int in) {
  int x = resnet_stem(b, "sdb", in);
  x = resnet_stage(b, "sdb.layer1", x, 1);
  b.alias(taps::kF1High, x);
  return x;
}

int context_branch(GraphBuilder& b, const VariantConfig& cfg, int in, bool with_agg) {
  const auto [h, w] = cfg.input_hw;
  const auto [rv, rh] = cfg.csb_ratio;
  int x = b.resize("csb.resize", in, h / rv, w / rh, cfg.csb_ratio);
  b.alias(taps::kCsbInput, x);
  x = resnet_stem(b, "csb", x);
  x = resnet_stage(b, "csb.layer1", x, 1);
  x = resnet_stage(b, "csb.layer2", x, 2);
  b.alias(taps::kF2Low, x);
  const Pair2 grid = detail_feature_hw(cfg.input_hw);
  if (with_agg) {
    x = cross_conv_block(b, "agg.block1", x, 2);
    b.alias(taps::kAggBlock1, x);
    x = cross_conv_block(b, "agg.block2", x, 1);
    b.alias(taps::kAggBlock2, x);
    x = b.resize("agg.upsample", x, grid.h, grid.w);
  } else {
    x = b.resize("csb.upsample", x, grid.h, grid.w);
  }
  b.alias(taps::kFaLow, x);
  return x;
}

// 1x1 block + 1x1 conv to two classes, then resize logits to the input size.
int classifier(GraphBuilder& b, const VariantConfig& cfg, int in) {
  int x = pointwise_block(b, "head", in, 128);
  x = b.conv("head.cls", x, 2, make_conv(1, 1, 0, true));
  b.alias(taps::kLogitsLow, x);
  x = b.resize("head.upsample", x, cfg.input_hw.h, cfg.input_hw.w);
  b.alias(taps::kLogits, x);
  return x;
}

int adjust_block(GraphBuilder& b, int detail) {
  int x = pointwise_block(b, "fuse.adjust", detail, 128);
  b.alias(taps::kAdjusted, x);
  return x;
}

ModelGraph build_stage_probe(const VariantConfig& cfg) {
  if (cfg.stage < 1 || cfg.stage > 4) {
    throw GraphError(fmt::format("stage probe index {} outside 1..4", cfg.stage));
  }
  GraphBuilder b(cfg);
  int x = b.input(std::string(taps::kInput), {1, 3, cfg.input_hw.h, cfg.input_hw.w});
  x = resnet_stem(b, "backbone", x);
  for (int s = 1; s <= cfg.stage; ++s) {
    x = resnet_stage(b, fmt::format("backbone.layer{}", s), x, s);
  }
  b.alias(fmt::format("stage{}.out", cfg.stage), x);
  x = b.conv("head.cls", x, 2, make_conv(1, 1, 0, true));
  b.alias(taps::kLogitsLow, x);
  x = b.resize("head.upsample", x, cfg.input_hw.h, cfg.input_hw.w);
  b.alias(taps::kLogits, x);
  return b.finish(x);
}

}  // namespace

Pair2 detail_feature_hw(Pair2 input_hw) {
  auto axis = [](int v) { return conv_out_dim(conv_out_dim(v, 7, 2, 3), 3, 2, 1); };
  return {axis(input_hw.h), axis(input_hw.w)};
}

ModelGraph build(const VariantConfig& cfg) {
  if (cfg.csb_ratio.h < 1 || cfg.csb_ratio.w < 1) {
    throw GraphError(fmt::format("csb ratio {}x{} must be >= 1", cfg.csb_ratio.h, cfg.csb_ratio.w));
  }
  if (cfg.variant == Variant::kStageProbe) return build_stage_probe(cfg);

  GraphBuilder b(cfg);
  const int in = b.input(std::string(taps::kInput), {1, 3, cfg.input_hw.h, cfg.input_hw.w});

  const bool uses_detail = cfg.variant != Variant::kCsbOnly && cfg.variant != Variant::kCsbAgg;
  const bool uses_context = cfg.variant != Variant::kSdbOnly;
  const bool uses_agg = cfg.variant != Variant::kCsbOnly && cfg.variant != Variant::kSelFuseNoAgg;

  Branches br;
  if (uses_detail) br.detail = spatial_detail_branch(b, in);
  if (uses_context) br.context = context_branch(b, cfg, in, uses_agg);

  int merged = -1;
  switch (cfg.variant) {
    case Variant::kSdbOnly:
      merged = adjust_block(b, br.detail);
      break;
    case Variant::kCsbOnly:
    case Variant::kCsbAgg:
      merged = br.context;
      break;
    case Variant::kFull:
    case Variant::kSelFuseNoAgg: {
      const int adjusted = adjust_block(b, br.detail);
      int att = b.binary(OpKind::kConcat, "fuse.concat", adjusted, br.context);
      att = pointwise_block(b, "fuse.attn", att, 128);
      att = b.conv("fuse.attn.proj", att, 1, make_conv(1, 1, 0, true));
      att = b.unary(OpKind::kSigmoid, "fuse.attn.sigmoid", att);
      b.alias(taps::kAttention, att);
      const int gated = b.binary(OpKind::kMul, "fuse.gate", adjusted, att);
      merged = b.binary(OpKind::kAdd, "fuse.merge", gated, br.context);
      break;
    }
    case Variant::kConcat:
      merged = b.binary(OpKind::kConcat, "fuse.merge", adjust_block(b, br.detail), br.context);
      break;
    case Variant::kProduct:
      merged = b.binary(OpKind::kMul, "fuse.merge", adjust_block(b, br.detail), br.context);
      break;
    case Variant::kAdd:
      merged = b.binary(OpKind::kAdd, "fuse.merge", adjust_block(b, br.detail), br.context);
      break;
    case Variant::kStageProbe:
      break;
  }
  b.alias(taps::kFused, merged);
  return b.finish(classifier(b, cfg, merged));
}

// ---------------------------------------------------------------------------
// Accounting

namespace {

bool has_prefix(std::string_view name, std::string_view prefix) {
  return prefix.empty() || name.substr(0, prefix.size()) == prefix;
}

}  // namespace

std::int64_t count_params(const ModelGraph& graph, std::string_view prefix) {
  std::int64_t total = 0;
  for (const auto& n : graph.nodes()) {
    if (!has_prefix(n.name, prefix)) continue;
    for (const auto& s : n.slots) {
      if (s.trainable) total += s.numel();
    }
  }
  return total;
}

std::int64_t node_macs(const ModelGraph& graph, const LayerNode& n) {
  if (n.kind != OpKind::kConv) return 0;
  const auto& a = std::get<ConvAttrs>(n.attrs);
  const int in_c = graph.node(n.inputs[0]).out_shape.c;
  return std::int64_t{a.spec.kernel.h} * a.spec.kernel.w * (in_c / a.spec.groups) *
         a.out_channels * n.out_shape.h * n.out_shape.w * n.out_shape.n;
}

std::int64_t count_macs(const ModelGraph& graph, std::string_view prefix) {
  std::int64_t total = 0;
  for (const auto& n : graph.nodes()) {
    if (has_prefix(n.name, prefix)) total += node_macs(graph, n);
  }
  return total;
}

std::vector<BranchCost> cost_breakdown(const ModelGraph& graph) {
  std::vector<BranchCost> out;
  for (const auto& n : graph.nodes()) {
    const std::string branch = n.name.substr(0, n.name.find('.'));
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const BranchCost& c) { return c.branch == branch; });
    if (it == out.end()) {
      out.push_back({branch, 0, 0});
      it = std::prev(out.end());
    }
    for (const auto& s : n.slots) {
      if (s.trainable) it->params += s.numel();
    }
    it->macs += node_macs(graph, n);
  }
  return out;
}

ReceptiveField receptive_field(const ModelGraph& graph, std::string_view node_name) {
  const int target = graph.node(node_name).id;
  std::vector<ReceptiveField> rf(graph.nodes().size());
  for (const auto& n : graph.nodes()) {
    if (n.id > target) break;
    ReceptiveField r;
    if (!n.inputs.empty()) {
      r = rf[n.inputs[0]];
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        const auto& o = rf[n.inputs[i]];
        r.rf_h = std::max(r.rf_h, o.rf_h);
        r.rf_w = std::max(r.rf_w, o.rf_w);
        r.jump_h = std::max(r.jump_h, o.jump_h);
        r.jump_w = std::max(r.jump_w, o.jump_w);
      }
    }
    auto window = [&r](Pair2 k, Pair2 s, Pair2 d) {
      r.rf_h += (k.h - 1) * d.h * r.jump_h;
      r.rf_w += (k.w - 1) * d.w * r.jump_w;
      r.jump_h *= s.h;
      r.jump_w *= s.w;
    };
    switch (n.kind) {
      case OpKind::kConv: {
        const auto& s = std::get<ConvAttrs>(n.attrs).spec;
        window(s.kernel, s.stride, s.dilation);
        break;
      }
      case OpKind::kMaxPool: {
        const auto& s = std::get<PoolAttrs>(n.attrs).spec;
        window(s.kernel, s.stride, {1, 1});
        break;
      }
      case OpKind::kResize: {
        const auto& a = std::get<ResizeAttrs>(n.attrs);
        const Shape& src = graph.node(n.inputs[0]).out_shape;
        auto axis = [](int& field, int& jump, int in, int out, int declared) {
          if (declared > 0 || out < in) {
            const int f = declared > 0 ? declared
                                       : static_cast<int>(std::lround(double(in) / out));
            field += (f - 1) * jump;
            jump *= f;
          } else if (out > in) {
            field += jump;
            jump = std::max(1, static_cast<int>(std::lround(double(jump) * in / out)));
          }
        };
        axis(r.rf_h, r.jump_h, src.h, a.out_h, a.rf_ratio.h);
        axis(r.rf_w, r.jump_w, src.w, a.out_w, a.rf_ratio.w);
        break;
      }
      default:
        break;
    }
    rf[n.id] = r;
  }
  return rf[target];
}

std::string manifest(const ModelGraph& graph) {
  std::string out = fmt::format("# weight slots for variant '{}': name dims kind\n",
                                variant_name(graph.config()));
  for (const auto& s : graph.weight_slots()) {
    out += fmt::format("{} {} {}\n", s.name, fmt::join(s.dims, "x"),
                       s.trainable ? "trainable" : "buffer");
  }
  return out;
}

}  // namespace roadseg
