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

#include "roadseg/executor.hpp"

#include <fmt/format.h>

#include "roadseg/error.hpp"

namespace roadseg {

const Tensor& ForwardResult::tap(std::string_view name) const {
  auto it = taps.find(name);
  if (it == taps.end()) throw GraphError(fmt::format("tap '{}' was not captured", name));
  return it->second;
}

namespace {

Tensor run_node(const ModelGraph& graph, const LayerNode& n, std::span<const Tensor> weights,
                const std::vector<Tensor>& acts, Exec exec) {
  auto in = [&](std::size_t i) -> const Tensor& { return acts[n.inputs.at(i)]; };
  switch (n.kind) {
    case OpKind::kInput:
      throw GraphError("input node evaluated as a layer");
    case OpKind::kConv: {
      const auto& a = std::get<ConvAttrs>(n.attrs);
      std::optional<std::span<const float>> bias;
      if (a.spec.bias) bias = weights[1].data();
      return conv2d(in(0), weights[0], bias, a.spec, exec);
    }
    case OpKind::kBatchNorm: {
      BatchNormParams p;
      p.gamma = weights[0].data();
      p.beta = weights[1].data();
      p.mean = weights[2].data();
      p.var = weights[3].data();
      p.eps = std::get<BatchNormAttrs>(n.attrs).eps;
      return batchnorm_infer(in(0), p, exec);
    }
    case OpKind::kRelu: return relu(in(0), exec);
    case OpKind::kSigmoid: return sigmoid(in(0), exec);
    case OpKind::kSoftmax: return softmax_channels(in(0), exec);
    case OpKind::kMaxPool: return maxpool2d(in(0), std::get<PoolAttrs>(n.attrs).spec, exec);
    case OpKind::kResize: {
      const auto& a = std::get<ResizeAttrs>(n.attrs);
      return bilinear_resize(in(0), a.out_h, a.out_w, exec);
    }
    case OpKind::kAdd: return add(in(0), in(1), exec);
    case OpKind::kMul: return mul(in(0), in(1), exec);
    case OpKind::kConcat: return concat_channels(in(0), in(1));
  }
  (void)graph;
  throw GraphError("unknown op kind");
}

}  // namespace

ForwardResult forward(const BoundModel& model, const Tensor& input, const ForwardOptions& options) {
  const ModelGraph& graph = model.graph();
  const auto& nodes = graph.nodes();
  const std::size_t count = nodes.size();

  std::vector<bool> keep(count, options.capture_all);
  keep[graph.output()] = true;
  std::vector<std::pair<std::string, int>> wanted;
  for (const auto& name : options.capture) {
    auto id = graph.find(name);
    if (!id) throw GraphError(fmt::format("unknown tap '{}'", name));
    keep[*id] = true;
    wanted.emplace_back(name, *id);
  }
  std::vector<std::pair<int, const Tensor*>> overrides;
  for (const auto& [name, tensor] : options.overrides) {
    auto id = graph.find(name);
    if (!id) throw GraphError(fmt::format("unknown override target '{}'", name));
    if (tensor.shape() != nodes[*id].out_shape) {
      throw ShapeError(fmt::format("override '{}' has shape {}, node produces {}", name,
                                   to_string(tensor.shape()), to_string(nodes[*id].out_shape)));
    }
    overrides.emplace_back(*id, &tensor);
  }

  std::vector<int> last_use(count, -1);
  for (const auto& n : nodes) {
    for (int in : n.inputs) last_use[in] = n.id;
  }

  std::vector<Tensor> acts(count);
  for (const auto& n : nodes) {
    const Tensor* replacement = nullptr;
    for (const auto& [id, t] : overrides) {
      if (id == n.id) replacement = t;
    }
    if (replacement) {
      acts[n.id] = *replacement;
    } else if (n.kind == OpKind::kInput) {
      if (input.shape() != n.out_shape) {
        throw ShapeError(fmt::format("input shape {} does not match graph input {}",
                                     to_string(input.shape()), to_string(n.out_shape)));
      }
      acts[n.id] = input;
    } else {
      acts[n.id] = run_node(graph, n, model.weights(n.id), acts, options.exec);
    }
    for (int in : n.inputs) {
      if (last_use[in] == n.id && !keep[in]) acts[in] = Tensor();
    }
  }

  ForwardResult result;
  for (const auto& [name, id] : wanted) result.taps.emplace(name, acts[id]);
  if (options.capture_all) {
    for (const auto& n : nodes) result.taps.emplace(n.name, acts[n.id]);
    for (const auto& [alias, id] : graph.aliases()) result.taps.emplace(alias, acts[id]);
  }
  result.output = std::move(acts[graph.output()]);
  return result;
}

}  // namespace roadseg
