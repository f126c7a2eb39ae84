// Copyright 2026 The EMCNet Authors
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

#include "emcnet/hgenc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emcnet/errors.hpp"

namespace emcnet {
namespace {

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

// out[u][v] = col[u] + row[v] for column vectors col, row of length n.
Tensor outer_sum(const Tensor& col, const Tensor& row) {
  const std::size_t n = col.rows();
  const Tensor ones = Tensor::full({1, n}, 1.0);
  return add(matmul(col, ones), transpose(matmul(row, ones)));
}

}  // namespace

Tensor attention_conv(const Tensor& features, const Adjacency& adjacency, const HGEncLayerParams& params,
                      Tensor* attention) {
  const std::size_t n = features.rows();
  if (adjacency.size() != n)
    throw DimensionError("attention_conv: " + std::to_string(n) + " feature rows for " +
                         std::to_string(adjacency.size()) + " nodes");
  const std::size_t width = params.W_conv.cols();
  if (params.a_attn.numel() != 2 * width)
    throw DimensionError("attention_conv: a_attn has " + std::to_string(params.a_attn.numel()) +
                         " entries, expected " + std::to_string(2 * width));

  const Tensor r = matmul(features, params.W_conv);
  const Tensor a = reshape(params.a_attn, {2 * width, 1});
  const auto first = iota_indices(0, width);
  const auto second = iota_indices(width, 2 * width);
  const Tensor self_score = matmul(r, gather_rows(a, first));
  const Tensor neighbor_score = matmul(r, gather_rows(a, second));

  const Tensor logits = relu(outer_sum(self_score, neighbor_score));
  const auto mask = adjacency.self_loop_mask();
  const Tensor alpha = masked_softmax_rows(logits, mask);
  if (attention) *attention = alpha;
  return relu(matmul(alpha, r));
}

std::size_t pooled_size(std::size_t n, double p_r) {
  if (!(p_r > 0.0 && p_r <= 1.0)) throw ConfigError("pooling ratio must lie in (0, 1], got " + std::to_string(p_r));
  if (n == 0) throw EmptyInputError("pooled_size: empty graph");
  // The epsilon keeps exact products such as 0.75 * 64 from rounding up.
  const auto m = static_cast<std::size_t>(std::ceil(p_r * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(m, 1, n);
}

Selection score_and_select(const Tensor& hidden, const Tensor& p_vec, double p_r) {
  const std::size_t n = hidden.rows();
  if (n == 0) throw EmptyInputError("score_and_select: no nodes");
  if (p_vec.numel() != hidden.cols())
    throw DimensionError("score_and_select: p_vec has " + std::to_string(p_vec.numel()) + " entries for width " +
                         std::to_string(hidden.cols()));
  const std::size_t m = pooled_size(n, p_r);

  Selection sel;
  sel.scores = matmul(hidden, l2_normalize(reshape(p_vec, {p_vec.numel(), 1})));
  const auto s = sel.scores.data();
  std::vector<std::size_t> order = iota_indices(0, n);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return s[i] > s[j]; });
  order.resize(m);
  sel.idx = std::move(order);
  return sel;
}

PooledGraph pool_and_gate(const Tensor& hidden, const Adjacency& adjacency, const Selection& selection) {
  PooledGraph out;
  out.idx = selection.idx;
  out.adjacency = adjacency.induced(selection.idx);
  out.gates = relu(gather_rows(selection.scores, selection.idx));
  out.features = scale_rows(gather_rows(hidden, selection.idx), out.gates);
  return out;
}

Tensor pooled_self_attention(const PooledGraph& pooled, const Tensor& W_Q, const Tensor& W_K, const Tensor& W_V,
                             Tensor* attention) {
  const Tensor& Z = pooled.features;
  const std::size_t d = W_Q.cols();
  const Tensor q = matmul(Z, W_Q);
  const Tensor k = matmul(Z, W_K);
  const Tensor v = matmul(Z, W_V);
  const Tensor logits = affine(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  const auto mask = pooled.adjacency.self_loop_mask();
  const Tensor alpha = masked_softmax_rows(logits, mask);
  if (attention) *attention = alpha;
  return matmul(alpha, v);
}

HGEncOutput hgenc_forward(const PatchGraph& graph, const std::vector<HGEncLayerParams>& layers, double p_r) {
  if (graph.master_index) throw InvariantError("hgenc_forward: expects the graph without a master node");
  if (!graph.adjacency) throw InvariantError("hgenc_forward: graph has no adjacency");
  if (layers.empty()) throw ConfigError("hgenc_forward: no layers");

  HGEncOutput out;
  Adjacency adjacency = *graph.adjacency;
  Tensor z = graph.features;
  for (const auto& layer : layers) {
    const Tensor hidden = attention_conv(z, adjacency, layer);
    const Selection sel = score_and_select(hidden, layer.p_vec, p_r);
    PooledGraph pooled = pool_and_gate(hidden, adjacency, sel);

    HGEncLayerTrace trace;
    trace.idx = sel.idx;
    for (std::size_t i : sel.idx) trace.scores.push_back(sel.scores.at(i));
    out.trace.push_back(std::move(trace));

    z = pooled_self_attention(pooled, layer.W_Q, layer.W_K, layer.W_V);
    adjacency = std::move(pooled.adjacency);
  }
  out.node_embeddings = z;
  out.graph_embedding = reshape(mean(z, 0), {1, z.cols()});
  return out;
}

}  // namespace emcnet
