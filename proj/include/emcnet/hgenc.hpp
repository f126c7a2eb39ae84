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

#pragma once

#include <cstddef>
#include <vector>

#include "emcnet/graph.hpp"

namespace emcnet {

struct HGEncLayerParams {
  Tensor W_conv;  // d x 2d
  Tensor a_attn;  // 4d x 1, split as [a_self; a_neighbor]
  Tensor p_vec;   // 2d x 1
  Tensor W_Q;     // 2d x d
  Tensor W_K;     // 2d x d
  Tensor W_V;     // 2d x d
};

// hidden_u = relu(sum_{v in N(u)+u} alpha[u][v] * z_v W), with
// alpha[u][.] = softmax_v relu(a . (r_u ++ r_v)) and r = z W.
// When attention is non-null it receives the n x n coefficient matrix.
Tensor attention_conv(const Tensor& features, const Adjacency& adjacency, const HGEncLayerParams& params,
                      Tensor* attention = nullptr);

// Number of nodes kept from n at ratio p_r: ceil(p_r * n), at least 1.
std::size_t pooled_size(std::size_t n, double p_r);

struct Selection {
  std::vector<std::size_t> idx;  // kept nodes, descending score, ties to lower index
  Tensor scores;                 // n x 1 projection scores for every node
};

Selection score_and_select(const Tensor& hidden, const Tensor& p_vec, double p_r);

struct PooledGraph {
  std::vector<std::size_t> idx;
  Adjacency adjacency;  // parent adjacency restricted to idx
  Tensor features;      // m x 2d, gated rows
  Tensor gates;         // m x 1, relu of the kept scores
};

PooledGraph pool_and_gate(const Tensor& hidden, const Adjacency& adjacency, const Selection& selection);

// Scaled dot-product attention masked to N(u) + u of the pooled graph; output m x d.
Tensor pooled_self_attention(const PooledGraph& pooled, const Tensor& W_Q, const Tensor& W_K, const Tensor& W_V,
                             Tensor* attention = nullptr);

struct HGEncLayerTrace {
  std::vector<std::size_t> idx;  // indices into the layer's input node order
  std::vector<double> scores;    // projection score of each kept node
};

struct HGEncOutput {
  Tensor graph_embedding;  // 1 x d
  Tensor node_embeddings;  // m_L x d after the last layer
  std::vector<HGEncLayerTrace> trace;
};

HGEncOutput hgenc_forward(const PatchGraph& graph, const std::vector<HGEncLayerParams>& layers, double p_r);

}  // namespace emcnet
