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

#include <vector>

#include "emcnet/graph.hpp"

namespace emcnet {

// Row-vector convention: a node feature x (1 x d) is transformed as x * W.
struct GEncParams {
  Tensor W_g;   // d x d, shared message transform
  Tensor U_g1;  // d x d, self term of the node update
  Tensor U_g2;  // d x d, aggregated-message term of the node update
};

struct GEncOutput {
  Tensor node_embeddings;  // n x d, master node last
  Tensor graph_embedding;  // 1 x d, mean over all nodes including the master
  Tensor messages;         // E x d, round-T message per directed edge
};

// Directed edges of a graph with the index of each edge's reverse.
struct DirectedEdges {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<std::size_t> reverse;

  static DirectedEdges of(const Adjacency& adjacency);
  std::size_t size() const noexcept { return src.size(); }
};

// T synchronous rounds of
//   phi[v->u] = sigmoid(x_v W_g + sum_{w in N(v) \ u} phi[w->v])
// from zero messages, then
//   z_u = sigmoid(x_u U_g1 + (sum_{v in N(u)} phi[v->u]) U_g2),  z_G = mean_u z_u.
// The graph must carry a master node and T >= 1.
GEncOutput genc_forward(const PatchGraph& graph, const GEncParams& params, int rounds);

}  // namespace emcnet
