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

#include "emcnet/genc.hpp"

#include <map>

#include "emcnet/errors.hpp"

namespace emcnet {

DirectedEdges DirectedEdges::of(const Adjacency& adjacency) {
  DirectedEdges e;
  std::map<Edge, std::size_t> index;
  for (std::size_t u = 0; u < adjacency.size(); ++u)
    for (std::size_t v : adjacency.neighbors(u)) {
      index[{u, v}] = e.src.size();
      e.src.push_back(u);
      e.dst.push_back(v);
    }
  e.reverse.resize(e.src.size());
  for (std::size_t k = 0; k < e.src.size(); ++k) e.reverse[k] = index.at({e.dst[k], e.src[k]});
  return e;
}

GEncOutput genc_forward(const PatchGraph& graph, const GEncParams& params, int rounds) {
  if (!graph.master_index) throw InvariantError("genc_forward: graph has no master node");
  if (rounds < 1) throw ConfigError("genc_forward: T must be >= 1, got " + std::to_string(rounds));
  const Adjacency& adj = *graph.adjacency;
  const std::size_t n = adj.size();
  const Tensor& X = graph.features;
  if (X.rows() != n) throw DimensionError("genc_forward: feature rows do not match node count");
  const std::size_t d = params.W_g.cols();

  const DirectedEdges edges = DirectedEdges::of(adj);
  // x_v W_g for the source of every directed edge; constant across rounds.
  const Tensor source_term = gather_rows(matmul(X, params.W_g), edges.src);

  Tensor messages = Tensor::zeros({edges.size(), d});
  for (int t = 0; t < rounds; ++t) {
    // Sum of all messages arriving at v, minus the one that came from u.
    const Tensor inbox = scatter_add_rows(messages, edges.dst, n);
    const Tensor excluded = sub(gather_rows(inbox, edges.src), gather_rows(messages, edges.reverse));
    messages = sigmoid(add(source_term, excluded));
  }

  const Tensor inbox = scatter_add_rows(messages, edges.dst, n);
  GEncOutput out;
  out.node_embeddings = sigmoid(add(matmul(X, params.U_g1), matmul(inbox, params.U_g2)));
  out.graph_embedding = reshape(mean(out.node_embeddings, 0), {1, d});
  out.messages = messages;
  return out;
}

}  // namespace emcnet
