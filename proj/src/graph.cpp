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

#include "emcnet/graph.hpp"

#include <algorithm>

#include "emcnet/errors.hpp"

namespace emcnet {

Adjacency Adjacency::from_edges(std::size_t n, const std::vector<Edge>& edges) {
  Adjacency a(n);
  for (const auto& [u, v] : edges) a.connect(u, v);
  return a;
}

void Adjacency::connect(std::size_t u, std::size_t v) {
  if (u >= n_ || v >= n_) throw IndexError("edge endpoint out of range");
  if (u == v) throw InvariantError("self-loop on node " + std::to_string(u));
  bits_[u * n_ + v] = 1;
  bits_[v * n_ + u] = 1;
}

std::vector<std::size_t> Adjacency::neighbors(std::size_t u) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n_; ++v)
    if (bits_[u * n_ + v]) out.push_back(v);
  return out;
}

std::size_t Adjacency::degree(std::size_t u) const {
  return static_cast<std::size_t>(std::count(bits_.begin() + static_cast<std::ptrdiff_t>(u * n_),
                                             bits_.begin() + static_cast<std::ptrdiff_t>((u + 1) * n_), 1));
}

std::vector<Edge> Adjacency::edges() const {
  std::vector<Edge> out;
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t v = u + 1; v < n_; ++v)
      if (bits_[u * n_ + v]) out.emplace_back(u, v);
  return out;
}

std::size_t Adjacency::edge_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)) / 2;
}

bool Adjacency::is_complete() const { return edge_count() == n_ * (n_ - (n_ > 0 ? 1 : 0)) / 2; }

Adjacency Adjacency::induced(const std::vector<std::size_t>& idx) const {
  Adjacency out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n_) throw IndexError("induced: node " + std::to_string(idx[i]) + " out of range");
    for (std::size_t j = 0; j < idx.size(); ++j) out.bits_[i * idx.size() + j] = bits_[idx[i] * n_ + idx[j]];
  }
  return out;
}

std::vector<std::uint8_t> Adjacency::self_loop_mask() const {
  auto mask = bits_;
  for (std::size_t u = 0; u < n_; ++u) mask[u * n_ + u] = 1;
  return mask;
}

Adjacency build_grid_adjacency(std::size_t rows, std::size_t cols) {
  Adjacency a(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = r * cols + c;
      // Forward half of the 8-neighbourhood; symmetry covers the rest.
      if (c + 1 < cols) a.connect(k, k + 1);
      if (r + 1 < rows) {
        a.connect(k, k + cols);
        if (c + 1 < cols) a.connect(k, k + cols + 1);
        if (c > 0) a.connect(k, k + cols - 1);
      }
    }
  return a;
}

Tensor embed_patches(const Tensor& patches, const EmbeddingParams& params) {
  const auto& E = params.patch_projection;
  const auto& PE = params.position_table;
  if (patches.rank() != 2 || E.rank() != 2 || patches.cols() != E.rows())
    throw DimensionError("embed_patches: patch rows " + shape_str(patches.shape()) +
                         " do not match projection " + shape_str(E.shape()));
  if (PE.rank() != 2 || PE.rows() != patches.rows() || PE.cols() != E.cols())
    throw DimensionError("embed_patches: position table " + shape_str(PE.shape()) + " does not match " +
                         std::to_string(patches.rows()) + " patches of width " + std::to_string(E.cols()));
  return add(matmul(patches, E), PE);
}

PatchGraph augment_master_node(const PatchGraph& graph) {
  if (graph.master_index) throw InvariantError("graph already has a master node");
  if (!graph.adjacency) throw InvariantError("graph has no adjacency");
  const std::size_t n = graph.n_nodes();
  auto adj = std::make_shared<Adjacency>(n + 1);
  for (const auto& [u, v] : graph.adjacency->edges()) adj->connect(u, v);
  for (std::size_t u = 0; u < n; ++u) adj->connect(u, n);

  PatchGraph out;
  out.adjacency = std::move(adj);
  out.master_index = n;
  if (graph.features.defined())
    out.features = concat({graph.features, Tensor::zeros({1, graph.features.cols()})}, 0);
  return out;
}

nlohmann::json graph_to_json(const Adjacency& adjacency, std::optional<std::size_t> master) {
  nlohmann::json j;
  j["n"] = adjacency.size();
  j["edges"] = nlohmann::json::array();
  for (const auto& [u, v] : adjacency.edges()) j["edges"].push_back({u, v});
  j["master"] = master ? nlohmann::json(*master) : nlohmann::json(nullptr);
  return j;
}

}  // namespace emcnet
