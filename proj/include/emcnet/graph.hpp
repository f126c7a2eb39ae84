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
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "emcnet/tensor.hpp"
#include "json.hpp"

namespace emcnet {

using Edge = std::pair<std::size_t, std::size_t>;

// Symmetric 0/1 adjacency without self-loops.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}
  static Adjacency from_edges(std::size_t n, const std::vector<Edge>& edges);

  std::size_t size() const noexcept { return n_; }
  bool has(std::size_t u, std::size_t v) const { return bits_[u * n_ + v] != 0; }
  // Adds the undirected edge u-v; self-loops are rejected.
  void connect(std::size_t u, std::size_t v);

  std::vector<std::size_t> neighbors(std::size_t u) const;
  std::size_t degree(std::size_t u) const;
  // Undirected edges as (u, v) with u < v, in lexicographic order.
  std::vector<Edge> edges() const;
  std::size_t edge_count() const;
  bool is_complete() const;

  // Principal submatrix in the order given by idx.
  Adjacency induced(const std::vector<std::size_t>& idx) const;
  // n x n mask with ones on edges and on the diagonal (attention over N(u) + u).
  std::vector<std::uint8_t> self_loop_mask() const;

  bool operator==(const Adjacency& other) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

// 8-neighbourhood grid: node k sits at (k / cols, k % cols).
Adjacency build_grid_adjacency(std::size_t rows, std::size_t cols);

struct EmbeddingParams {
  Tensor patch_projection;  // (P*P*C) x d
  Tensor position_table;    // N x d
};

// features = patches * patch_projection + position_table
Tensor embed_patches(const Tensor& patches, const EmbeddingParams& params);

struct PatchGraph {
  std::shared_ptr<const Adjacency> adjacency;
  Tensor features;  // n x d
  std::optional<std::size_t> master_index;

  std::size_t n_nodes() const { return adjacency ? adjacency->size() : 0; }
};

// Appends a zero-feature master node connected to every existing node.
PatchGraph augment_master_node(const PatchGraph& graph);

// {"n": ..., "edges": [[u, v], ...], "master": idx | null}
nlohmann::json graph_to_json(const Adjacency& adjacency, std::optional<std::size_t> master = std::nullopt);

}  // namespace emcnet
