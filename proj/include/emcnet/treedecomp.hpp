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
#include <optional>
#include <string>
#include <vector>

#include "emcnet/graph.hpp"
#include "json.hpp"

namespace emcnet {

using NodeSet = std::vector<std::size_t>;  // sorted ascending

struct EliminationResult {
  std::size_t n_nodes = 0;
  std::vector<std::size_t> order;
  std::vector<Edge> fill_edges;  // (u, v) with u < v, in the order they were added
  std::vector<NodeSet> cliques;  // {v} + N(v) at the moment v was eliminated, one per step
};

// Greedy min-degree elimination; ties go to the lowest node index.
EliminationResult triangulate_min_degree(const Adjacency& adjacency);

struct CliqueTree {
  std::vector<NodeSet> supernodes;  // maximal cliques in lexicographic order
  std::vector<Edge> edges;          // supernode index pairs (i, j), i < j
  std::size_t root = 0;
  std::vector<Edge> fill_edges;

  std::size_t size() const noexcept { return supernodes.size(); }
  std::size_t max_clique_size() const;
  std::vector<std::vector<std::size_t>> neighbors() const;
  // Longest path in edges; 0 for a single supernode.
  std::size_t diameter() const;
};

// Maximal cliques joined by a maximum-weight spanning tree on separator sizes.
// Without a seed the root is the lowest-index leaf; a seed picks a leaf at random.
CliqueTree build_clique_tree(const EliminationResult& elimination,
                             std::optional<std::uint64_t> root_seed = std::nullopt);

// Triangulates, builds the tree and checks it against the source graph;
// throws InvariantError if the result fails verification.
CliqueTree decompose(const Adjacency& adjacency, std::optional<std::uint64_t> root_seed = std::nullopt);

struct RipReport {
  bool ok = true;
  std::string message;  // first violation, empty when ok
};

// Tree shape, coverage of every node and edge, and the running-intersection property.
RipReport verify_rip(const CliqueTree& tree, const Adjacency& adjacency);

// Members' feature rows concatenated in ascending node order, zero-padded to
// K_max rows, times W_clq ((K_max*d) x d). Returns n_supernodes x d.
Tensor clique_features(const CliqueTree& tree, const Tensor& node_features, const Tensor& W_clq);

nlohmann::json clique_tree_to_json(const CliqueTree& tree);

}  // namespace emcnet
