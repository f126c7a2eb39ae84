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

#include "emcnet/treedecomp.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "emcnet/errors.hpp"
#include "emcnet/rng.hpp"

namespace emcnet {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t intersection_size(const NodeSet& a, const NodeSet& b) {
  std::size_t count = 0;
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else { ++count; ++i; ++j; }
  }
  return count;
}

bool contains(const NodeSet& set, std::size_t v) { return std::binary_search(set.begin(), set.end(), v); }

std::string edge_str(std::size_t u, std::size_t v) { return std::to_string(u) + "-" + std::to_string(v); }

}  // namespace

EliminationResult triangulate_min_degree(const Adjacency& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<std::set<std::size_t>> adj(n);
  for (const auto& [u, v] : adjacency.edges()) {
    adj[u].insert(v);
    adj[v].insert(u);
  }
  std::vector<bool> gone(n, false);

  EliminationResult res;
  res.n_nodes = n;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!gone[v] && (best == n || adj[v].size() < adj[best].size())) best = v;

    NodeSet clique(adj[best].begin(), adj[best].end());
    for (auto i = adj[best].begin(); i != adj[best].end(); ++i)
      for (auto j = std::next(i); j != adj[best].end(); ++j)
        if (adj[*i].insert(*j).second) {
          adj[*j].insert(*i);
          res.fill_edges.emplace_back(*i, *j);
        }
    for (std::size_t u : adj[best]) adj[u].erase(best);
    adj[best].clear();
    gone[best] = true;

    clique.insert(std::lower_bound(clique.begin(), clique.end(), best), best);
    res.order.push_back(best);
    res.cliques.push_back(std::move(clique));
  }
  return res;
}

std::size_t CliqueTree::max_clique_size() const {
  std::size_t k = 0;
  for (const auto& s : supernodes) k = std::max(k, s.size());
  return k;
}

std::vector<std::vector<std::size_t>> CliqueTree::neighbors() const {
  std::vector<std::vector<std::size_t>> nb(supernodes.size());
  for (const auto& [i, j] : edges) {
    nb[i].push_back(j);
    nb[j].push_back(i);
  }
  for (auto& list : nb) std::sort(list.begin(), list.end());
  return nb;
}

std::size_t CliqueTree::diameter() const {
  if (supernodes.empty()) return 0;
  const auto nb = neighbors();
  auto farthest = [&](std::size_t start) {
    std::vector<std::size_t> dist(nb.size(), SIZE_MAX);
    std::vector<std::size_t> queue{start};
    dist[start] = 0;
    std::size_t last = start;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t u = queue[q];
      last = dist[u] > dist[last] ? u : last;
      for (std::size_t v : nb[u])
        if (dist[v] == SIZE_MAX) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
    }
    return std::pair{last, dist[last]};
  };
  return farthest(farthest(0).first).second;
}

CliqueTree build_clique_tree(const EliminationResult& elimination, std::optional<std::uint64_t> root_seed) {
  CliqueTree tree;
  tree.fill_edges = elimination.fill_edges;

  std::vector<NodeSet> candidates = elimination.cliques;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool maximal = true;
    for (std::size_t j = 0; j < candidates.size() && maximal; ++j)
      if (i != j && candidates[j].size() > candidates[i].size() &&
          std::includes(candidates[j].begin(), candidates[j].end(), candidates[i].begin(), candidates[i].end()))
        maximal = false;
    if (maximal) tree.supernodes.push_back(candidates[i]);
  }
  if (tree.supernodes.empty()) return tree;

  const std::size_t k = tree.supernodes.size();
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;  // (weight, i, j)
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      pairs.emplace_back(intersection_size(tree.supernodes[i], tree.supernodes[j]), i, j);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  DisjointSets sets(k);
  for (const auto& [w, i, j] : pairs)
    if (sets.unite(i, j)) tree.edges.emplace_back(i, j);
  std::sort(tree.edges.begin(), tree.edges.end());

  const auto nb = tree.neighbors();
  std::vector<std::size_t> leaves;
  for (std::size_t i = 0; i < k; ++i)
    if (nb[i].size() <= 1) leaves.push_back(i);
  if (root_seed) {
    Rng rng(Rng::derive(*root_seed, "clique_tree_root"));
    tree.root = leaves[rng.index(leaves.size())];
  } else {
    tree.root = leaves.front();
  }
  return tree;
}

CliqueTree decompose(const Adjacency& adjacency, std::optional<std::uint64_t> root_seed) {
  CliqueTree tree = build_clique_tree(triangulate_min_degree(adjacency), root_seed);
  const RipReport report = verify_rip(tree, adjacency);
  if (!report.ok) throw InvariantError("clique tree failed verification: " + report.message);
  return tree;
}

RipReport verify_rip(const CliqueTree& tree, const Adjacency& adjacency) {
  const std::size_t k = tree.supernodes.size();
  const std::size_t n = adjacency.size();
  auto fail = [](std::string msg) { return RipReport{false, std::move(msg)}; };

  if (k == 0) return n == 0 ? RipReport{} : fail("no supernodes");
  if (tree.edges.size() != k - 1) return fail("not a tree: " + std::to_string(tree.edges.size()) +
                                             " edges for " + std::to_string(k) + " supernodes");
  DisjointSets sets(k);
  for (const auto& [i, j] : tree.edges) {
    if (i >= k || j >= k || i == j) return fail("not a tree: bad superedge " + edge_str(i, j));
    if (!sets.unite(i, j)) return fail("not a tree: cycle through superedge " + edge_str(i, j));
  }
  if (tree.root >= k) return fail("root " + std::to_string(tree.root) + " out of range");

  for (const auto& s : tree.supernodes)
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end())
      return fail("supernode members not strictly ascending");

  for (std::size_t v = 0; v < n; ++v) {
    bool covered = false;
    for (const auto& s : tree.supernodes) covered = covered || contains(s, v);
    if (!covered) return fail("node uncovered: " + std::to_string(v));
  }
  for (const auto& [u, v] : adjacency.edges()) {
    bool covered = false;
    for (const auto& s : tree.supernodes) covered = covered || (contains(s, u) && contains(s, v));
    if (!covered) return fail("edge uncovered: " + edge_str(u, v));
  }

  // For each node, the supernodes holding it must form one connected piece:
  // a forest on h vertices is connected iff it has h - 1 edges.
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t holders = 0, links = 0;
    for (const auto& s : tree.supernodes) holders += contains(s, v) ? 1 : 0;
    for (const auto& [i, j] : tree.edges)
      links += (contains(tree.supernodes[i], v) && contains(tree.supernodes[j], v)) ? 1 : 0;
    if (holders > 0 && links + 1 != holders)
      return fail("running intersection violated at node " + std::to_string(v));
  }
  return {};
}

Tensor clique_features(const CliqueTree& tree, const Tensor& node_features, const Tensor& W_clq) {
  const std::size_t d = node_features.cols();
  if (d == 0 || W_clq.rows() % d != 0)
    throw DimensionError("clique_features: W_clq " + shape_str(W_clq.shape()) + " for feature width " +
                         std::to_string(d));
  const std::size_t k_max = W_clq.rows() / d;
  std::vector<std::size_t> rows;
  rows.reserve(tree.size() * k_max);
  for (const auto& s : tree.supernodes) {
    if (s.size() > k_max)
      throw InvariantError("clique_features: supernode of size " + std::to_string(s.size()) + " exceeds K_max " +
                           std::to_string(k_max));
    rows.insert(rows.end(), s.begin(), s.end());
    rows.insert(rows.end(), k_max - s.size(), kPadRow);
  }
  const Tensor stacked = gather_rows_padded(node_features, rows);
  return matmul(reshape(stacked, {tree.size(), k_max * d}), W_clq);
}

nlohmann::json clique_tree_to_json(const CliqueTree& tree) {
  nlohmann::json j;
  j["supernodes"] = tree.supernodes;
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : tree.edges) j["edges"].push_back({a, b});
  j["root"] = tree.root;
  j["fill_edges"] = nlohmann::json::array();
  for (const auto& [a, b] : tree.fill_edges) j["fill_edges"].push_back({a, b});
  return j;
}

}  // namespace emcnet
