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

#include "doctest.h"
#include "emcnet/errors.hpp"
#include "emcnet/graph.hpp"
#include "reference/reference.hpp"
#include "support/fd.hpp"

using namespace emcnet;

namespace {

void check_symmetric(const Adjacency& a) {
  for (std::size_t u = 0; u < a.size(); ++u) {
    CHECK_FALSE(a.has(u, u));
    for (std::size_t v = 0; v < a.size(); ++v) CHECK(a.has(u, v) == a.has(v, u));
  }
}

}  // namespace

TEST_CASE("grid adjacency") {
  const Adjacency g3 = build_grid_adjacency(3, 3);
  CHECK(g3.edge_count() == 20);
  check_symmetric(g3);
  CHECK(build_grid_adjacency(1, 1).edge_count() == 0);
  const Adjacency g2 = build_grid_adjacency(2, 2);
  CHECK(g2.edge_count() == 6);
  CHECK(g2.is_complete());

  // Same adjacency as an independent coordinate-based construction.
  for (const auto& [r, c] : {std::pair{3, 3}, {2, 5}, {4, 4}, {1, 6}}) {
    const Adjacency g = build_grid_adjacency(r, c);
    const ref::Graph expect = ref::grid(r, c);
    for (std::size_t u = 0; u < g.size(); ++u)
      for (std::size_t v = 0; v < g.size(); ++v) CHECK(g.has(u, v) == expect[u][v]);
  }
  CHECK(build_grid_adjacency(3, 3) == g3);
}

TEST_CASE("master node augmentation") {
  PatchGraph k4{std::make_shared<Adjacency>(build_grid_adjacency(2, 2)), Tensor::zeros({4, 3}), std::nullopt};
  const PatchGraph k5 = augment_master_node(k4);
  CHECK(k5.n_nodes() == 5);
  CHECK(k5.adjacency->edge_count() == 10);
  CHECK(k5.adjacency->is_complete());
  CHECK(k5.master_index == 4u);

  PatchGraph g{std::make_shared<Adjacency>(build_grid_adjacency(3, 3)), Tensor::full({9, 2}, 1.0), std::nullopt};
  const PatchGraph aug = augment_master_node(g);
  CHECK(aug.adjacency->edge_count() == 29);
  CHECK_FALSE(aug.adjacency->is_complete());
  CHECK_FALSE(aug.adjacency->has(0, 8));
  check_symmetric(*aug.adjacency);
  CHECK(aug.features.rows() == 10);
  CHECK(aug.features.at(9, 0) == 0.0);
  CHECK(aug.features.at(9, 1) == 0.0);
  CHECK_THROWS_AS(augment_master_node(aug), InvariantError);

  const auto j = graph_to_json(*aug.adjacency, aug.master_index);
  CHECK(j.at("n") == 10);
  CHECK(j.at("edges").size() == 29);
  CHECK(j.at("master") == 9);
}

TEST_CASE("patch embedding") {
  Rng rng(1);
  EmbeddingParams p{Tensor::zeros({6, 4}), Tensor::zeros({3, 4})};
  const Tensor zero = embed_patches(Tensor::zeros({3, 6}), p);
  for (double v : zero.data()) CHECK(v == 0.0);

  p.position_table = testing::random_tensor(rng, {3, 4}, 1.0, false);
  CHECK(embed_patches(Tensor::zeros({3, 6}), p).to_vector() == p.position_table.to_vector());

  CHECK_THROWS_AS(embed_patches(Tensor::zeros({3, 5}), p), DimensionError);
  CHECK_THROWS_AS(embed_patches(Tensor::zeros({2, 6}), p), DimensionError);

  // Same multiset of patches in another order gives different features.
  p.patch_projection = testing::random_tensor(rng, {6, 4}, 1.0, false);
  const Tensor patches = testing::random_tensor(rng, {3, 6}, 1.0, false);
  const std::vector<std::size_t> perm{2, 0, 1};
  const Tensor a = embed_patches(patches, p);
  const Tensor b = embed_patches(gather_rows(patches, perm), p);
  const Tensor moved = gather_rows(a, perm);
  CHECK(a.to_vector() != b.to_vector());
  CHECK(moved.to_vector() != b.to_vector());

  EmbeddingParams q{testing::random_tensor(rng, {6, 4}), testing::random_tensor(rng, {3, 4})};
  auto proj = testing::projector(rng, {3, 4});
  CHECK(testing::max_fd_error({q.patch_projection, q.position_table},
                              [&] { return proj(embed_patches(patches, q)); }) <= 1e-6);
}

TEST_CASE("adjacency helpers") {
  const Adjacency g = build_grid_adjacency(3, 3);
  const Adjacency cell = g.induced({0, 1, 3, 4});
  CHECK(cell.is_complete());
  CHECK(cell.size() == 4);
  const Adjacency corners = g.induced({0, 8, 2});
  CHECK(corners.edge_count() == 0);
  const auto mask = g.self_loop_mask();
  CHECK(mask[0] == 1);
  CHECK(mask[1] == 1);
  CHECK(mask[2] == 0);
  CHECK(g.degree(4) == 8);
  CHECK(g.degree(0) == 3);
  CHECK_THROWS_AS(Adjacency(3).connect(1, 1), InvariantError);
}
