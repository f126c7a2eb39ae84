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

#include <cmath>

#include "doctest.h"
#include "emcnet/errors.hpp"
#include "emcnet/hgenc.hpp"
#include "reference/reference.hpp"
#include "support/fd.hpp"

using namespace emcnet;

namespace {

HGEncLayerParams random_layer(Rng& rng, std::size_t d, bool grad = false) {
  return {testing::random_tensor(rng, {d, 2 * d}, 1.0, grad), testing::random_tensor(rng, {4 * d, 1}, 1.0, grad),
          testing::positive_tensor(rng, {2 * d, 1}, 0.1, grad),  testing::random_tensor(rng, {2 * d, d}, 1.0, grad),
          testing::random_tensor(rng, {2 * d, d}, 1.0, grad),    testing::random_tensor(rng, {2 * d, d}, 1.0, grad)};
}

ref::HGEncLayer to_ref(const HGEncLayerParams& l) {
  return {ref::of(l.W_conv), l.a_attn.to_vector(), l.p_vec.to_vector(),
          ref::of(l.W_Q),    ref::of(l.W_K),       ref::of(l.W_V)};
}

ref::Graph to_ref(const Adjacency& a) {
  ref::Graph g(a.size(), std::vector<bool>(a.size(), false));
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v < a.size(); ++v) g[u][v] = a.has(u, v);
  return g;
}

void check_rows_sum_to_one(const Tensor& alpha) {
  for (std::size_t r = 0; r < alpha.rows(); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < alpha.cols(); ++c) total += alpha.at(r, c);
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("attention conv special cases") {
  Rng rng(1);
  const std::size_t d = 3;
  const HGEncLayerParams p = random_layer(rng, d);
  const Tensor z = testing::random_tensor(rng, {1, d}, 1.0, false);
  Tensor alpha;
  const Tensor out = attention_conv(z, Adjacency(1), p, &alpha);
  CHECK(alpha.at(0, 0) == 1.0);
  const Tensor expect = relu(matmul(z, p.W_conv));
  for (std::size_t k = 0; k < 2 * d; ++k) CHECK(out.at(0, k) == doctest::Approx(expect.at(0, k)).epsilon(1e-14));

  // K4 with identical rows: every output row equal.
  const Tensor same = matmul(Tensor::full({4, 1}, 1.0), testing::random_tensor(rng, {1, d}, 1.0, false));
  const Tensor eq = attention_conv(same, build_grid_adjacency(2, 2), p);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t k = 0; k < 2 * d; ++k) CHECK(eq.at(r, k) == doctest::Approx(eq.at(0, k)).epsilon(1e-14));
}

TEST_CASE("attention conv matches the naive reference") {
  Rng rng(2);
  const std::size_t d = 3;
  Adjacency path(3);
  path.connect(0, 1);
  path.connect(1, 2);
  for (const Adjacency& g : {path, build_grid_adjacency(3, 3)}) {
    const HGEncLayerParams p = random_layer(rng, d);
    const Tensor z = testing::random_tensor(rng, {g.size(), d}, 1.0, false);
    Tensor alpha;
    const Tensor out = attention_conv(z, g, p, &alpha);
    const auto expect = ref::attention_conv(to_ref(g), ref::of(z), ref::of(p.W_conv), p.a_attn.to_vector());
    check_rows_sum_to_one(alpha);
    CHECK(ref::max_abs_diff(expect.alpha, alpha) <= 1e-12);
    CHECK(ref::max_abs_diff(expect.hidden, out) <= 1e-12);
  }
}

TEST_CASE("pool sizes") {
  CHECK(pooled_size(64, 0.75) == 48);
  CHECK(pooled_size(48, 0.75) == 36);
  CHECK(pooled_size(36, 0.75) == 27);
  CHECK(pooled_size(9, 0.75) == 7);
  CHECK(pooled_size(5, 1.0) == 5);
  CHECK(pooled_size(1, 0.01) == 1);
  CHECK(pooled_size(3, 2.0 / 3.0) == 2);
  CHECK_THROWS_AS(pooled_size(4, 0.0), ConfigError);
  CHECK_THROWS_AS(pooled_size(4, 1.5), ConfigError);
}

TEST_CASE("score and select") {
  const Tensor hidden = Tensor::from({3, 1}, {3, 1, 2});
  const Tensor p = Tensor::from({1, 1}, {1});
  const Selection s = score_and_select(hidden, p, 2.0 / 3.0);
  CHECK(s.idx == std::vector<std::size_t>{0, 2});
  CHECK(score_and_select(hidden, p, 1.0).idx.size() == 3);
  CHECK(score_and_select(Tensor::from({4, 1}, {1, 2, 2, 1}), p, 0.5).idx == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(score_and_select(hidden, Tensor::zeros({1, 1}), 0.5), NumericError);

  Rng rng(3);
  const Tensor h = testing::random_tensor(rng, {64, 4}, 1.0, false);
  const Tensor pv = testing::random_tensor(rng, {4, 1}, 1.0, false);
  const Selection base = score_and_select(h, pv, 0.75);
  CHECK(base.idx.size() == 48);

  // Positive scaling of p and a constant shift of every score keep idx.
  const Selection scaled = score_and_select(h, affine(pv, 7.5), 0.75);
  CHECK(scaled.idx == base.idx);
  for (std::size_t i = 0; i < 64; ++i) CHECK(scaled.scores.at(i) == doctest::Approx(base.scores.at(i)).epsilon(1e-13));
  const Tensor shift = affine(transpose(l2_normalize(pv)), 3.0);
  const Selection shifted = score_and_select(add(h, shift), pv, 0.75);
  CHECK(shifted.idx == base.idx);
}

TEST_CASE("pool and gate") {
  const Adjacency g = build_grid_adjacency(3, 3);
  Rng rng(4);
  const Tensor hidden = testing::random_tensor(rng, {9, 2}, 1.0, false);
  Selection sel;
  sel.idx = {0, 1, 3, 4};
  sel.scores = Tensor::from({9, 1}, {1, -0.5, 0, 1, 1, 0, 0, 0, 0});
  const PooledGraph pooled = pool_and_gate(hidden, g, sel);
  CHECK(pooled.adjacency.is_complete());
  CHECK(pooled.adjacency.size() == 4);
  CHECK(pooled.features.at(1, 0) == 0.0);
  CHECK(pooled.features.at(1, 1) == 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(pooled.features.at(0, k) == hidden.at(0, k));
    CHECK(pooled.features.at(2, k) == hidden.at(3, k));
  }

  // Principal submatrix: never adds edges.
  sel.idx = {8, 0, 4, 2};
  const PooledGraph other = pool_and_gate(hidden, g, sel);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) CHECK(other.adjacency.has(a, b) == g.has(sel.idx[a], sel.idx[b]));
}

TEST_CASE("pooled self attention") {
  Rng rng(5);
  const std::size_t d = 3;
  const Tensor W_Q = testing::random_tensor(rng, {2 * d, d}, 1.0, false);
  const Tensor W_K = testing::random_tensor(rng, {2 * d, d}, 1.0, false);
  const Tensor W_V = testing::random_tensor(rng, {2 * d, d}, 1.0, false);

  PooledGraph lone;
  lone.adjacency = Adjacency(1);
  lone.features = testing::random_tensor(rng, {1, 2 * d}, 1.0, false);
  const Tensor single = pooled_self_attention(lone, W_Q, W_K, W_V);
  const Tensor zv = matmul(lone.features, W_V);
  for (std::size_t k = 0; k < d; ++k) CHECK(single.at(0, k) == doctest::Approx(zv.at(0, k)).epsilon(1e-14));

  PooledGraph four;
  four.adjacency = Adjacency(4);
  four.adjacency.connect(0, 1);
  four.adjacency.connect(1, 2);
  four.adjacency.connect(2, 3);
  four.adjacency.connect(0, 2);
  four.features = testing::random_tensor(rng, {4, 2 * d}, 1.0, false);
  Tensor alpha;
  pooled_self_attention(four, Tensor::zeros({2 * d, d}), Tensor::zeros({2 * d, d}), W_V, &alpha);
  CHECK(alpha.at(3, 2) == doctest::Approx(0.5));
  CHECK(alpha.at(3, 3) == doctest::Approx(0.5));
  CHECK(alpha.at(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(alpha.at(3, 0) == 0.0);

  const Tensor out = pooled_self_attention(four, W_Q, W_K, W_V, &alpha);
  check_rows_sum_to_one(alpha);
  const auto expect =
      ref::self_attention(to_ref(four.adjacency), ref::of(four.features), ref::of(W_Q), ref::of(W_K), ref::of(W_V));
  CHECK(ref::max_abs_diff(expect.alpha, alpha) <= 1e-12);
  CHECK(ref::max_abs_diff(expect.out, out) <= 1e-12);
}

TEST_CASE("hgenc layer sizes") {
  Rng rng(6);
  const std::size_t d = 4;
  std::vector<HGEncLayerParams> layers;
  for (int l = 0; l < 3; ++l) layers.push_back(random_layer(rng, d));
  const PatchGraph g{std::make_shared<Adjacency>(build_grid_adjacency(8, 8)),
                     testing::random_tensor(rng, {64, d}, 1.0, false), std::nullopt};
  const HGEncOutput out = hgenc_forward(g, layers, 0.75);
  REQUIRE(out.trace.size() == 3);
  CHECK(out.trace[0].idx.size() == 48);
  CHECK(out.trace[1].idx.size() == 36);
  CHECK(out.trace[2].idx.size() == 27);
  CHECK(out.node_embeddings.rows() == 27);
  CHECK(out.graph_embedding.shape() == Shape{1, d});
  const Tensor readout = mean(out.node_embeddings, 0);
  for (std::size_t k = 0; k < d; ++k) CHECK(out.graph_embedding.at(0, k) == doctest::Approx(readout.at(k)));

  const HGEncOutput keep = hgenc_forward(g, layers, 1.0);
  for (const auto& t : keep.trace) CHECK(t.idx.size() == 64);

  const PatchGraph small{std::make_shared<Adjacency>(build_grid_adjacency(3, 3)),
                         testing::random_tensor(rng, {9, d}, 1.0, false), std::nullopt};
  const HGEncOutput shrink = hgenc_forward(small, layers, 0.5);
  CHECK(shrink.trace[0].idx.size() == 5);
  CHECK(shrink.trace[1].idx.size() == 3);
  CHECK(shrink.trace[2].idx.size() == 2);

  CHECK_THROWS_AS(hgenc_forward(augment_master_node(small), layers, 0.75), InvariantError);
}

TEST_CASE("hgenc matches the naive reference") {
  Rng rng(7);
  const std::size_t d = 3;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<HGEncLayerParams> layers;
    std::vector<ref::HGEncLayer> ref_layers;
    for (int l = 0; l < 3; ++l) {
      layers.push_back(random_layer(rng, d));
      if (trial % 2 == 1) layers.back().p_vec = testing::random_tensor(rng, {2 * d, 1}, 1.0, false);
      ref_layers.push_back(to_ref(layers.back()));
    }
    const Tensor x = testing::random_tensor(rng, {9, d}, 1.0, false);
    const PatchGraph g{std::make_shared<Adjacency>(build_grid_adjacency(3, 3)), x, std::nullopt};
    const HGEncOutput out = hgenc_forward(g, layers, 0.75);
    const auto expect = ref::hgenc(ref::grid(3, 3), ref::of(x), ref_layers, 0.75);
    for (std::size_t l = 0; l < 3; ++l) CHECK(out.trace[l].idx == expect.kept[l]);
    for (std::size_t k = 0; k < d; ++k) CHECK(std::abs(out.graph_embedding.at(0, k) - expect.zg[k]) <= 1e-12);
  }
}

TEST_CASE("hgenc gradients through three layers") {
  Rng rng(8);
  const std::size_t d = 3;
  std::vector<HGEncLayerParams> layers;
  std::vector<Tensor> leaves;
  for (int l = 0; l < 3; ++l) {
    layers.push_back(random_layer(rng, d, true));
    for (const Tensor& t : {layers.back().W_conv, layers.back().a_attn, layers.back().p_vec, layers.back().W_Q,
                            layers.back().W_K, layers.back().W_V})
      leaves.push_back(t);
  }
  Tensor x = testing::random_tensor(rng, {9, d});
  leaves.push_back(x);
  auto proj = testing::projector(rng, {1, d});
  const auto adj = std::make_shared<Adjacency>(build_grid_adjacency(3, 3));
  CHECK(testing::max_fd_error(leaves, [&] {
          return proj(hgenc_forward({adj, x, std::nullopt}, layers, 0.75).graph_embedding);
        }) <= 1e-4);
}
