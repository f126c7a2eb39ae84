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

#include "emcnet/ctenc.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "emcnet/errors.hpp"

namespace emcnet {

Tensor gru_gate(const Tensor& x_j, const std::vector<Tensor>& incoming, const std::vector<Tensor>& previous,
                const GruParams& params) {
  if (incoming.size() != previous.size())
    throw DimensionError("gru_gate: " + std::to_string(incoming.size()) + " incoming messages but " +
                         std::to_string(previous.size()) + " previous ones");
  const std::size_t d = params.W.cols();
  Tensor s = Tensor::zeros({1, d});
  Tensor gated = Tensor::zeros({1, d});
  const Tensor xr = add(matmul(x_j, params.W_r), params.b_r);
  for (std::size_t k = 0; k < incoming.size(); ++k) {
    s = add(s, incoming[k]);
    const Tensor r = sigmoid(add(xr, matmul(incoming[k], params.U_r)));
    gated = add(gated, mul(r, previous[k]));
  }
  const Tensor z = sigmoid(add(add(matmul(x_j, params.W_z), matmul(s, params.U_z)), params.b_z));
  const Tensor candidate = tanh(add(matmul(x_j, params.W), matmul(gated, params.U)));
  return add(mul(affine(z, -1.0, 1.0), s), mul(z, candidate));
}

TreeSchedule TreeSchedule::of(const CliqueTree& tree) {
  TreeSchedule sch;
  std::map<Edge, std::size_t> id;
  for (const auto& [i, j] : tree.edges) {
    for (const auto& [a, b] : {Edge{i, j}, Edge{j, i}}) {
      id[{a, b}] = sch.src.size();
      sch.src.push_back(a);
      sch.dst.push_back(b);
    }
  }
  const auto nb = tree.neighbors();
  const std::size_t e_count = sch.src.size();
  sch.feeds.resize(e_count);
  for (std::size_t e = 0; e < e_count; ++e)
    for (std::size_t k : nb[sch.src[e]])
      if (k != sch.dst[e]) sch.feeds[e].push_back(id.at({k, sch.src[e]}));

  // On a tree the feed relation is acyclic, so depths are well defined.
  std::vector<std::size_t> depth(e_count, SIZE_MAX);
  std::function<std::size_t(std::size_t)> depth_of = [&](std::size_t e) {
    if (depth[e] != SIZE_MAX) return depth[e];
    std::size_t dep = 0;
    for (std::size_t f : sch.feeds[e]) dep = std::max(dep, depth_of(f) + 1);
    return depth[e] = dep;
  };
  for (std::size_t e = 0; e < e_count; ++e) {
    const std::size_t dep = depth_of(e);
    if (sch.levels.size() <= dep) sch.levels.resize(dep + 1);
    sch.levels[dep].push_back(e);
  }
  return sch;
}

namespace {

struct Projections {
  Tensor xz, xr, xw;  // X W_z + b_z, X W_r + b_r, X W for every supernode
};

// Gated update of a batch of edges. current/current_row locate the messages
// the gates read; previous holds round t-1 in schedule order.
Tensor update_batch(const TreeSchedule& sch, const std::vector<std::size_t>& batch, const Projections& proj,
                    const Tensor& current, const std::vector<std::size_t>& current_row, const Tensor& previous,
                    const GruParams& p) {
  const std::size_t d = p.W.cols();
  std::vector<std::size_t> senders, pair_local, pair_cur, pair_prev, pair_sender;
  for (std::size_t local = 0; local < batch.size(); ++local) {
    const std::size_t e = batch[local];
    senders.push_back(sch.src[e]);
    for (std::size_t f : sch.feeds[e]) {
      pair_local.push_back(local);
      pair_cur.push_back(current_row[f]);
      pair_prev.push_back(f);
      pair_sender.push_back(sch.src[e]);
    }
  }

  Tensor s = Tensor::zeros({batch.size(), d});
  Tensor gated = Tensor::zeros({batch.size(), d});
  if (!pair_local.empty()) {
    const Tensor m_cur = gather_rows(current, pair_cur);
    s = scatter_add_rows(m_cur, pair_local, batch.size());
    const Tensor r = sigmoid(add(gather_rows(proj.xr, pair_sender), matmul(m_cur, p.U_r)));
    gated = scatter_add_rows(mul(r, gather_rows(previous, pair_prev)), pair_local, batch.size());
  }
  const Tensor z = sigmoid(add(gather_rows(proj.xz, senders), matmul(s, p.U_z)));
  const Tensor candidate = tanh(add(gather_rows(proj.xw, senders), matmul(gated, p.U)));
  // (1 - z) * s + z * candidate
  return add(s, mul(z, sub(candidate, s)));
}

}  // namespace

CTEncOutput ctenc_forward(const CliqueTree& tree, const TreeSchedule& schedule, const Tensor& features,
                          const CTEncParams& params, int rounds, GateTiming timing) {
  if (tree.size() == 0) throw EmptyInputError("ctenc_forward: empty clique tree");
  if (rounds < 1) throw ConfigError("ctenc_forward: T must be >= 1, got " + std::to_string(rounds));
  if (features.rows() != tree.size())
    throw DimensionError("ctenc_forward: " + std::to_string(features.rows()) + " feature rows for " +
                         std::to_string(tree.size()) + " supernodes");
  const std::size_t d = params.W_T1.cols();
  const std::size_t n_edges = schedule.size();
  const GruParams& p = params.gru;

  Tensor messages = Tensor::zeros({n_edges, d});
  if (n_edges > 0) {
    Projections proj;
    proj.xz = add(matmul(features, p.W_z), p.b_z);
    proj.xr = add(matmul(features, p.W_r), p.b_r);
    proj.xw = matmul(features, p.W);

    std::vector<std::size_t> identity(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) identity[e] = e;

    for (int t = 0; t < rounds; ++t) {
      if (timing == GateTiming::Strict) {
        messages = update_batch(schedule, identity, proj, messages, identity, messages, p);
        continue;
      }
      std::vector<Tensor> produced;
      std::vector<std::size_t> row(n_edges, SIZE_MAX);
      std::size_t filled = 0;
      Tensor current;
      for (const auto& level : schedule.levels) {
        produced.push_back(update_batch(schedule, level, proj, current, row, messages, p));
        for (std::size_t e : level) row[e] = filled++;
        current = concat(std::span<const Tensor>(produced), 0);
      }
      messages = gather_rows(current, row);
    }
  }

  Tensor update = matmul(features, params.W_T1);
  if (n_edges > 0) update = add(update, matmul(scatter_add_rows(messages, schedule.dst, tree.size()), params.W_T2));
  CTEncOutput out;
  out.supernode_embeddings = sigmoid(update);
  const std::vector<std::size_t> root{tree.root};
  out.tree_embedding = gather_rows(out.supernode_embeddings, root);
  out.messages = messages;
  return out;
}

}  // namespace emcnet
