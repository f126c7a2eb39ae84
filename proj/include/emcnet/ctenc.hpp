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

#include "emcnet/treedecomp.hpp"

namespace emcnet {

struct GruParams {
  Tensor W_z, U_z, b_z;  // d x d, d x d, 1 x d
  Tensor W_r, U_r, b_r;
  Tensor W, U;
};

struct CTEncParams {
  Tensor W_T1;  // d x d
  Tensor W_T2;  // d x d
  GruParams gru;
};

// Which round the reset gate and the incoming sum read from.
//  Mixed:  s, z and r read messages already produced this round (senders are
//          updated before receivers, leaves first); the candidate sum reads
//          round t-1.
//  Strict: every quantity reads round t-1 (Jacobi-style synchronous update).
enum class GateTiming { Mixed, Strict };

// One gated message j -> i from x_j (1 x d). incoming[k] and previous[k] are
// the same sender's message at the gate's round and at round t-1.
Tensor gru_gate(const Tensor& x_j, const std::vector<Tensor>& incoming, const std::vector<Tensor>& previous,
                const GruParams& params);

// Directed superedges of a clique tree and the update schedule.
struct TreeSchedule {
  std::vector<std::size_t> src, dst;                 // edge e is src[e] -> dst[e]
  std::vector<std::vector<std::size_t>> feeds;       // edges k -> src[e] with k != dst[e]
  std::vector<std::vector<std::size_t>> levels;      // edge ids grouped by dependency depth

  static TreeSchedule of(const CliqueTree& tree);
  std::size_t size() const noexcept { return src.size(); }
};

struct CTEncOutput {
  Tensor supernode_embeddings;  // n_s x d
  Tensor tree_embedding;        // 1 x d, the root's row
  Tensor messages;              // E x d in TreeSchedule edge order
};

// features: n_s x d supernode features. Requires rounds >= 1 and a non-empty tree.
CTEncOutput ctenc_forward(const CliqueTree& tree, const TreeSchedule& schedule, const Tensor& features,
                          const CTEncParams& params, int rounds, GateTiming timing = GateTiming::Mixed);

}  // namespace emcnet
