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
#include <span>
#include <string>
#include <vector>

#include "emcnet/ctenc.hpp"
#include "emcnet/genc.hpp"
#include "emcnet/hgenc.hpp"
#include "emcnet/imaging.hpp"
#include "emcnet/params.hpp"
#include "emcnet/treedecomp.hpp"
#include "json.hpp"

namespace emcnet {

struct ModelConfig {
  std::size_t d = 64;
  int T = 6;
  double p_r = 0.75;
  std::size_t patch = 32;
  std::size_t side = 256;
  std::size_t channels = 3;
  std::size_t n_classes = 10;
  std::size_t hgenc_layers = 3;
  bool use_genc = true;
  bool use_hgenc = true;
  bool use_ctenc = true;
  GateTiming tree_timing = GateTiming::Mixed;
  std::optional<std::uint64_t> root_seed;

  std::size_t grid_side() const { return side / patch; }
  std::size_t n_patches() const { return grid_side() * grid_side(); }
  std::size_t patch_width() const { return patch * patch * channels; }

  // Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
};

// Resolution presets: "default" (256 px, 32 px patches), "fs" (512, 64), "ss" (512, 32).
void apply_resolution_setting(ModelConfig& config, const std::string& setting);

// Named views into a ParamStore; tensors share storage with the store.
struct ModelParams {
  EmbeddingParams embedding;
  GEncParams genc;
  std::vector<HGEncLayerParams> hgenc;
  CTEncParams ctenc;
  Tensor W_clq;
  Tensor W1, W2, W3;  // d x n_classes
};

ModelParams bind_params(const ParamStore& store, const ModelConfig& config);

// Fixed patch-grid topology shared by every image of one configuration.
struct Topology {
  std::shared_ptr<const Adjacency> grid;
  std::shared_ptr<const Adjacency> augmented;  // grid plus master node
  CliqueTree tree;
  TreeSchedule schedule;
  std::size_t k_max = 0;
};

Topology build_topology(const ModelConfig& config);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in the input width
// (row count, or length for vectors); position table uses fan_in = d;
// biases start at zero. Each tensor draws from its own named stream.
ParamStore init_params(const ModelConfig& config, std::size_t k_max, std::uint64_t seed);

struct ForwardResult {
  Tensor logits;  // 1 x n_classes
  Tensor q;       // 1 x n_classes
  Tensor z_genc, z_hgenc, h_tree;  // 1 x d each; undefined for disabled encoders
  std::vector<HGEncLayerTrace> pooling;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const Topology& topology() const noexcept { return topology_; }

  ParamStore init_params(std::uint64_t seed) const;

  // prepare_image + patchify; returns n_patches x patch_width.
  Tensor tokenize(const Image& image) const;
  ForwardResult forward(const ParamStore& params, const Tensor& patches) const;
  ForwardResult forward(const ParamStore& params, const Image& image) const;

  // Metadata stored next to parameters in checkpoints.
  nlohmann::json checkpoint_meta() const;

 private:
  ModelConfig config_;
  Topology topology_;
};

// Rebuilds the model stored in a checkpoint and checks that the stored
// parameter names and shapes match it.
struct LoadedModel {
  std::unique_ptr<Model> model;
  ParamStore params;
  nlohmann::json meta;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

// Throws MismatchError naming the first differing field among d,
// n_classes, patch, side, channels and k_max.
void check_compatible(const nlohmann::json& checkpoint_meta, const ModelConfig& requested);

// Index of the largest entry; ties go to the lowest index.
std::size_t predict(std::span<const double> q);

}  // namespace emcnet
