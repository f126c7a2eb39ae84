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

#include "emcnet/model.hpp"

#include <cmath>
#include <set>

#include "emcnet/errors.hpp"
#include "emcnet/rng.hpp"

namespace emcnet {
namespace {

const std::set<std::string> kConfigKeys = {"d",         "T",        "p_r",       "patch",       "side",
                                           "channels",  "n_classes", "hgenc_layers", "use_genc", "use_hgenc",
                                           "use_ctenc", "tree_timing", "root_seed"};

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("model config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("model config: " + field + " " + why);
  };
  if (d == 0) fail("d", "must be positive");
  if (T < 1) fail("T", "must be >= 1");
  if (!(p_r > 0.0 && p_r <= 1.0)) fail("p_r", "must lie in (0, 1]");
  if (patch == 0) fail("patch", "must be positive");
  if (side < patch || side % patch != 0)
    fail("side", std::to_string(side) + " is not a positive multiple of patch " + std::to_string(patch));
  if (channels != 3) fail("channels", "must be 3 (images are converted to RGB)");
  if (n_classes < 2) fail("n_classes", "must be >= 2");
  if (hgenc_layers == 0) fail("hgenc_layers", "must be >= 1");
  if (!use_genc && !use_hgenc && !use_ctenc) fail("use_*", "disable every encoder; at least one must stay on");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["d"] = d;
  j["T"] = T;
  j["p_r"] = p_r;
  j["patch"] = patch;
  j["side"] = side;
  j["channels"] = channels;
  j["n_classes"] = n_classes;
  j["hgenc_layers"] = hgenc_layers;
  j["use_genc"] = use_genc;
  j["use_hgenc"] = use_hgenc;
  j["use_ctenc"] = use_ctenc;
  j["tree_timing"] = tree_timing == GateTiming::Mixed ? "mixed" : "strict";
  j["root_seed"] = root_seed ? nlohmann::json(*root_seed) : nlohmann::json(nullptr);
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kConfigKeys.count(key)) throw ConfigError("model config: unknown field '" + key + "'");
  ModelConfig c;
  read_field(j, "d", c.d);
  read_field(j, "T", c.T);
  read_field(j, "p_r", c.p_r);
  read_field(j, "patch", c.patch);
  read_field(j, "side", c.side);
  read_field(j, "channels", c.channels);
  read_field(j, "n_classes", c.n_classes);
  read_field(j, "hgenc_layers", c.hgenc_layers);
  read_field(j, "use_genc", c.use_genc);
  read_field(j, "use_hgenc", c.use_hgenc);
  read_field(j, "use_ctenc", c.use_ctenc);
  if (j.contains("tree_timing")) {
    std::string timing;
    read_field(j, "tree_timing", timing);
    if (timing == "mixed") c.tree_timing = GateTiming::Mixed;
    else if (timing == "strict") c.tree_timing = GateTiming::Strict;
    else throw ConfigError("model config: tree_timing must be 'mixed' or 'strict', got '" + timing + "'");
  }
  if (j.contains("root_seed") && !j.at("root_seed").is_null()) {
    std::uint64_t seed = 0;
    read_field(j, "root_seed", seed);
    c.root_seed = seed;
  }
  return c;
}

void apply_resolution_setting(ModelConfig& config, const std::string& setting) {
  if (setting == "default") {
    config.side = 256;
    config.patch = 32;
  } else if (setting == "fs") {
    config.side = 512;
    config.patch = 64;
  } else if (setting == "ss") {
    config.side = 512;
    config.patch = 32;
  } else {
    throw ConfigError("unknown resolution setting '" + setting + "' (expected default, fs or ss)");
  }
}

ModelParams bind_params(const ParamStore& store, const ModelConfig& config) {
  ModelParams p;
  p.embedding = {store.at("embed.patch_projection"), store.at("embed.position")};
  p.genc = {store.at("genc.W_g"), store.at("genc.U_g1"), store.at("genc.U_g2")};
  for (std::size_t l = 0; l < config.hgenc_layers; ++l) {
    const std::string pre = "hgenc." + std::to_string(l) + ".";
    p.hgenc.push_back({store.at(pre + "W_conv"), store.at(pre + "a_attn"), store.at(pre + "p_vec"),
                       store.at(pre + "W_Q"), store.at(pre + "W_K"), store.at(pre + "W_V")});
  }
  p.ctenc.W_T1 = store.at("ctenc.W_T1");
  p.ctenc.W_T2 = store.at("ctenc.W_T2");
  auto& g = p.ctenc.gru;
  g = {store.at("ctenc.gru.W_z"), store.at("ctenc.gru.U_z"), store.at("ctenc.gru.b_z"),
       store.at("ctenc.gru.W_r"), store.at("ctenc.gru.U_r"), store.at("ctenc.gru.b_r"),
       store.at("ctenc.gru.W"),   store.at("ctenc.gru.U")};
  p.W_clq = store.at("ctenc.W_clq");
  p.W1 = store.at("out.W1");
  p.W2 = store.at("out.W2");
  p.W3 = store.at("out.W3");
  return p;
}

Topology build_topology(const ModelConfig& config) {
  config.validate();
  const std::size_t g = config.grid_side();
  Topology t;
  auto grid = std::make_shared<Adjacency>(build_grid_adjacency(g, g));
  t.augmented = augment_master_node(PatchGraph{grid, Tensor(), std::nullopt}).adjacency;
  t.grid = std::move(grid);
  t.tree = decompose(*t.grid, config.root_seed);
  t.schedule = TreeSchedule::of(t.tree);
  t.k_max = t.tree.max_clique_size();
  return t;
}

ParamStore init_params(const ModelConfig& config, std::size_t k_max, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d, c = config.n_classes;
  ParamStore store;
  auto uniform = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    Rng rng(Rng::derive(seed, "init/" + name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    store.add(name, Tensor::from(std::move(shape), std::move(v)));
  };
  auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    uniform(name, {rows, cols}, rows);
  };
  auto vector = [&](const std::string& name, std::size_t n) { uniform(name, {n, 1}, n); };

  matrix("embed.patch_projection", config.patch_width(), d);
  uniform("embed.position", {config.n_patches(), d}, d);
  matrix("genc.W_g", d, d);
  matrix("genc.U_g1", d, d);
  matrix("genc.U_g2", d, d);
  for (std::size_t l = 0; l < config.hgenc_layers; ++l) {
    const std::string pre = "hgenc." + std::to_string(l) + ".";
    matrix(pre + "W_conv", d, 2 * d);
    vector(pre + "a_attn", 4 * d);
    vector(pre + "p_vec", 2 * d);
    matrix(pre + "W_Q", 2 * d, d);
    matrix(pre + "W_K", 2 * d, d);
    matrix(pre + "W_V", 2 * d, d);
  }
  matrix("ctenc.W_T1", d, d);
  matrix("ctenc.W_T2", d, d);
  matrix("ctenc.gru.W_z", d, d);
  matrix("ctenc.gru.U_z", d, d);
  store.add("ctenc.gru.b_z", Tensor::zeros({1, d}));
  matrix("ctenc.gru.W_r", d, d);
  matrix("ctenc.gru.U_r", d, d);
  store.add("ctenc.gru.b_r", Tensor::zeros({1, d}));
  matrix("ctenc.gru.W", d, d);
  matrix("ctenc.gru.U", d, d);
  matrix("ctenc.W_clq", k_max * d, d);
  matrix("out.W1", d, c);
  matrix("out.W2", d, c);
  matrix("out.W3", d, c);
  return store;
}

Model::Model(ModelConfig config) : config_(std::move(config)), topology_(build_topology(config_)) {}

ParamStore Model::init_params(std::uint64_t seed) const {
  return emcnet::init_params(config_, topology_.k_max, seed);
}

Tensor Model::tokenize(const Image& image) const {
  return patchify(prepare_image(image, config_.side), config_.patch).flat;
}

ForwardResult Model::forward(const ParamStore& params, const Tensor& patches) const {
  const std::size_t n = config_.n_patches();
  if (patches.rank() != 2 || patches.rows() != n || patches.cols() != config_.patch_width())
    throw DimensionError("model forward: expected " + std::to_string(n) + " x " +
                         std::to_string(config_.patch_width()) + " patches, got " + shape_str(patches.shape()));
  const ModelParams p = bind_params(params, config_);
  const Tensor X = embed_patches(patches, p.embedding);

  ForwardResult out;
  std::vector<Tensor> parts;
  if (config_.use_genc) {
    PatchGraph g{topology_.augmented, concat({X, Tensor::zeros({1, config_.d})}, 0), n};
    out.z_genc = genc_forward(g, p.genc, config_.T).graph_embedding;
    parts.push_back(matmul(out.z_genc, p.W1));
  }
  if (config_.use_hgenc) {
    HGEncOutput h = hgenc_forward(PatchGraph{topology_.grid, X, std::nullopt}, p.hgenc, config_.p_r);
    out.z_hgenc = h.graph_embedding;
    out.pooling = std::move(h.trace);
    parts.push_back(matmul(out.z_hgenc, p.W2));
  }
  if (config_.use_ctenc) {
    const Tensor F = clique_features(topology_.tree, X, p.W_clq);
    out.h_tree =
        ctenc_forward(topology_.tree, topology_.schedule, F, p.ctenc, config_.T, config_.tree_timing).tree_embedding;
    parts.push_back(matmul(out.h_tree, p.W3));
  }
  out.logits = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out.logits = add(out.logits, parts[i]);
  out.q = softmax(out.logits, 1);
  return out;
}

ForwardResult Model::forward(const ParamStore& params, const Image& image) const {
  return forward(params, tokenize(image));
}

nlohmann::json Model::checkpoint_meta() const {
  return {{"model", config_.to_json()}, {"k_max", topology_.k_max}, {"n_patches", config_.n_patches()}};
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("model")) throw FormatError("checkpoint has no model configuration");
  LoadedModel out;
  out.model = std::make_unique<Model>(ModelConfig::from_json(ck.meta.at("model")));
  if (ck.meta.value("k_max", std::size_t{0}) != out.model->topology().k_max)
    throw MismatchError("k_max", "checkpoint K_max " + ck.meta.value("k_max", nlohmann::json()).dump() +
                                     " does not match the rebuilt decomposition's " +
                                     std::to_string(out.model->topology().k_max));
  out.params = out.model->init_params(0);
  out.params.assign_values(ck.params);
  out.meta = std::move(ck.meta);
  return out;
}

void check_compatible(const nlohmann::json& meta, const ModelConfig& requested) {
  const ModelConfig stored = ModelConfig::from_json(meta.at("model"));
  auto check = [](const char* field, std::size_t have, std::size_t want) {
    if (have != want)
      throw MismatchError(field, std::string("checkpoint/config mismatch in ") + field + ": checkpoint has " +
                                     std::to_string(have) + ", config asks for " + std::to_string(want));
  };
  check("d", stored.d, requested.d);
  check("n_classes", stored.n_classes, requested.n_classes);
  check("patch", stored.patch, requested.patch);
  check("side", stored.side, requested.side);
  check("channels", stored.channels, requested.channels);
  check("k_max", meta.value("k_max", std::size_t{0}), build_topology(requested).k_max);
}

std::size_t predict(std::span<const double> q) {
  if (q.empty()) throw EmptyInputError("predict: empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

}  // namespace emcnet
