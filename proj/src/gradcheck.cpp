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

#include "emcnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "emcnet/ctenc.hpp"
#include "emcnet/errors.hpp"
#include "emcnet/genc.hpp"
#include "emcnet/hgenc.hpp"
#include "emcnet/model.hpp"
#include "emcnet/rng.hpp"
#include "emcnet/training.hpp"
#include "emcnet/treedecomp.hpp"

namespace emcnet {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

FiniteDifferenceResult finite_difference_check(const std::vector<Tensor>& inputs,
                                               const std::function<Tensor()>& loss, double step) {
  std::vector<Tensor> leaves = inputs;
  for (auto& t : leaves) {
    if (!t.requires_grad()) throw InvariantError("finite_difference_check: input does not require grad");
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss());
  }
  FiniteDifferenceResult res;
  for (auto& t : leaves) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss().item();
      values[i] = saved - step;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic[i], numeric));
      ++res.entries;
    }
  }
  return res;
}

namespace {

class Toy {
 public:
  explicit Toy(std::uint64_t seed) : rng_(seed) {}

  Tensor leaf(Shape shape, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng_.uniform(-scale, scale);
    return Tensor::from(std::move(shape), std::move(v), true);
  }
  // Entries in [lo, lo + 1).
  Tensor positive_leaf(Shape shape, double lo = 0.1) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = lo + rng_.uniform();
    return Tensor::from(std::move(shape), std::move(v), true);
  }
  Tensor constant(Shape shape, double scale = 1.0) { return leaf(std::move(shape), scale).detach(); }
  // sum(out * R) for a fixed random R, so every output entry matters.
  std::function<Tensor(const Tensor&)> projector(const Shape& shape) {
    const Tensor r = constant(shape);
    return [r](const Tensor& out) { return sum(mul(out, r)); };
  }

 private:
  Rng rng_;
};

struct Case {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Tensor()> loss;
};

std::vector<Case> tensor_cases(Toy& toy) {
  std::vector<Case> cases;
  auto unary = [&](const std::string& name, Shape shape, std::function<Tensor(const Tensor&)> op) {
    Tensor a = toy.leaf(shape);
    auto proj = toy.projector(op(a.detach()).shape());
    cases.push_back({name, {a}, [=] { return proj(op(a)); }});
  };
  auto binary = [&](const std::string& name, Shape sa, Shape sb, std::function<Tensor(const Tensor&, const Tensor&)> op) {
    Tensor a = toy.leaf(sa), b = toy.leaf(sb);
    auto proj = toy.projector(op(a.detach(), b.detach()).shape());
    cases.push_back({name, {a, b}, [=] { return proj(op(a, b)); }});
  };
  binary("matmul", {3, 4}, {4, 2}, [](const Tensor& a, const Tensor& b) { return matmul(a, b); });
  binary("add", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("add_row_broadcast", {3, 4}, {1, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("sub", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  binary("mul", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  binary("mul_row_broadcast", {3, 4}, {1, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  unary("relu", {3, 4}, [](const Tensor& a) { return relu(a); });
  unary("sigmoid", {3, 4}, [](const Tensor& a) { return sigmoid(a); });
  unary("tanh", {5}, [](const Tensor& a) { return tanh(a); });
  unary("affine", {3, 4}, [](const Tensor& a) { return affine(a, -1.5, 0.25); });
  unary("sum_all", {3, 4}, [](const Tensor& a) { return sum(a); });
  unary("sum_rows", {3, 4}, [](const Tensor& a) { return sum(a, 0); });
  unary("mean_cols", {3, 4}, [](const Tensor& a) { return mean(a, 1); });
  unary("softmax_rows", {3, 4}, [](const Tensor& a) { return softmax(a, 1); });
  unary("softmax_cols", {3, 4}, [](const Tensor& a) { return softmax(a, 0); });
  unary("masked_softmax", {3, 3}, [](const Tensor& a) {
    static const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 1, 0, 1, 1};
    return masked_softmax_rows(a, mask);
  });
  binary("concat_rows", {2, 3}, {1, 3}, [](const Tensor& a, const Tensor& b) { return concat({a, b}, 0); });
  binary("concat_cols", {2, 3}, {2, 2}, [](const Tensor& a, const Tensor& b) { return concat({a, b}, 1); });
  unary("gather_rows", {3, 2}, [](const Tensor& a) {
    static const std::vector<std::size_t> idx = {2, 1, 1, 0};
    return gather_rows(a, idx);
  });
  unary("gather_rows_padded", {3, 2}, [](const Tensor& a) {
    static const std::vector<std::size_t> idx = {2, kPadRow, 0, 0};
    return gather_rows_padded(a, idx);
  });
  unary("scatter_add_rows", {4, 2}, [](const Tensor& a) {
    static const std::vector<std::size_t> idx = {1, 0, 1, 2};
    return scatter_add_rows(a, idx, 3);
  });
  binary("scale_rows", {3, 4}, {3, 1}, [](const Tensor& a, const Tensor& s) { return scale_rows(a, s); });
  unary("l2_normalize", {5, 1}, [](const Tensor& a) { return l2_normalize(a); });
  unary("transpose", {3, 4}, [](const Tensor& a) { return transpose(a); });
  unary("reshape", {3, 4}, [](const Tensor& a) { return reshape(a, {2, 6}); });
  return cases;
}

std::vector<Case> embed_cases(Toy& toy) {
  Tensor patches = toy.leaf({4, 6}), proj = toy.leaf({6, 3}), pos = toy.leaf({4, 3});
  auto p = toy.projector({4, 3});
  return {{"embed_patches", {patches, proj, pos}, [=] { return p(embed_patches(patches, {proj, pos})); }}};
}

std::vector<Case> genc_cases(Toy& toy) {
  const std::size_t d = 4;
  auto grid = std::make_shared<Adjacency>(build_grid_adjacency(3, 3));
  auto adj = augment_master_node(PatchGraph{grid, Tensor(), std::nullopt}).adjacency;
  Tensor x = toy.leaf({9, d});
  GEncParams p{toy.leaf({d, d}), toy.leaf({d, d}), toy.leaf({d, d})};
  auto proj_nodes = toy.projector({10, d});
  auto proj_graph = toy.projector({1, d});
  auto run = [=] {
    PatchGraph g{adj, concat({x, Tensor::zeros({1, d})}, 0), 9};
    return genc_forward(g, p, 2);
  };
  return {{"genc_nodes_T2", {x, p.W_g, p.U_g1, p.U_g2}, [=] { return proj_nodes(run().node_embeddings); }},
          {"genc_graph_T2", {x, p.W_g, p.U_g1, p.U_g2}, [=] { return proj_graph(run().graph_embedding); }}};
}

// A positive projection keeps every score (and so every gate) above zero;
// with random signs the ReLU gates tend to zero whole layers.
HGEncLayerParams hgenc_layer(Toy& toy, std::size_t d) {
  return {toy.leaf({d, 2 * d}), toy.leaf({4 * d, 1}), toy.positive_leaf({2 * d, 1}),
          toy.leaf({2 * d, d}), toy.leaf({2 * d, d}), toy.leaf({2 * d, d})};
}

std::vector<Tensor> layer_tensors(const HGEncLayerParams& l) { return {l.W_conv, l.a_attn, l.p_vec, l.W_Q, l.W_K, l.W_V}; }

std::vector<Case> hgenc_cases(Toy& toy) {
  const std::size_t d = 4;
  const Adjacency grid = build_grid_adjacency(3, 3);
  auto grid_ptr = std::make_shared<Adjacency>(grid);
  std::vector<Case> cases;

  Tensor x = toy.leaf({9, d});
  HGEncLayerParams l0 = hgenc_layer(toy, d);
  auto p_conv = toy.projector({9, 2 * d});
  cases.push_back({"attention_conv", {x, l0.W_conv, l0.a_attn},
                   [=] { return p_conv(attention_conv(x, grid, l0)); }});

  Tensor z = toy.leaf({4, 2 * d});
  PooledGraph pooled{{0, 1, 3, 4}, grid.induced({0, 1, 3, 4}), z, Tensor()};
  auto p_att = toy.projector({4, d});
  cases.push_back({"pooled_self_attention", {z, l0.W_Q, l0.W_K, l0.W_V},
                   [=] { return p_att(pooled_self_attention(pooled, l0.W_Q, l0.W_K, l0.W_V)); }});

  Tensor h = toy.leaf({9, 2 * d});
  auto p_pool = toy.projector({7, 2 * d});
  cases.push_back({"score_pool_gate", {h, l0.p_vec}, [=] {
                     const Selection sel = score_and_select(h, l0.p_vec, 0.75);
                     return p_pool(pool_and_gate(h, grid, sel).features);
                   }});

  std::vector<HGEncLayerParams> layers = {l0, hgenc_layer(toy, d), hgenc_layer(toy, d)};
  std::vector<Tensor> inputs = {x};
  for (const auto& l : layers)
    for (const auto& t : layer_tensors(l)) inputs.push_back(t);
  auto p_out = toy.projector({1, d});
  cases.push_back({"hgenc_3_layers", inputs, [=] {
                     return p_out(hgenc_forward(PatchGraph{grid_ptr, x, std::nullopt}, layers, 0.75).graph_embedding);
                   }});
  return cases;
}

std::vector<Case> clique_cases(Toy& toy) {
  const std::size_t d = 3;
  const CliqueTree tree = decompose(build_grid_adjacency(3, 3));
  Tensor x = toy.leaf({9, d});
  Tensor w = toy.leaf({tree.max_clique_size() * d, d});
  auto p = toy.projector({tree.size(), d});
  return {{"clique_features", {x, w}, [=] { return p(clique_features(tree, x, w)); }}};
}

std::vector<Case> ctenc_cases(Toy& toy) {
  const std::size_t d = 3;
  const CliqueTree tree = decompose(build_grid_adjacency(3, 3));
  const TreeSchedule schedule = TreeSchedule::of(tree);
  Tensor x = toy.leaf({tree.size(), d});
  CTEncParams p;
  p.W_T1 = toy.leaf({d, d});
  p.W_T2 = toy.leaf({d, d});
  p.gru = {toy.leaf({d, d}), toy.leaf({d, d}), toy.leaf({1, d}), toy.leaf({d, d}),
           toy.leaf({d, d}), toy.leaf({1, d}), toy.leaf({d, d}), toy.leaf({d, d})};
  const std::vector<Tensor> inputs = {x,         p.W_T1,    p.W_T2,    p.gru.W_z, p.gru.U_z, p.gru.b_z,
                                      p.gru.W_r, p.gru.U_r, p.gru.b_r, p.gru.W,   p.gru.U};
  auto proj = toy.projector({tree.size(), d});
  std::vector<Case> cases;
  for (auto [name, timing] : {std::pair{"ctenc_mixed_T6", GateTiming::Mixed}, {"ctenc_strict_T6", GateTiming::Strict}})
    cases.push_back({name, inputs, [=] {
                       return proj(ctenc_forward(tree, schedule, x, p, 6, timing).supernode_embeddings);
                     }});

  Tensor xj = toy.leaf({1, d}), m1 = toy.leaf({1, d}), m2 = toy.leaf({1, d}), o1 = toy.leaf({1, d}),
         o2 = toy.leaf({1, d});
  auto pg = toy.projector({1, d});
  cases.push_back({"gru_gate", {xj, m1, m2, o1, o2, p.gru.W_z, p.gru.U_r, p.gru.U}, [=] {
                     return pg(gru_gate(xj, {m1, m2}, {o1, o2}, p.gru));
                   }});
  return cases;
}

std::vector<Case> model_cases(Toy& toy, std::uint64_t seed) {
  ModelConfig c;
  c.side = 96;
  c.patch = 32;
  c.d = 8;
  c.T = 2;
  c.n_classes = 4;
  auto model = std::make_shared<Model>(c);
  auto params = std::make_shared<ParamStore>(model->init_params(seed));
  const Tensor patches = toy.constant({c.n_patches(), c.patch_width()}, 0.5);
  std::vector<Tensor> inputs;
  for (const auto& e : params->entries()) {
    // Zero-initialised biases would leave the bias path barely exercised.
    auto v = e.second;
    for (double& x : v.mutable_data())
      if (x == 0.0) x = toy.constant({1}, 0.1).item();
    inputs.push_back(v);
  }
  return {{"emcnet_forward_96px", inputs, [=] { return cross_entropy(model->forward(*params, patches).q, 2); }}};
}

std::vector<Case> loss_cases(Toy& toy) {
  Tensor logits = toy.leaf({1, 10}, 2.0);
  return {{"cross_entropy_softmax", {logits}, [=] { return cross_entropy(softmax(logits, 1), 7); }}};
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> names = {"tensor", "embed", "genc", "hgenc",
                                                 "clique", "ctenc", "model", "loss"};
  return names;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const auto& names = gradcheck_components();
  if (!options.component.empty() && std::find(names.begin(), names.end(), options.component) == names.end())
    throw ConfigError("unknown gradcheck component '" + options.component + "'");

  struct FaultGuard {
    explicit FaultGuard(bool on) { debug::set_backward_fault(on); }
    ~FaultGuard() { debug::set_backward_fault(false); }
  } guard(options.inject_fault);

  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    if (!options.component.empty() && name != options.component) continue;
    Toy toy(Rng::derive(options.seed, "gradcheck/" + name));
    std::vector<Case> cases;
    if (name == "tensor") cases = tensor_cases(toy);
    else if (name == "embed") cases = embed_cases(toy);
    else if (name == "genc") cases = genc_cases(toy);
    else if (name == "hgenc") cases = hgenc_cases(toy);
    else if (name == "clique") cases = clique_cases(toy);
    else if (name == "ctenc") cases = ctenc_cases(toy);
    else if (name == "model") cases = model_cases(toy, options.seed);
    else cases = loss_cases(toy);

    for (const auto& c : cases) {
      const FiniteDifferenceResult fd = finite_difference_check(c.inputs, c.loss, options.step);
      GradcheckResult r{name, c.name, fd.entries, fd.max_rel_error, fd.max_rel_error <= options.tolerance};
      report.pass = report.pass && r.pass;
      report.results.push_back(std::move(r));
    }
  }
  return report;
}

std::vector<std::pair<std::string, double>> GradcheckReport::per_component() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& r : results) {
    if (out.empty() || out.back().first != r.component) out.emplace_back(r.component, 0.0);
    out.back().second = std::max(out.back().second, r.max_rel_error);
  }
  return out;
}

nlohmann::json GradcheckReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  j["components"] = nlohmann::json::object();
  for (const auto& [name, err] : per_component()) j["components"][name] = err;
  j["checks"] = nlohmann::json::array();
  for (const auto& r : results)
    j["checks"].push_back({{"component", r.component},
                           {"check", r.check},
                           {"entries", r.entries},
                           {"max_rel_error", r.max_rel_error},
                           {"pass", r.pass}});
  return j;
}

std::string GradcheckReport::text() const {
  std::ostringstream os;
  char line[160];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "  %-8s %-24s %7zu entries  max rel err %.3e  %s\n", r.component.c_str(),
                  r.check.c_str(), r.entries, r.max_rel_error, r.pass ? "ok" : "FAIL");
    os << line;
  }
  for (const auto& [name, err] : per_component()) {
    std::snprintf(line, sizeof line, "%-8s max rel err %.3e\n", name.c_str(), err);
    os << line;
  }
  std::snprintf(line, sizeof line, "gradcheck %s (tolerance %.0e)\n", pass ? "passed" : "FAILED", tolerance);
  os << line;
  return os.str();
}

}  // namespace emcnet
