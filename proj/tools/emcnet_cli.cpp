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

// Command-line front end over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emcnet/emcnet.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

int exit_code(emcnet_status status) {
  switch (status) {
    case EMCNET_OK: return 0;
    case EMCNET_ERR_CONFIG:
    case EMCNET_ERR_MISMATCH:
    case EMCNET_ERR_INVALID_ARGUMENT: return kExitUsage;
    case EMCNET_ERR_NUMERIC: return kExitNumeric;
    default: return kExitFailure;
  }
}

int report(emcnet_status status) {
  if (status != EMCNET_OK) std::cerr << "error: " << emcnet_last_error() << "\n";
  return exit_code(status);
}

// Owns a string returned by the library.
struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { emcnet_free_string(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

std::optional<json> read_json_file(const std::string& path, std::string& error) {
  std::ifstream in(path);
  if (!in) {
    error = "cannot open config file " + path;
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    error = "config file " + path + " is not valid JSON: " + e.what();
    return std::nullopt;
  }
}

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void print_metrics(std::ostream& os, const json& metrics) {
  for (const auto& [n, acc] : metrics.at("topk").items())
    os << "top-" << n << ": " << format_fraction(acc.get<double>()) << "\n";
  os << "precision (macro): " << format_fraction(metrics.at("precision_macro").get<double>()) << "\n";
  os << "recall (macro): " << format_fraction(metrics.at("recall_macro").get<double>()) << "\n";
}

struct SynthArgs {
  std::size_t classes = 4, per_class = 25, side = 64;
  std::uint64_t seed = 7;
  double val_fraction = 0.1, test_fraction = 0.2;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  const json opts = {{"classes", a.classes},           {"per_class", a.per_class},
                     {"side", a.side},                 {"seed", a.seed},
                     {"val_fraction", a.val_fraction}, {"test_fraction", a.test_fraction}};
  OwnedString manifest;
  const emcnet_status st = emcnet_synth(opts.dump().c_str(), a.out.c_str(), &manifest.ptr);
  if (st == EMCNET_OK) std::cout << manifest.str() << "\n";
  return report(st);
}

struct TrainArgs {
  std::string manifest, out, config, setting, optimizer;
  std::optional<std::uint64_t> seed, root_seed;
  std::vector<std::uint64_t> seeds;
  std::optional<double> p_r, lr;
  std::optional<int> T;
  std::optional<std::size_t> d, batch, epochs, folds, patch, side, jobs, plateau_patience;
  std::optional<long> early_stop;
  bool no_genc = false, no_hgenc = false, no_ctenc = false, strict_tree_sync = false;
};

int cmd_train(const TrainArgs& a) {
  json req = {{"manifest", a.manifest}, {"out", a.out}};
  if (!a.config.empty()) {
    std::string error;
    const auto cfg = read_json_file(a.config, error);
    if (!cfg) {
      std::cerr << "error: " << error << "\n";
      return kExitUsage;
    }
    req["config"] = *cfg;
  }
  if (!a.setting.empty()) req["setting"] = a.setting;

  json model = json::object(), train = json::object();
  if (a.no_genc) model["use_genc"] = false;
  if (a.no_hgenc) model["use_hgenc"] = false;
  if (a.no_ctenc) model["use_ctenc"] = false;
  if (a.strict_tree_sync) model["tree_timing"] = "strict";
  if (a.p_r) model["p_r"] = *a.p_r;
  if (a.T) model["T"] = *a.T;
  if (a.d) model["d"] = *a.d;
  if (a.patch) model["patch"] = *a.patch;
  if (a.side) model["side"] = *a.side;
  if (a.root_seed) model["root_seed"] = *a.root_seed;
  if (a.batch) train["batch_size"] = *a.batch;
  if (a.lr) train["lr"] = *a.lr;
  if (a.epochs) train["epochs"] = *a.epochs;
  if (a.folds) train["k_folds"] = *a.folds;
  if (a.jobs) train["jobs"] = *a.jobs;
  if (a.early_stop) train["early_stop_patience"] = *a.early_stop;
  if (a.plateau_patience) train["plateau_patience"] = *a.plateau_patience;
  if (!a.optimizer.empty()) train["optimizer"] = a.optimizer;
  if (!a.seeds.empty()) train["seeds"] = a.seeds;
  else if (a.seed) train["seeds"] = {*a.seed};
  req["overrides"] = {{"model", model}, {"train", train}};

  OwnedString summary;
  const emcnet_status st = emcnet_train(req.dump().c_str(), &summary.ptr);
  if (st == EMCNET_OK) {
    const json s = json::parse(summary.str());
    std::cout << "wrote " << a.out << " (" << s.at("runs").size() << " run(s), metrics on "
              << s.at("evaluated_split").get<std::string>() << " split)\n";
    print_metrics(std::cout, s);
  }
  return report(st);
}

struct EvalArgs {
  std::string checkpoint, manifest, split = "test", config, dump_pooling;
  std::vector<std::size_t> topn = {1, 2, 3, 5};
};

int cmd_eval(const EvalArgs& a) {
  json req = {{"manifest", a.manifest}, {"split", a.split}, {"topn", a.topn}, {"dump_pooling", !a.dump_pooling.empty()}};
  if (!a.config.empty()) {
    std::string error;
    const auto cfg = read_json_file(a.config, error);
    if (!cfg) {
      std::cerr << "error: " << error << "\n";
      return kExitUsage;
    }
    req["config"] = *cfg;
  }
  emcnet_model* model = nullptr;
  emcnet_status st = emcnet_model_load(a.checkpoint.c_str(), &model);
  if (st != EMCNET_OK) return report(st);
  OwnedString result;
  st = emcnet_model_evaluate(model, req.dump().c_str(), &result.ptr);
  emcnet_model_free(model);
  if (st != EMCNET_OK) return report(st);

  json out = json::parse(result.str());
  if (!a.dump_pooling.empty()) {
    std::ofstream dump(a.dump_pooling);
    dump << out.at("pooling").dump(2) << "\n";
    if (!dump) {
      std::cerr << "error: cannot write " << a.dump_pooling << "\n";
      return kExitFailure;
    }
    out.erase("pooling");
  }
  print_metrics(std::cerr, out.at("metrics"));
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct DecomposeArgs {
  std::size_t rows = 0, cols = 0;
  bool verify = false;
  std::optional<std::uint64_t> root_seed;
};

int cmd_decompose(const DecomposeArgs& a) {
  const std::int64_t seed = a.root_seed ? static_cast<std::int64_t>(*a.root_seed & 0x7fffffffffffffffULL) : -1;
  OwnedString out;
  const emcnet_status st = emcnet_decompose(a.rows, a.cols, a.verify ? 1 : 0, seed, &out.ptr);
  if (st != EMCNET_OK) return report(st);
  const json j = json::parse(out.str());
  std::cout << j.dump() << "\n";
  if (a.verify) {
    if (j.at("rip").at("ok").get<bool>()) {
      std::cerr << "RIP: ok\n";
    } else {
      std::cerr << "RIP: violated: " << j.at("rip").at("message").get<std::string>() << "\n";
      return kExitFailure;
    }
  }
  return 0;
}

struct GradcheckArgs {
  std::string component;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  int passed = 0;
  OwnedString out;
  const emcnet_status st =
      emcnet_gradcheck(a.component.empty() ? nullptr : a.component.c_str(), a.inject_fault ? 1 : 0, &passed, &out.ptr);
  if (st != EMCNET_OK) return report(st);
  std::cout << json::parse(out.str()).at("text").get<std::string>();
  return passed ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMCNet: graph-based image classifier"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(emcnet_version()));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic texture dataset");
  s->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
  s->add_option("--per-class", synth.per_class, "Images per class")->capture_default_str();
  s->add_option("--side", synth.side, "Image side in pixels")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--val-fraction", synth.val_fraction, "Validation share per class")->capture_default_str();
  s->add_option("--test-fraction", synth.test_fraction, "Test share per class")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train on a dataset manifest");
  t->add_option("--manifest", train.manifest, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory (must not exist or be empty)")->required();
  t->add_option("--config", train.config, "JSON file {\"model\": {...}, \"train\": {...}}")->check(CLI::ExistingFile);
  t->add_option("--setting", train.setting, "Resolution preset")->check(CLI::IsMember({"default", "fs", "ss"}));
  t->add_option("--seed", train.seed, "Seed for initialisation, shuffling and folds");
  t->add_option("--seeds", train.seeds, "Several seeds, one run each")->delimiter(',');
  t->add_flag("--no-genc", train.no_genc, "Disable the graph encoder");
  t->add_flag("--no-hgenc", train.no_hgenc, "Disable the hierarchical encoder");
  t->add_flag("--no-ctenc", train.no_ctenc, "Disable the clique-tree encoder");
  t->add_flag("--strict-tree-sync", train.strict_tree_sync, "Tree gates read only previous-round messages");
  t->add_option("--p-r", train.p_r, "Pooling ratio in (0, 1]");
  t->add_option("--T", train.T, "Message-passing rounds");
  t->add_option("--d", train.d, "Embedding width");
  t->add_option("--patch", train.patch, "Patch side in pixels");
  t->add_option("--side", train.side, "Resized image side in pixels");
  t->add_option("--root-seed", train.root_seed, "Pick the clique-tree root leaf at random");
  t->add_option("--batch", train.batch, "Batch size");
  t->add_option("--lr", train.lr, "Initial learning rate");
  t->add_option("--epochs", train.epochs, "Maximum epochs");
  t->add_option("--folds", train.folds, "k for cross-validation (1 = manifest split)");
  t->add_option("--optimizer", train.optimizer, "Optimizer")->check(CLI::IsMember({"sgd", "adam"}));
  t->add_option("--jobs", train.jobs, "Parallel runs (capped by EMCNET_THREADS)");
  t->add_option("--early-stop", train.early_stop, "Early-stopping patience (-1 = scheduler patience, 0 = off)");
  t->add_option("--plateau-patience", train.plateau_patience, "Epochs without improvement before halving lr");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint.emcnet")->required()->check(CLI::ExistingFile);
  e->add_option("--manifest", eval.manifest, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  e->add_option("--split", eval.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  e->add_option("--topn", eval.topn, "Comma-separated N values")->delimiter(',');
  e->add_option("--config", eval.config, "Config file checked against the checkpoint")->check(CLI::ExistingFile);
  e->add_option("--dump-pooling", eval.dump_pooling, "Write kept node indices and scores per layer to this file");

  DecomposeArgs dec;
  auto* dc = app.add_subcommand("decompose", "Clique tree of a patch grid as JSON");
  dc->add_option("--rows", dec.rows, "Grid rows")->required()->check(CLI::PositiveNumber);
  dc->add_option("--cols", dec.cols, "Grid columns")->required()->check(CLI::PositiveNumber);
  dc->add_flag("--verify", dec.verify, "Check tree shape, coverage and running intersection");
  dc->add_option("--root-seed", dec.root_seed, "Pick the root leaf at random");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare tape gradients with finite differences");
  g->add_option("--component", gc.component, "Restrict to one component")
      ->check(CLI::IsMember({"tensor", "embed", "genc", "hgenc", "clique", "ctenc", "model", "loss"}));
  g->add_flag("--inject-fault", gc.inject_fault, "Corrupt one backward rule (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForVersion& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  if (s->parsed()) return cmd_synth(synth);
  if (t->parsed()) return cmd_train(train);
  if (e->parsed()) return cmd_eval(eval);
  if (dc->parsed()) return cmd_decompose(dec);
  return cmd_gradcheck(gc);
}
