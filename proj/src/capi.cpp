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

#include "emcnet/emcnet.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "emcnet/dataset.hpp"
#include "emcnet/errors.hpp"
#include "emcnet/gradcheck.hpp"
#include "emcnet/model.hpp"
#include "emcnet/training.hpp"
#include "emcnet/treedecomp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

struct emcnet_model {
  emcnet::LoadedModel loaded;
};

namespace {

thread_local std::string g_last_error;

emcnet_status fail(emcnet_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
emcnet_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return EMCNET_OK;
  } catch (const emcnet::MismatchError& e) {
    return fail(EMCNET_ERR_MISMATCH, std::string(e.what()) + " [field: " + e.field() + "]");
  } catch (const emcnet::ConfigError& e) {
    return fail(EMCNET_ERR_CONFIG, e.what());
  } catch (const emcnet::NumericError& e) {
    return fail(EMCNET_ERR_NUMERIC, e.what());
  } catch (const emcnet::IoError& e) {
    return fail(EMCNET_ERR_IO, e.what());
  } catch (const emcnet::FormatError& e) {
    return fail(EMCNET_ERR_FORMAT, e.what());
  } catch (const emcnet::DimensionError& e) {
    return fail(EMCNET_ERR_INVALID_ARGUMENT, e.what());
  } catch (const emcnet::IndexError& e) {
    return fail(EMCNET_ERR_INVALID_ARGUMENT, e.what());
  } catch (const emcnet::EmptyInputError& e) {
    return fail(EMCNET_ERR_INVALID_ARGUMENT, e.what());
  } catch (const emcnet::TokenizationError& e) {
    return fail(EMCNET_ERR_INVALID_ARGUMENT, e.what());
  } catch (const emcnet::Error& e) {
    return fail(EMCNET_ERR_INTERNAL, e.what());
  } catch (const json::exception& e) {
    return fail(EMCNET_ERR_CONFIG, std::string("invalid JSON request: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(EMCNET_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(EMCNET_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EMCNET_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EMCNET_ERR_INTERNAL, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool condition, const char* what) {
  if (!condition) throw emcnet::DimensionError(std::string("invalid argument: ") + what);
}

json parse_request(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw emcnet::ConfigError("request must be a JSON object");
  return j;
}

// Directory the caller asked for, with any trailing separator dropped.
fs::path target_dir(const std::string& out) {
  fs::path p = fs::path(out).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  if (p.empty()) throw emcnet::ConfigError("output directory is empty");
  if (fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)))
    throw emcnet::ConfigError("output directory " + p.string() + " already exists and is not empty");
  return p;
}

// Builds into a sibling staging directory and renames it into place.
template <typename F>
void staged_write(const fs::path& target, F&& write) {
  const fs::path staging = target.parent_path() / ("." + target.filename().string() + ".staging");
  fs::remove_all(staging);
  try {
    write(staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  if (fs::exists(target)) fs::remove(target);
  fs::rename(staging, target);
}

std::size_t threads_cap() {
  const char* env = std::getenv("EMCNET_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw emcnet::ConfigError(std::string("EMCNET_THREADS must be a positive integer, got '") + env + "'");
  return v;
}

}  // namespace

extern "C" {

const char* emcnet_version(void) { return "0.1.0"; }

const char* emcnet_last_error(void) { return g_last_error.c_str(); }

void emcnet_free_string(char* s) { std::free(s); }

emcnet_status emcnet_synth(const char* options_json, const char* out_dir, char** manifest_path) {
  return guarded([&] {
    require(out_dir && *out_dir, "out_dir");
    const json j = parse_request(options_json);
    emcnet::SynthOptions o;
    o.n_classes = j.value("classes", o.n_classes);
    o.per_class = j.value("per_class", o.per_class);
    o.side = j.value("side", o.side);
    o.seed = j.value("seed", o.seed);
    o.val_fraction = j.value("val_fraction", o.val_fraction);
    o.test_fraction = j.value("test_fraction", o.test_fraction);
    const fs::path target = target_dir(out_dir);
    staged_write(target, [&](const fs::path& dir) { emcnet::generate_synthetic_dataset(o, dir); });
    if (manifest_path) *manifest_path = dup_string((target / "manifest.json").string());
  });
}

emcnet_status emcnet_decompose(size_t rows, size_t cols, int verify, int64_t root_seed, char** out) {
  return guarded([&] {
    require(out != nullptr, "json out-parameter");
    require(rows > 0 && cols > 0, "grid dimensions must be positive");
    const emcnet::Adjacency grid = emcnet::build_grid_adjacency(rows, cols);
    std::optional<std::uint64_t> seed;
    if (root_seed >= 0) seed = static_cast<std::uint64_t>(root_seed);
    const emcnet::CliqueTree tree =
        emcnet::build_clique_tree(emcnet::triangulate_min_degree(grid), seed);
    json j = emcnet::clique_tree_to_json(tree);
    if (verify) {
      const emcnet::RipReport rip = emcnet::verify_rip(tree, grid);
      j["rip"] = {{"ok", rip.ok}, {"message", rip.message}};
    }
    *out = dup_string(j.dump());
  });
}

emcnet_status emcnet_train(const char* request_json, char** summary_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    if (!req.contains("manifest")) throw emcnet::ConfigError("train request needs 'manifest'");
    if (!req.contains("out")) throw emcnet::ConfigError("train request needs 'out'");
    const json config = req.value("config", json::object());
    const json overrides = req.value("overrides", json::object());
    for (const auto* part : {&config, &overrides})
      for (const auto& [key, value] : part->items())
        if (key != "model" && key != "train") throw emcnet::ConfigError("config: unknown section '" + key + "'");

    const emcnet::DatasetManifest manifest = emcnet::load_manifest(req.at("manifest").get<std::string>());

    // Layering: config file, then resolution preset, then explicit overrides.
    json model_json = config.value("model", json::object());
    if (!model_json.contains("n_classes")) model_json["n_classes"] = manifest.classes.size();
    if (req.contains("setting")) {
      emcnet::ModelConfig m = emcnet::ModelConfig::from_json(model_json);
      emcnet::apply_resolution_setting(m, req.at("setting").get<std::string>());
      model_json = m.to_json();
    }
    model_json.update(overrides.value("model", json::object()));
    json train_json = config.value("train", json::object());
    train_json.update(overrides.value("train", json::object()));

    const emcnet::ModelConfig model_config = emcnet::ModelConfig::from_json(model_json);
    emcnet::TrainConfig train_config = emcnet::TrainConfig::from_json(train_json);
    model_config.validate();
    train_config.validate();
    if (const std::size_t cap = threads_cap()) train_config.jobs = std::min(train_config.jobs, cap);

    const fs::path target = target_dir(req.at("out").get<std::string>());
    const emcnet::TrainingReport report = emcnet::run_training(model_config, train_config, manifest);
    staged_write(target, [&](const fs::path& dir) { emcnet::write_training_outputs(report, dir); });
    if (summary_json) *summary_json = dup_string(report.summary().dump(2));
  });
}

emcnet_status emcnet_model_load(const char* checkpoint_path, emcnet_model** model) {
  return guarded([&] {
    require(checkpoint_path && model, "checkpoint path and model out-parameter");
    *model = nullptr;
    auto m = std::make_unique<emcnet_model>();
    m->loaded = emcnet::load_model(checkpoint_path);
    *model = m.release();
  });
}

void emcnet_model_free(emcnet_model* model) { delete model; }

emcnet_status emcnet_model_info(const emcnet_model* model, char** out) {
  return guarded([&] {
    require(model && out, "model and json out-parameter");
    json j = model->loaded.meta;
    j["n_params"] = model->loaded.params.total_values();
    *out = dup_string(j.dump());
  });
}

emcnet_status emcnet_model_predict_file(const emcnet_model* model, const char* image_path, double* probs,
                                        size_t capacity, size_t* n_classes, size_t* predicted) {
  return guarded([&] {
    require(model && image_path && n_classes, "model, image path and n_classes out-parameter");
    const auto& m = *model->loaded.model;
    const emcnet::ForwardResult r = m.forward(model->loaded.params, emcnet::load_image(image_path));
    const auto q = r.q.data();
    *n_classes = q.size();
    if (probs) {
      if (capacity < q.size())
        throw emcnet::DimensionError("probs holds " + std::to_string(capacity) + " values, model has " +
                                      std::to_string(q.size()) + " classes");
      std::copy(q.begin(), q.end(), probs);
    }
    if (predicted) *predicted = emcnet::predict(q);
  });
}

emcnet_status emcnet_model_evaluate(const emcnet_model* model, const char* request_json, char** result_json) {
  return guarded([&] {
    require(model && result_json, "model and result out-parameter");
    const json req = parse_request(request_json);
    if (!req.contains("manifest")) throw emcnet::ConfigError("evaluate request needs 'manifest'");
    const auto& loaded = model->loaded;
    const emcnet::Model& m = *loaded.model;

    if (req.contains("config")) {
      json model_json = req.at("config").value("model", json::object());
      const json stored = loaded.meta.at("model");
      for (const auto& [key, value] : stored.items())
        if (!model_json.contains(key)) model_json[key] = value;
      emcnet::check_compatible(loaded.meta, emcnet::ModelConfig::from_json(model_json));
    }

    const emcnet::DatasetManifest manifest = emcnet::load_manifest(req.at("manifest").get<std::string>());
    manifest.validate();
    if (manifest.classes.size() != m.config().n_classes)
      throw emcnet::MismatchError("n_classes", "manifest has " + std::to_string(manifest.classes.size()) +
                                                   " classes, checkpoint expects " +
                                                   std::to_string(m.config().n_classes));
    const std::string split = req.value("split", std::string("test"));
    std::vector<std::size_t> entries;
    if (split == "all") {
      for (std::size_t e = 0; e < manifest.entries.size(); ++e) entries.push_back(e);
    } else {
      entries = manifest.split(split);
    }
    const std::vector<std::size_t> topn = req.value("topn", std::vector<std::size_t>{1, 2, 3, 5});
    if (topn.empty()) throw emcnet::ConfigError("topn must not be empty");
    const bool dump = req.value("dump_pooling", false);

    const emcnet::SampleSet samples = emcnet::load_samples(manifest, m, entries);
    const emcnet::Evaluation ev = emcnet::evaluate(m, loaded.params, samples, topn, dump);
    json out;
    out["split"] = split;
    out["metrics"] = ev.metrics.to_json(manifest.classes);
    if (dump) {
      out["pooling"] = json::array();
      for (std::size_t s = 0; s < entries.size(); ++s) {
        json layers = json::array();
        for (const auto& layer : ev.pooling[s]) layers.push_back({{"idx", layer.idx}, {"scores", layer.scores}});
        out["pooling"].push_back({{"entry", entries[s]}, {"path", manifest.entries[entries[s]].path}, {"layers", layers}});
      }
    }
    *result_json = dup_string(out.dump());
  });
}

emcnet_status emcnet_gradcheck(const char* component, int inject_fault, int* passed, char** report_json) {
  return guarded([&] {
    emcnet::GradcheckOptions o;
    if (component) o.component = component;
    o.inject_fault = inject_fault != 0;
    const emcnet::GradcheckReport report = emcnet::run_gradcheck(o);
    if (passed) *passed = report.pass ? 1 : 0;
    if (report_json) {
      json j = report.to_json();
      j["text"] = report.text();
      *report_json = dup_string(j.dump());
    }
  });
}

}  // extern "C"
