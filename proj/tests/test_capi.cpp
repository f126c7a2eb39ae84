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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "emcnet/emcnet.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { emcnet_free_string(p); }
  json parse() const { return json::parse(p); }
};

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "emcnet_test_capi";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Synthesizes a small dataset and trains one tiny model once per process.
const fs::path& trained() {
  static const fs::path out = [] {
    Owned manifest;
    const json opts = {{"classes", 3}, {"per_class", 6}, {"side", 24}, {"seed", 3}};
    REQUIRE(emcnet_synth(opts.dump().c_str(), (workdir() / "data").c_str(), &manifest.p) == EMCNET_OK);
    const json req = {
        {"manifest", manifest.p},
        {"out", (workdir() / "run").string()},
        {"overrides",
         {{"model", {{"side", 24}, {"patch", 8}, {"d", 4}, {"T", 2}}},
          {"train", {{"epochs", 2}, {"k_folds", 1}, {"batch_size", 4}}}}}};
    Owned summary;
    REQUIRE(emcnet_train(req.dump().c_str(), &summary.p) == EMCNET_OK);
    return workdir() / "run";
  }();
  return out;
}

}  // namespace

TEST_CASE("c api basics") {
  CHECK(std::string(emcnet_version()).size() > 0);
  Owned out;
  CHECK(emcnet_decompose(3, 3, 1, -1, &out.p) == EMCNET_OK);
  const json j = out.parse();
  CHECK(j.at("supernodes").size() == 6);
  CHECK(j.at("edges").size() == 5);
  CHECK(j.at("rip").at("ok") == true);
  CHECK(std::string(emcnet_last_error()).empty());

  CHECK(emcnet_decompose(0, 3, 0, -1, &out.p) != EMCNET_OK);
  CHECK(std::string(emcnet_last_error()).size() > 0);
  CHECK(emcnet_decompose(3, 3, 0, -1, nullptr) == EMCNET_ERR_INVALID_ARGUMENT);

  Owned seeded;
  CHECK(emcnet_decompose(4, 4, 0, 42, &seeded.p) == EMCNET_OK);
  CHECK(seeded.parse().at("supernodes").size() == 11);
}

TEST_CASE("c api train, load, predict and evaluate") {
  const fs::path run = trained();
  CHECK(fs::exists(run / "checkpoint.emcnet"));
  CHECK(fs::exists(run / "metrics.csv"));
  CHECK(fs::exists(run / "summary.json"));
  CHECK(fs::exists(run / "config.json"));
  std::ifstream sfile(run / "summary.json");
  const json summary = json::parse(sfile);
  for (const char* k : {"1", "2", "3"}) CHECK(summary.at("topk").contains(k));

  emcnet_model* model = nullptr;
  REQUIRE(emcnet_model_load((run / "checkpoint.emcnet").c_str(), &model) == EMCNET_OK);
  Owned info;
  CHECK(emcnet_model_info(model, &info.p) == EMCNET_OK);
  CHECK(info.parse().at("model").at("d") == 4);
  CHECK(info.parse().at("classes").size() == 3);

  const fs::path manifest = workdir() / "data" / "manifest.json";
  std::ifstream mfile(manifest);
  const json m = json::parse(mfile);
  const std::string first = (workdir() / "data" / m.at("entries")[0].at("path").get<std::string>()).string();
  double probs[3];
  std::size_t n = 0, pred = 99;
  CHECK(emcnet_model_predict_file(model, first.c_str(), probs, 3, &n, &pred) == EMCNET_OK);
  CHECK(n == 3);
  CHECK(pred < 3);
  CHECK(std::abs(probs[0] + probs[1] + probs[2] - 1.0) <= 1e-12);
  CHECK(emcnet_model_predict_file(model, first.c_str(), probs, 2, &n, &pred) == EMCNET_ERR_INVALID_ARGUMENT);

  // Evaluating the train split reproduces the selected run's train Top-1.
  Owned ev;
  const json req = {{"manifest", manifest.string()}, {"split", "train"}, {"topn", {1, 2}}};
  REQUIRE(emcnet_model_evaluate(model, req.dump().c_str(), &ev.p) == EMCNET_OK);
  const json metrics = ev.parse().at("metrics");
  CHECK(metrics.at("topk").size() == 2);
  const std::size_t sel = summary.at("selected_run");
  CHECK(metrics.at("topk").at("1") == summary.at("runs")[sel].at("train").at("topk").at("1"));

  Owned pooled;
  const json preq = {{"manifest", manifest.string()}, {"split", "test"}, {"dump_pooling", true}};
  REQUIRE(emcnet_model_evaluate(model, preq.dump().c_str(), &pooled.p) == EMCNET_OK);
  CHECK(pooled.parse().at("pooling").size() > 0);

  Owned bad;
  const json wrong = {{"manifest", manifest.string()}, {"config", {{"model", {{"n_classes", 5}}}}}};
  CHECK(emcnet_model_evaluate(model, wrong.dump().c_str(), &bad.p) == EMCNET_ERR_MISMATCH);
  CHECK(std::string(emcnet_last_error()).find("n_classes") != std::string::npos);
  emcnet_model_free(model);
}

TEST_CASE("c api error mapping") {
  const fs::path run = trained();
  Owned out;
  // Output directory already holds a run.
  const json again = {{"manifest", (workdir() / "data" / "manifest.json").string()}, {"out", run.string()}};
  CHECK(emcnet_train(again.dump().c_str(), &out.p) == EMCNET_ERR_CONFIG);
  CHECK(emcnet_train("{not json", &out.p) == EMCNET_ERR_CONFIG);
  const json badcfg = {{"manifest", (workdir() / "data" / "manifest.json").string()},
                       {"out", (workdir() / "never").string()},
                       {"overrides", {{"model", {{"p_r", 2.0}}}}}};
  CHECK(emcnet_train(badcfg.dump().c_str(), &out.p) == EMCNET_ERR_CONFIG);
  CHECK_FALSE(fs::exists(workdir() / "never"));

  emcnet_model* model = nullptr;
  CHECK(emcnet_model_load((workdir() / "missing.emcnet").c_str(), &model) == EMCNET_ERR_IO);
  const fs::path junk = workdir() / "junk.emcnet";
  std::ofstream(junk) << "garbage";
  CHECK(emcnet_model_load(junk.c_str(), &model) == EMCNET_ERR_FORMAT);
  CHECK(model == nullptr);

  int passed = 0;
  Owned report;
  CHECK(emcnet_gradcheck("nope", 0, &passed, &report.p) == EMCNET_ERR_CONFIG);
  Owned gc;
  REQUIRE(emcnet_gradcheck("loss", 0, &passed, &gc.p) == EMCNET_OK);
  CHECK(passed == 1);
  const json g = gc.parse();
  CHECK(g.at("checks").size() > 0);
  for (const auto& r : g.at("checks")) CHECK(r.at("component") == "loss");
}
