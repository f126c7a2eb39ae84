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
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emcnet/dataset.hpp"
#include "emcnet/model.hpp"
#include "json.hpp"

namespace emcnet {

// -log(max(q[label], 1e-12)) for a 1 x C (or C) probability tensor.
Tensor cross_entropy(const Tensor& q, std::size_t label);

struct TrainConfig {
  std::size_t batch_size = 24;
  std::size_t epochs = 100;
  double lr = 5e-3;
  double momentum = 0.9;
  std::string optimizer = "sgd";  // "sgd" or "adam"
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 10;
  // Epochs without validation improvement before stopping: -1 follows
  // plateau_patience, 0 disables early stopping.
  long early_stop_patience = -1;
  std::size_t k_folds = 10;  // 1 trains once on the manifest's train/val split
  std::vector<std::uint64_t> seeds = {7};
  std::vector<std::size_t> topn = {1, 2, 3, 5};
  std::size_t jobs = 1;

  std::size_t effective_early_stop() const {
    return early_stop_patience < 0 ? plateau_patience : static_cast<std::size_t>(early_stop_patience);
  }
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Optimizers update every parameter in the store from its accumulated
// gradient and throw NumericError naming the first parameter whose
// gradient is not finite (before touching any value).
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParamStore& params, double lr) = 0;
};

// velocity = momentum * velocity + grad; param -= lr * velocity
class Sgd final : public Optimizer {
 public:
  explicit Sgd(double momentum = 0.9) : momentum_(momentum) {}
  void step(ParamStore& params, double lr) override;

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

class Adam final : public Optimizer {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params, double lr) override;

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

// Halves (by factor) the rate once the monitored metric has gone `patience`
// epochs without a strict improvement; the counter resets on improvement
// and after every reduction.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience) : lr_(lr), factor_(factor), patience_(patience) {}
  double step(double metric);
  double lr() const noexcept { return lr_; }

 private:
  double lr_, factor_;
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when this epoch is a new best (strict improvement).
  bool observe(double metric, std::size_t epoch);
  bool should_stop() const noexcept { return patience_ > 0 && bad_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t bad_ = 0;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

struct KFoldResult {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

// Stratified k-fold over `pool` (indices into `labels`). Classes with fewer
// than k members are dealt without stratification and reported in warnings.
KFoldResult kfold_splits(std::span<const std::size_t> labels, std::span<const std::size_t> pool, std::size_t k,
                         std::uint64_t seed);

struct ClassStats {
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
  std::optional<double> precision;  // empty when the class was never predicted and has no support
  std::optional<double> recall;     // empty when the class has no support
};

struct Metrics {
  std::size_t count = 0;
  double loss = 0.0;                    // mean cross-entropy
  std::map<std::size_t, double> topn;   // N (clamped to n_classes) -> accuracy
  std::vector<ClassStats> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double precision_macro = 0.0;
  double recall_macro = 0.0;

  nlohmann::json to_json(const std::vector<std::string>& class_names = {}) const;
};

// Metrics of probability rows against labels. Precision of a class with
// support but no predictions is 0; classes with neither are left out of
// the macro averages.
Metrics compute_metrics(const std::vector<std::vector<double>>& probabilities, std::span<const std::size_t> labels,
                        std::span<const std::size_t> topn);

// Tokenized samples of a dataset, loaded once.
struct SampleSet {
  std::vector<Tensor> patches;
  std::vector<std::size_t> labels;
};
SampleSet load_samples(const DatasetManifest& manifest, const Model& model, std::span<const std::size_t> entries);

struct Evaluation {
  Metrics metrics;
  std::vector<std::vector<double>> probabilities;
  std::vector<std::vector<HGEncLayerTrace>> pooling;  // filled when requested
};

Evaluation evaluate(const Model& model, const ParamStore& params, const SampleSet& samples,
                    std::span<const std::size_t> topn, bool keep_pooling = false);

struct EpochLog {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // running mean while the epoch trained
  double train_top1 = 0.0;  // after the epoch's last update
  double val_loss = 0.0;
  double val_top1 = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double final_lr = 0.0;
  std::vector<EpochLog> log;
  ParamStore params;  // restored best-epoch parameters
  Metrics train, val;
  std::optional<Metrics> test;
};

// One training run on fixed train/val sample sets.
RunResult train_run(const Model& model, const TrainConfig& config, const SampleSet& train, const SampleSet& val,
                    std::uint64_t seed, std::size_t fold = 0);

struct TrainingReport {
  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> classes;
  std::vector<RunResult> runs;
  std::vector<std::string> warnings;
  std::size_t selected_run = 0;  // run whose parameters are checkpointed

  nlohmann::json summary() const;
  std::string epochs_csv() const;
};

// Full protocol: k >= 2 holds out the test split and cross-validates on
// train + val; k == 1 uses the manifest's train/val split. Every seed runs
// every fold; runs execute on up to config.jobs threads.
TrainingReport run_training(const ModelConfig& model_config, const TrainConfig& config,
                            const DatasetManifest& manifest);

// Writes checkpoint.emcnet, metrics.csv, summary.json and config.json into dir.
void write_training_outputs(const TrainingReport& report, const std::filesystem::path& dir);

}  // namespace emcnet
