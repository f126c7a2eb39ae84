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

#include "emcnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "emcnet/errors.hpp"
#include "emcnet/rng.hpp"

namespace emcnet {

Tensor cross_entropy(const Tensor& q, std::size_t label) {
  const auto p = q.data();
  if (label >= p.size())
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(p.size()) + " classes");
  constexpr double kFloor = 1e-12;
  const double ql = p[label];
  const double loss = -std::log(std::max(ql, kFloor));
  return record_op("cross_entropy", {}, {loss}, {q},
                   [label, ql](std::span<const double> g, std::span<double* const> gin) {
                     if (gin[0] && ql > kFloor) gin[0][label] -= g[0] / ql;
                   });
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::set<std::string> kTrainKeys = {"batch_size", "epochs",           "lr",       "momentum",
                                          "optimizer",  "plateau_factor",   "plateau_patience",
                                          "early_stop_patience", "k_folds", "seeds",    "topn", "jobs"};

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("train config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("train config: " + field + " " + why);
  };
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (epochs == 0) fail("epochs", "must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (optimizer != "sgd" && optimizer != "adam") fail("optimizer", "must be 'sgd' or 'adam'");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor", "must lie in (0, 1)");
  if (plateau_patience == 0) fail("plateau_patience", "must be >= 1");
  if (early_stop_patience < -1) fail("early_stop_patience", "must be -1, 0 or positive");
  if (k_folds == 0) fail("k_folds", "must be >= 1");
  if (seeds.empty()) fail("seeds", "must not be empty");
  if (topn.empty()) fail("topn", "must not be empty");
  for (std::size_t n : topn)
    if (n == 0) fail("topn", "entries must be >= 1");
  if (jobs == 0) fail("jobs", "must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"lr", lr},
          {"momentum", momentum},
          {"optimizer", optimizer},
          {"plateau_factor", plateau_factor},
          {"plateau_patience", plateau_patience},
          {"early_stop_patience", early_stop_patience},
          {"k_folds", k_folds},
          {"seeds", seeds},
          {"topn", topn},
          {"jobs", jobs}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kTrainKeys.count(key)) throw ConfigError("train config: unknown field '" + key + "'");
  TrainConfig c;
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "epochs", c.epochs);
  read_field(j, "lr", c.lr);
  read_field(j, "momentum", c.momentum);
  read_field(j, "optimizer", c.optimizer);
  read_field(j, "plateau_factor", c.plateau_factor);
  read_field(j, "plateau_patience", c.plateau_patience);
  read_field(j, "early_stop_patience", c.early_stop_patience);
  read_field(j, "k_folds", c.k_folds);
  read_field(j, "seeds", c.seeds);
  read_field(j, "topn", c.topn);
  read_field(j, "jobs", c.jobs);
  return c;
}

// ---------------------------------------------------------------------------
// Optimizers

namespace {

void check_gradients(const ParamStore& params) {
  for (const auto& [name, t] : params.entries())
    for (double g : t.grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
}

void ensure_slots(std::vector<std::vector<double>>& slots, const ParamStore& params) {
  if (!slots.empty()) return;
  for (const auto& e : params.entries()) slots.emplace_back(e.second.numel(), 0.0);
}

}  // namespace

void Sgd::step(ParamStore& params, double lr) {
  check_gradients(params);
  ensure_slots(velocity_, params);
  auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto w = entries[i].second.mutable_data();
    const auto g = entries[i].second.grad();
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = momentum_ * v[k] + g[k];
      w[k] -= lr * v[k];
    }
  }
}

void Adam::step(ParamStore& params, double lr) {
  check_gradients(params);
  ensure_slots(m_, params);
  ensure_slots(v_, params);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto w = entries[i].second.mutable_data();
    const auto g = entries[i].second.grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + eps_);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  if (config.optimizer == "adam") return std::make_unique<Adam>();
  return std::make_unique<Sgd>(config.momentum);
}

double PlateauScheduler::step(double metric) {
  if (metric > best_) {
    best_ = metric;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ *= factor_;
    bad_ = 0;
  }
  return lr_;
}

bool EarlyStopping::observe(double metric, std::size_t epoch) {
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch;
    bad_ = 0;
    return true;
  }
  ++bad_;
  return false;
}

// ---------------------------------------------------------------------------
// Folds

KFoldResult kfold_splits(std::span<const std::size_t> labels, std::span<const std::size_t> pool, std::size_t k,
                         std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_splits: k must be >= 2, got " + std::to_string(k));
  if (pool.size() < k)
    throw ConfigError("kfold_splits: " + std::to_string(pool.size()) + " samples cannot fill " + std::to_string(k) +
                      " folds");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i : pool) {
    if (i >= labels.size()) throw IndexError("kfold_splits: sample index " + std::to_string(i) + " out of range");
    by_class[labels[i]].push_back(i);
  }

  KFoldResult out;
  Rng rng(Rng::derive(seed, "folds"));
  std::vector<std::vector<std::size_t>> members(k);
  std::vector<std::size_t> leftovers;
  std::size_t offset = 0;
  for (auto& [label, items] : by_class) {
    rng.shuffle(items);
    if (items.size() < k) {
      out.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(items.size()) +
                             " samples for " + std::to_string(k) + " folds; dealt without stratification");
      leftovers.insert(leftovers.end(), items.begin(), items.end());
      continue;
    }
    for (std::size_t j = 0; j < items.size(); ++j) members[(offset + j) % k].push_back(items[j]);
    offset += items.size();
  }
  rng.shuffle(leftovers);
  for (std::size_t j = 0; j < leftovers.size(); ++j) members[(offset + j) % k].push_back(leftovers[j]);

  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.val = members[f];
    std::sort(fold.val.begin(), fold.val.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) fold.train.insert(fold.train.end(), members[g].begin(), members[g].end());
    std::sort(fold.train.begin(), fold.train.end());
    out.folds.push_back(std::move(fold));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

Metrics compute_metrics(const std::vector<std::vector<double>>& probabilities, std::span<const std::size_t> labels,
                        std::span<const std::size_t> topn) {
  if (probabilities.empty()) throw EmptyInputError("compute_metrics: no samples");
  if (probabilities.size() != labels.size())
    throw DimensionError("compute_metrics: " + std::to_string(probabilities.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t c = probabilities.front().size();
  Metrics m;
  m.count = labels.size();
  m.per_class.resize(c);
  m.confusion.assign(c, std::vector<std::size_t>(c, 0));
  std::map<std::size_t, std::size_t> hits;
  for (std::size_t n : topn) hits[std::min(n, c)] = 0;

  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto& q = probabilities[s];
    const std::size_t y = labels[s];
    if (q.size() != c || y >= c) throw DimensionError("compute_metrics: inconsistent class count");
    // Rank of the true class under the argmax tie rule (lower index first).
    std::size_t rank = 0;
    for (std::size_t k = 0; k < c; ++k)
      if (q[k] > q[y] || (q[k] == q[y] && k < y)) ++rank;
    for (auto& [n, h] : hits) h += rank < n ? 1 : 0;
    const std::size_t pred = predict(q);
    ++m.confusion[y][pred];
    ++m.per_class[y].support;
    ++m.per_class[pred].predicted;
    if (pred == y) ++m.per_class[y].correct;
    m.loss -= std::log(std::max(q[y], 1e-12));
  }
  m.loss /= static_cast<double>(m.count);
  for (const auto& [n, h] : hits) m.topn[n] = static_cast<double>(h) / static_cast<double>(m.count);

  double p_sum = 0.0, r_sum = 0.0;
  std::size_t p_n = 0, r_n = 0;
  for (auto& cls : m.per_class) {
    if (cls.support > 0 || cls.predicted > 0) {
      cls.precision = cls.predicted > 0 ? static_cast<double>(cls.correct) / static_cast<double>(cls.predicted) : 0.0;
      p_sum += *cls.precision;
      ++p_n;
    }
    if (cls.support > 0) {
      cls.recall = static_cast<double>(cls.correct) / static_cast<double>(cls.support);
      r_sum += *cls.recall;
      ++r_n;
    }
  }
  m.precision_macro = p_n ? p_sum / static_cast<double>(p_n) : 0.0;
  m.recall_macro = r_n ? r_sum / static_cast<double>(r_n) : 0.0;
  return m;
}

namespace {

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : std::to_string(c);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json Metrics::to_json(const std::vector<std::string>& class_names) const {
  nlohmann::json j;
  j["count"] = count;
  j["loss"] = loss;
  j["topk"] = nlohmann::json::object();
  for (const auto& [n, acc] : topn) j["topk"][std::to_string(n)] = acc;
  j["precision_macro"] = precision_macro;
  j["recall_macro"] = recall_macro;
  j["per_class"] = nlohmann::json::object();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& s = per_class[c];
    j["per_class"][class_name(class_names, c)] = {{"precision", optional_json(s.precision)},
                                                  {"recall", optional_json(s.recall)},
                                                  {"support", s.support}};
  }
  j["confusion"] = confusion;
  return j;
}

// ---------------------------------------------------------------------------
// Samples and evaluation

SampleSet load_samples(const DatasetManifest& manifest, const Model& model, std::span<const std::size_t> entries) {
  SampleSet s;
  for (std::size_t e : entries) {
    s.patches.push_back(model.tokenize(load_image(manifest.resolve(e))));
    s.labels.push_back(manifest.entries.at(e).label);
  }
  return s;
}

Evaluation evaluate(const Model& model, const ParamStore& params, const SampleSet& samples,
                    std::span<const std::size_t> topn, bool keep_pooling) {
  if (samples.patches.empty()) throw EmptyInputError("evaluate: empty split");
  Evaluation ev;
  for (const auto& x : samples.patches) {
    ForwardResult r = model.forward(params, x);
    ev.probabilities.push_back(r.q.to_vector());
    if (keep_pooling) ev.pooling.push_back(std::move(r.pooling));
  }
  ev.metrics = compute_metrics(ev.probabilities, samples.labels, topn);
  return ev;
}

// ---------------------------------------------------------------------------
// Training

namespace {

SampleSet subset(const SampleSet& all, std::span<const std::size_t> rows) {
  SampleSet s;
  for (std::size_t r : rows) {
    s.patches.push_back(all.patches.at(r));
    s.labels.push_back(all.labels.at(r));
  }
  return s;
}

double top1(const Metrics& m) { return m.topn.at(1); }

// The requested N values plus N = 1, which model selection relies on.
std::vector<std::size_t> with_top1(std::vector<std::size_t> topn) {
  if (std::find(topn.begin(), topn.end(), 1) == topn.end()) topn.insert(topn.begin(), 1);
  return topn;
}

}  // namespace

RunResult train_run(const Model& model, const TrainConfig& config, const SampleSet& train, const SampleSet& val,
                    std::uint64_t seed, std::size_t fold) {
  config.validate();
  if (train.patches.empty()) throw EmptyInputError("train_run: empty training split");
  const std::vector<std::size_t> top1_only{1};
  const std::vector<std::size_t> topn = with_top1(config.topn);
  const bool has_val = !val.patches.empty();

  RunResult res;
  res.seed = seed;
  res.fold = fold;
  ParamStore params = model.init_params(seed);
  ParamStore best = params.deep_copy();
  auto optimizer = make_optimizer(config);
  PlateauScheduler scheduler(config.lr, config.plateau_factor, config.plateau_patience);
  EarlyStopping stopper(config.effective_early_stop());

  std::vector<std::size_t> order(train.patches.size());
  std::iota(order.begin(), order.end(), 0);
  const std::uint64_t shuffle_seed = Rng::derive(seed, "shuffle/" + std::to_string(fold));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log;
    log.seed = seed;
    log.fold = fold;
    log.epoch = epoch;
    log.lr = scheduler.lr();

    Rng rng(Rng::derive(shuffle_seed, "epoch", epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        Tape tape;
        TapeScope scope(tape);
        const ForwardResult r = model.forward(params, train.patches[i]);
        const Tensor loss = cross_entropy(r.q, train.labels[i]);
        if (!std::isfinite(loss.item()))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += loss.item();
        tape.backward(affine(loss, scale));
      }
      optimizer->step(params, log.lr);
    }
    log.train_loss = loss_sum / static_cast<double>(order.size());

    const Metrics tr = evaluate(model, params, train, top1_only).metrics;
    log.train_top1 = top1(tr);
    double monitor = log.train_top1;
    if (has_val) {
      const Metrics va = evaluate(model, params, val, top1_only).metrics;
      log.val_loss = va.loss;
      log.val_top1 = top1(va);
      monitor = log.val_top1;
    }
    if (stopper.observe(monitor, epoch)) best = params.deep_copy();
    scheduler.step(monitor);
    res.log.push_back(log);
    res.epochs_run = epoch;
    if (stopper.should_stop()) break;
  }

  res.best_epoch = stopper.best_epoch();
  res.final_lr = scheduler.lr();
  params.assign_values(best);
  res.params = std::move(params);
  res.train = evaluate(model, res.params, train, topn).metrics;
  if (has_val) res.val = evaluate(model, res.params, val, topn).metrics;
  return res;
}

TrainingReport run_training(const ModelConfig& model_config, const TrainConfig& config,
                            const DatasetManifest& manifest) {
  model_config.validate();
  config.validate();
  manifest.validate();
  if (model_config.n_classes != manifest.classes.size())
    throw MismatchError("n_classes", "model config has " + std::to_string(model_config.n_classes) +
                                         " classes but the manifest lists " +
                                         std::to_string(manifest.classes.size()));

  TrainingReport report;
  report.model = model_config;
  report.train = config;
  report.classes = manifest.classes;
  const Model model(model_config);

  std::vector<std::size_t> labels(manifest.entries.size());
  for (std::size_t e = 0; e < labels.size(); ++e) labels[e] = manifest.entries[e].label;

  std::vector<Fold> folds;
  if (config.k_folds >= 2) {
    std::vector<std::size_t> pool = manifest.train;
    pool.insert(pool.end(), manifest.val.begin(), manifest.val.end());
    std::sort(pool.begin(), pool.end());
    KFoldResult kf = kfold_splits(labels, pool, config.k_folds, Rng::derive(config.seeds.front(), "kfold"));
    folds = std::move(kf.folds);
    report.warnings = std::move(kf.warnings);
  } else {
    folds.push_back({manifest.train, manifest.val});
  }

  // Every entry is tokenized once; per-run sets share the patch tensors.
  std::vector<std::size_t> all(manifest.entries.size());
  std::iota(all.begin(), all.end(), 0);
  const SampleSet samples = load_samples(manifest, model, all);
  const SampleSet test = subset(samples, manifest.test);

  struct Task {
    std::uint64_t seed;
    std::size_t fold;
  };
  std::vector<Task> tasks;
  for (std::uint64_t seed : config.seeds)
    for (std::size_t f = 0; f < folds.size(); ++f) tasks.push_back({seed, f});

  report.runs.resize(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const Fold& fold = folds[tasks[t].fold];
        RunResult r = train_run(model, config, subset(samples, fold.train), subset(samples, fold.val),
                                tasks[t].seed, tasks[t].fold);
        if (!test.patches.empty()) r.test = evaluate(model, r.params, test, with_top1(config.topn)).metrics;
        report.runs[t] = std::move(r);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.jobs, tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Checkpoint the run with the best validation Top-1 (earliest on ties).
  double best = -1.0;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    const double score = r.val.count ? top1(r.val) : top1(r.train);
    if (score > best) {
      best = score;
      report.selected_run = i;
    }
  }
  return report;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json TrainingReport::summary() const {
  const bool on_test = !runs.empty() && std::all_of(runs.begin(), runs.end(), [](const RunResult& r) {
    return r.test.has_value();
  });
  auto reported = [&](const RunResult& r) -> const Metrics& { return on_test ? *r.test : (r.val.count ? r.val : r.train); };

  nlohmann::json j;
  j["evaluated_split"] = on_test ? "test" : (runs.front().val.count ? "val" : "train");
  j["ablation"] = {{"use_genc", model.use_genc}, {"use_hgenc", model.use_hgenc}, {"use_ctenc", model.use_ctenc}};

  j["topk"] = nlohmann::json::object();
  j["topk_std"] = nlohmann::json::object();
  for (const auto& [n, unused] : reported(runs.front()).topn) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(reported(r).topn.at(n));
    const MeanStd ms = mean_std(v);
    j["topk"][std::to_string(n)] = ms.mean;
    j["topk_std"][std::to_string(n)] = ms.std;
  }
  std::vector<double> prec, rec;
  for (const auto& r : runs) {
    prec.push_back(reported(r).precision_macro);
    rec.push_back(reported(r).recall_macro);
  }
  j["precision_macro"] = mean_std(prec).mean;
  j["precision_macro_std"] = mean_std(prec).std;
  j["recall_macro"] = mean_std(rec).mean;
  j["recall_macro_std"] = mean_std(rec).std;

  j["per_class"] = nlohmann::json::object();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<double> p, q;
    for (const auto& r : runs) {
      const auto& s = reported(r).per_class.at(c);
      if (s.precision) p.push_back(*s.precision);
      if (s.recall) q.push_back(*s.recall);
    }
    j["per_class"][classes[c]] = {{"precision", p.empty() ? nlohmann::json(nullptr) : nlohmann::json(mean_std(p).mean)},
                                  {"recall", q.empty() ? nlohmann::json(nullptr) : nlohmann::json(mean_std(q).mean)}};
  }

  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json run = {{"seed", r.seed},
                          {"fold", r.fold},
                          {"best_epoch", r.best_epoch},
                          {"epochs_run", r.epochs_run},
                          {"final_lr", r.final_lr},
                          {"train", r.train.to_json(classes)}};
    if (r.val.count) run["val"] = r.val.to_json(classes);
    if (r.test) run["test"] = r.test->to_json(classes);
    j["runs"].push_back(std::move(run));
  }
  j["selected_run"] = selected_run;
  j["warnings"] = warnings;
  j["config"] = {{"model", model.to_json()}, {"train", train.to_json()}};
  return j;
}

std::string TrainingReport::epochs_csv() const {
  std::ostringstream os;
  os << "seed,fold,epoch,lr,train_loss,train_top1,val_loss,val_top1\n";
  for (const auto& r : runs)
    for (const auto& e : r.log)
      os << e.seed << ',' << e.fold << ',' << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.train_loss) << ','
         << fmt(e.train_top1) << ',' << fmt(e.val_loss) << ',' << fmt(e.val_top1) << '\n';
  return os.str();
}

void write_training_outputs(const TrainingReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    os << text;
    if (!os) throw IoError("cannot write " + (dir / name).string());
  };
  const Model model(report.model);
  nlohmann::json meta = model.checkpoint_meta();
  meta["classes"] = report.classes;
  save_checkpoint(dir / "checkpoint.emcnet", report.runs.at(report.selected_run).params, meta);
  write("metrics.csv", report.epochs_csv());
  write("summary.json", report.summary().dump(2) + "\n");
  write("config.json", nlohmann::json{{"model", report.model.to_json()}, {"train", report.train.to_json()}}.dump(2) +
                           "\n");
}

}  // namespace emcnet
