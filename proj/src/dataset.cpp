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

#include "emcnet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "emcnet/errors.hpp"
#include "emcnet/imaging.hpp"
#include "emcnet/rng.hpp"

namespace emcnet {

std::filesystem::path DatasetManifest::resolve(std::size_t entry) const {
  const std::filesystem::path p = entries.at(entry).path;
  return p.is_absolute() ? p : root / p;
}

const std::vector<std::size_t>& DatasetManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

void DatasetManifest::validate() const {
  if (classes.empty()) throw ConfigError("manifest has no classes");
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].label >= classes.size())
      throw ConfigError("manifest entry " + std::to_string(i) + " has label " +
                        std::to_string(entries[i].label) + " outside the class list");
  std::set<std::size_t> seen;
  for (const auto* s : {&train, &val, &test})
    for (auto i : *s) {
      if (i >= entries.size()) throw ConfigError("split index " + std::to_string(i) + " out of range");
      if (!seen.insert(i).second) throw ConfigError("entry " + std::to_string(i) + " appears in two splits");
    }
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["classes"] = m.classes;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) j["entries"].push_back({{"path", e.path}, {"label", e.label}});
  j["splits"] = {{"train", m.train}, {"val", m.val}, {"test", m.test}};
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  try {
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries"))
      m.entries.push_back({e.at("path").get<std::string>(), e.at("label").get<std::size_t>()});
    if (j.contains("splits")) {
      const auto& s = j.at("splits");
      m.train = s.value("train", std::vector<std::size_t>{});
      m.val = s.value("val", std::vector<std::size_t>{});
      m.test = s.value("test", std::vector<std::size_t>{});
    } else {
      for (std::size_t i = 0; i < m.entries.size(); ++i) m.train.push_back(i);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << manifest_to_json(manifest).dump(2) << '\n';
  if (!os) throw IoError("short write on manifest " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic textures. Each generator fills a single-channel intensity field
// in [0, 1]; tinting and noise are applied afterwards.

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr const char* kFamilies[] = {"blobs", "stripes", "grid", "wires",
                                     "checker", "rings", "dots", "cracks"};
constexpr std::size_t kFamilyCount = std::size(kFamilies);

using Field = std::vector<double>;

void stamp_disk(Field& f, std::size_t side, double cy, double cx, double radius, double value) {
  const int r = static_cast<int>(std::ceil(radius)) + 1;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int y = static_cast<int>(std::lround(cy)) + dy;
      const int x = static_cast<int>(std::lround(cx)) + dx;
      if (y < 0 || x < 0 || y >= static_cast<int>(side) || x >= static_cast<int>(side)) continue;
      const double d = std::hypot(y - cy, x - cx);
      if (d <= radius) f[y * side + x] = value;
    }
}

void draw_segment(Field& f, std::size_t side, double y0, double x0, double y1, double x1, double width,
                  double value) {
  const double len = std::hypot(y1 - y0, x1 - x0);
  const int steps = std::max(1, static_cast<int>(len * 2));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    stamp_disk(f, side, y0 + t * (y1 - y0), x0 + t * (x1 - x0), width, value);
  }
}

Field texture(std::size_t family, std::size_t variant, std::size_t side, Rng& rng) {
  const double S = static_cast<double>(side);
  const double scale = 1.0 + 0.5 * static_cast<double>(variant);  // finer detail per variant
  Field f(side * side, 0.0);
  switch (family) {
    case 0: {  // gaussian blobs
      const int k = 3 + static_cast<int>(rng.index(4));
      std::vector<std::array<double, 3>> blobs;
      for (int i = 0; i < k; ++i)
        blobs.push_back({rng.uniform(0, S), rng.uniform(0, S), S * rng.uniform(0.06, 0.13) / scale});
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          double v = 0.0;
          for (const auto& [by, bx, r] : blobs) {
            const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
            v += std::exp(-d2 / (2 * r * r));
          }
          f[y * side + x] = std::min(1.0, v);
        }
      break;
    }
    case 1: {  // oriented sinusoidal stripes
      const double freq = rng.uniform(3.0, 6.0) * scale, theta = rng.uniform(0, kTwoPi / 2),
                   phase = rng.uniform(0, kTwoPi);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
          f[y * side + x] =
              0.5 + 0.5 * std::sin(kTwoPi * freq * (x * std::cos(theta) + y * std::sin(theta)) / S + phase);
      break;
    }
    case 2: {  // rectangular grid lines
      const double pitch = S / (rng.uniform(4.0, 7.0) * scale);
      const double oy = rng.uniform(0, pitch), ox = rng.uniform(0, pitch), half = std::max(1.0, S / 40);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double dy = std::abs(std::fmod(y + oy, pitch) - pitch / 2);
          const double dx = std::abs(std::fmod(x + ox, pitch) - pitch / 2);
          const bool line = dy > pitch / 2 - half || dx > pitch / 2 - half;
          f[y * side + x] = line ? 1.0 : 0.1;
        }
      break;
    }
    case 3: {  // wire-like random curves
      const int k = 3 + static_cast<int>(rng.index(3));
      for (int i = 0; i < k; ++i) {
        double y = rng.uniform(0, S), x = rng.uniform(0, S), a = rng.uniform(0, kTwoPi);
        const int steps = static_cast<int>(1.5 * S);
        for (int s = 0; s < steps; ++s) {
          a += rng.uniform(-0.25, 0.25);
          const double ny = y + std::sin(a), nx = x + std::cos(a);
          stamp_disk(f, side, ny, nx, std::max(0.8, S / 64), 1.0);
          y = ny;
          x = nx;
        }
      }
      break;
    }
    case 4: {  // checkerboard
      const double cell = S / (rng.uniform(3.0, 6.0) * scale);
      const double oy = rng.uniform(0, cell), ox = rng.uniform(0, cell);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const auto cy = static_cast<long>(std::floor((y + oy) / cell));
          const auto cx = static_cast<long>(std::floor((x + ox) / cell));
          f[y * side + x] = ((cy + cx) & 1) ? 0.9 : 0.15;
        }
      break;
    }
    case 5: {  // concentric rings
      const double cy = rng.uniform(0.2 * S, 0.8 * S), cx = rng.uniform(0.2 * S, 0.8 * S);
      const double freq = rng.uniform(4.0, 7.0) * scale;
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
          f[y * side + x] = 0.5 + 0.5 * std::cos(kTwoPi * freq * std::hypot(y - cy, x - cx) / S);
      break;
    }
    case 6: {  // dense small particles
      const int k = static_cast<int>((20 + rng.index(20)) * scale);
      for (int i = 0; i < k; ++i)
        stamp_disk(f, side, rng.uniform(0, S), rng.uniform(0, S), std::max(1.0, S / 48), 1.0);
      break;
    }
    default: {  // bright surface with dark straight cracks
      std::fill(f.begin(), f.end(), 0.85);
      const int k = 2 + static_cast<int>(rng.index(3));
      for (int i = 0; i < k; ++i)
        draw_segment(f, side, rng.uniform(0, S), rng.uniform(0, S), rng.uniform(0, S), rng.uniform(0, S),
                     std::max(0.8, S / 80), 0.05);
      break;
    }
  }
  return f;
}

std::array<double, 3> class_tint(std::size_t label, std::size_t n_classes) {
  const double phase = kTwoPi * static_cast<double>(label) / static_cast<double>(n_classes);
  std::array<double, 3> t{};
  for (std::size_t c = 0; c < 3; ++c) t[c] = 0.65 + 0.35 * std::cos(phase + kTwoPi * c / 3.0);
  return t;
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const SynthOptions& opt, const std::filesystem::path& out_dir) {
  if (opt.n_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (opt.per_class == 0) throw EmptyInputError("synthetic dataset would be empty (per_class = 0)");
  if (opt.side < 4) throw ConfigError("synthetic image side must be >= 4");
  if (opt.val_fraction < 0 || opt.test_fraction < 0 || opt.val_fraction + opt.test_fraction >= 1)
    throw ConfigError("val/test fractions must be non-negative and sum below 1");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.root = out_dir;
  for (std::size_t c = 0; c < opt.n_classes; ++c) {
    std::string name = kFamilies[c % kFamilyCount];
    if (c >= kFamilyCount) name += "_v" + std::to_string(c / kFamilyCount);
    m.classes.push_back(name);
  }

  for (std::size_t c = 0; c < opt.n_classes; ++c) {
    const auto tint = class_tint(c, opt.n_classes);
    for (std::size_t i = 0; i < opt.per_class; ++i) {
      Rng rng(Rng::derive(opt.seed, "synth", c * opt.per_class + i));
      const Field field = texture(c % kFamilyCount, c / kFamilyCount, opt.side, rng);
      Image img(opt.side, opt.side, 3);
      const double gain = rng.uniform(0.85, 1.0);
      for (std::size_t p = 0; p < opt.side * opt.side; ++p)
        for (std::size_t ch = 0; ch < 3; ++ch)
          img.pixels[p * 3 + ch] = std::clamp(field[p] * tint[ch] * gain + 0.04 * rng.normal(), 0.0, 1.0);

      char name[64];
      std::snprintf(name, sizeof name, "images/%s_%04zu.emci", m.classes[c].c_str(), i);
      save_raw_image(out_dir / name, img);
      m.entries.push_back({name, c});
    }
  }

  // Stratified split: per class, shuffled, test then val then train.
  for (std::size_t c = 0; c < opt.n_classes; ++c) {
    std::vector<std::size_t> idx(opt.per_class);
    for (std::size_t i = 0; i < opt.per_class; ++i) idx[i] = c * opt.per_class + i;
    Rng rng(Rng::derive(opt.seed, "split", c));
    rng.shuffle(idx);
    const auto n = static_cast<double>(opt.per_class);
    const auto n_test = static_cast<std::size_t>(std::lround(opt.test_fraction * n));
    const auto n_val = std::min(opt.per_class - n_test, static_cast<std::size_t>(std::lround(opt.val_fraction * n)));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_test) m.test.push_back(idx[i]);
      else if (i < n_test + n_val) m.val.push_back(idx[i]);
      else m.train.push_back(idx[i]);
    }
  }
  for (auto* s : {&m.train, &m.val, &m.test}) std::sort(s->begin(), s->end());
  save_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace emcnet
