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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace emcnet {

struct DatasetEntry {
  std::string path;  // relative to the manifest directory unless absolute
  std::size_t label = 0;
};

// On disk: {"classes":[...], "entries":[{"path","label"}],
//           "splits":{"train":[...],"val":[...],"test":[...]}}
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<DatasetEntry> entries;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::filesystem::path root;  // directory relative paths resolve against

  std::filesystem::path resolve(std::size_t entry) const;
  const std::vector<std::size_t>& split(const std::string& name) const;
  // Throws ConfigError when a label or split index is out of range or the
  // splits overlap.
  void validate() const;
};

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path root);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct SynthOptions {
  std::size_t n_classes = 4;
  std::size_t per_class = 25;
  std::size_t side = 64;
  std::uint64_t seed = 7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
};

// Writes one EMCIMG1 image per sample under out_dir/images plus
// out_dir/manifest.json. Every class is a distinct texture family with its
// own tint, so both raw pixels and patch textures carry class signal.
// Output is byte-identical for identical options.
DatasetManifest generate_synthetic_dataset(const SynthOptions& options,
                                           const std::filesystem::path& out_dir);

}  // namespace emcnet
