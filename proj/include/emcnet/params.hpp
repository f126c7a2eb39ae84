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

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emcnet/tensor.hpp"
#include "json.hpp"

namespace emcnet {

// Ordered name -> leaf tensor registry. Insertion order is the checkpoint
// order and the optimizer iteration order.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  // Registers a leaf; the stored tensor always requires a gradient.
  Tensor& add(const std::string& name, Tensor value);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_values() const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }

  void zero_grad();
  ParamStore deep_copy() const;
  // Copies values from a store with identical names and shapes.
  void assign_values(const ParamStore& other);

 private:
  std::vector<Entry> entries_;
};

// Checkpoint layout: the 7 ASCII bytes "EMCNET1", a u64 little-endian byte
// length, a JSON manifest {"format", "params":[{name, shape, offset}],
// "meta"}, then every parameter's values as float64 little-endian in
// manifest order (offset counts values, not bytes).
inline constexpr std::string_view kCheckpointMagic = "EMCNET1";

struct Checkpoint {
  ParamStore params;
  nlohmann::json meta;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emcnet
