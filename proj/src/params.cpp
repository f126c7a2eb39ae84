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

#include "emcnet/params.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "emcnet/errors.hpp"

namespace emcnet {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  if (!value.requires_grad()) value = Tensor::from(value.shape(), value.to_vector(), true);
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

Tensor& ParamStore::at(std::string_view name) {
  for (auto& e : entries_)
    if (e.first == name) return e.second;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

const Tensor& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

ParamStore ParamStore::deep_copy() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.first, e.second.clone());
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.size() != size()) throw MismatchError("params", "parameter count differs");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [name, src] = other.entries_[i];
    auto& dst = entries_[i].second;
    if (name != entries_[i].first || src.shape() != dst.shape())
      throw MismatchError(name, "parameter '" + name + "' differs in name or shape");
    auto out = dst.mutable_data();
    auto in = src.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["format"] = std::string(kCheckpointMagic);
  manifest["params"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : params.entries()) {
    manifest["params"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  manifest["meta"] = meta;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& entry : params.entries())
    for (double v : entry.second.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t head = kCheckpointMagic.size() + 8;
  if (bytes.size() < head || std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw FormatError(path.string() + ": not an EMCNET1 checkpoint");
  const std::uint64_t json_len = get_u64(bytes.data() + kCheckpointMagic.size());
  if (bytes.size() - head < json_len) throw FormatError(path.string() + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(head),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(head + json_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }

  Checkpoint out;
  out.meta = manifest.value("meta", nlohmann::json::object());
  const unsigned char* payload = bytes.data() + head + json_len;
  const std::size_t payload_values = (bytes.size() - head - json_len) / 8;
  try {
    for (const auto& p : manifest.at("params")) {
      const auto shape = p.at("shape").get<Shape>();
      const auto offset = p.at("offset").get<std::size_t>();
      const auto n = shape_numel(shape);
      if (offset + n > payload_values) throw FormatError(path.string() + ": truncated payload");
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i)
        values[i] = std::bit_cast<double>(get_u64(payload + 8 * (offset + i)));
      out.params.add(p.at("name").get<std::string>(), Tensor::from(shape, std::move(values), true));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
  return out;
}

}  // namespace emcnet
