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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "emcnet/tensor.hpp"
#include "json.hpp"

namespace emcnet {

struct GradcheckOptions {
  std::string component;  // empty runs every component
  bool inject_fault = false;
  std::uint64_t seed = 1234;
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct GradcheckResult {
  std::string component;
  std::string check;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckResult> results;
  double tolerance = 0.0;
  bool pass = true;

  // Maximum error per component, in run order.
  std::vector<std::pair<std::string, double>> per_component() const;
  nlohmann::json to_json() const;
  std::string text() const;
};

// Components: tensor, embed, genc, hgenc, clique, ctenc, model, loss.
const std::vector<std::string>& gradcheck_components();

// Central differences against tape gradients of scalar losses built from
// random toy inputs. Throws ConfigError for an unknown component.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Maximum relative error over every entry of `inputs` for the scalar
// produced by `loss`; each input must be a leaf that requires grad.
struct FiniteDifferenceResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};
FiniteDifferenceResult finite_difference_check(const std::vector<Tensor>& inputs,
                                               const std::function<Tensor()>& loss, double step = 1e-5);

}  // namespace emcnet
