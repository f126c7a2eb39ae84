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

// Finite-difference oracle for tests. Deliberately separate from the
// library's own gradcheck so a bug there cannot hide a bug here.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "emcnet/rng.hpp"
#include "emcnet/tensor.hpp"

namespace testing {

inline emcnet::Tensor random_tensor(emcnet::Rng& rng, emcnet::Shape shape, double scale = 1.0,
                                    bool requires_grad = true) {
  std::vector<double> v(emcnet::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return emcnet::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline emcnet::Tensor positive_tensor(emcnet::Rng& rng, emcnet::Shape shape, double lo = 0.1,
                                      bool requires_grad = true) {
  std::vector<double> v(emcnet::shape_numel(shape));
  for (double& x : v) x = lo + rng.uniform();
  return emcnet::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Runs f once on a fresh tape, backpropagates, then compares every entry of
// every leaf with a central difference. Returns the worst relative error,
// |a - n| / max(|a|, |n|, floor).
inline double max_fd_error(const std::vector<emcnet::Tensor>& leaves, const std::function<emcnet::Tensor()>& f,
                           double h = 1e-5, double floor = 1e-7) {
  for (auto leaf : leaves) leaf.zero_grad();
  {
    emcnet::Tape tape;
    emcnet::TapeScope scope(tape);
    tape.backward(f());
  }
  double worst = 0.0;
  for (auto leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
  }
  return worst;
}

// Weighted sum with fixed random weights so every output entry contributes.
inline std::function<emcnet::Tensor(const emcnet::Tensor&)> projector(emcnet::Rng& rng, const emcnet::Shape& shape) {
  const emcnet::Tensor w = random_tensor(rng, shape, 1.0, false);
  return [w](const emcnet::Tensor& t) { return emcnet::sum(emcnet::mul(t, w)); };
}

}  // namespace testing
