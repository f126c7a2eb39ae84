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

// Dense float64 tensors with a reverse-mode differentiation tape.
//
// Ops record themselves on the thread's active Tape (see TapeScope) when at
// least one input requires a gradient. Without an active tape every op is a
// plain forward computation, which is what evaluation and finite-difference
// checks use.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace emcnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorImpl;
}

class Tensor;

// Receives the output gradient and one pointer per input gradient buffer;
// a null pointer means that input needs no gradient.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<double* const> grad_in)>;

// Extension point for ops defined outside tensor.cpp. Produces a tensor with
// the given value; if a tape is active and any input requires a gradient,
// `backward` is recorded to route the output gradient back into the inputs.
Tensor record_op(const char* name, Shape shape, std::vector<double> values,
                 std::vector<Tensor> inputs, BackwardFn backward);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // rank-2 helpers; a rank-1 tensor of n values is treated as 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct write access, meant for optimizers and finite-difference probes.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  std::uint64_t tape_id() const;
  // Accumulated gradient; all zeros until a backward pass reaches this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Value copy that never requires a gradient.
  Tensor detach() const;
  // Deep copy that keeps requires_grad (for leaves only).
  Tensor clone() const;
  bool same_as(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  std::vector<double> to_vector() const;

 private:
  friend class Tape;
  friend Tensor record_op(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                          BackwardFn);
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Sweeps the recorded ops in reverse, accumulating d(loss)/d(t) into every
  // requires_grad tensor reachable from `loss`. A tape is single use.
  void backward(const Tensor& loss);

  static Tape* active() noexcept;

 private:
  friend Tensor record_op(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                          BackwardFn);
  struct Record {
    const char* name;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  friend class TapeScope;
  std::uint64_t id_;
  bool consumed_ = false;
  std::vector<Record> records_;
};

// Makes a tape the active one for the current thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Binary elementwise ops accept equal shapes, or `b` as a row vector
// (1 x cols or {cols}) broadcast over the rows of a rank-2 `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
// scale * a + shift
Tensor affine(const Tensor& a, double scale, double shift = 0.0);

enum class ElementwiseOp { Add, Mul, Relu, Sigmoid, Tanh };
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b = nullptr);

inline constexpr int kAllAxes = -1;
// Reducing along an axis removes that extent (rank 2 -> rank 1).
Tensor sum(const Tensor& a, int axis = kAllAxes);
Tensor mean(const Tensor& a, int axis = kAllAxes);

Tensor softmax(const Tensor& a, int axis);
// Row-wise softmax restricted to entries with mask[r * cols + c] != 0;
// masked entries get probability 0. Every row needs at least one open entry.
Tensor masked_softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask);

Tensor concat(std::span<const Tensor> tensors, int axis);
Tensor concat(std::initializer_list<Tensor> tensors, int axis);

inline constexpr std::size_t kPadRow = std::numeric_limits<std::size_t>::max();
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx);
// Like gather_rows, but kPadRow entries yield zero rows.
Tensor gather_rows_padded(const Tensor& a, std::span<const std::size_t> idx);
// out[idx[i]] += a[i]; out has `out_rows` rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> idx,
                        std::size_t out_rows);
// Row r of `a` multiplied by scale[r]; `scale` has one value per row.
Tensor scale_rows(const Tensor& a, const Tensor& scale);
// a / ||a||_2 over all entries.
Tensor l2_normalize(const Tensor& a);

namespace debug {
// Test fixture: perturbs the matmul backward rule so gradient checks can be
// shown to fail. Never enabled outside verification runs.
void set_backward_fault(bool enabled) noexcept;
bool backward_fault() noexcept;
}  // namespace debug

}  // namespace emcnet
