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

#include "emcnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "emcnet/errors.hpp"

namespace emcnet {

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0 for leaves
};

}  // namespace detail

using detail::TensorImpl;

namespace {

std::atomic<std::uint64_t> g_next_tape_id{1};
std::atomic<bool> g_backward_fault{false};
thread_local Tape* t_active_tape = nullptr;

enum class Broadcast { Same, Row };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  const bool b_is_row =
      b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1);
  if (a.rank() == 2 && b_is_row && b.numel() == a.cols()) return Broadcast::Row;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

void require_nonempty(const Tensor& a, const char* op) {
  if (a.numel() == 0) throw EmptyInputError(std::string(op) + ": empty input " + shape_str(a.shape()));
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " + shape_str(a.shape()));
}

// Iteration geometry for a reduction/softmax along one axis of a rank <= 2 tensor.
struct Lines {
  std::size_t count;
  std::size_t length;
  std::size_t stride;
  std::size_t step;  // offset between consecutive lines
};

Lines lines_along(const Tensor& a, int axis, const char* op) {
  const auto rank = static_cast<int>(a.rank());
  if (axis < 0 || axis >= std::max(rank, 1) || rank > 2)
    throw IndexError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(a.shape()));
  if (rank <= 1) return {1, a.numel(), 1, 0};
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (axis == 1) return {r, c, 1, c};
  return {c, r, c, 1};
}

Shape reduced_shape(const Tensor& a, int axis) {
  Shape out;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (static_cast<int>(i) != axis) out.push_back(a.shape()[i]);
  return out;
}

template <typename F>
Tensor unary(const char* name, const Tensor& a, F&& f,
             std::function<double(double x, double y)> dfdx) {
  const auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  auto xs = std::vector<double>(x.begin(), x.end());
  auto ys = y;
  return record_op(name, a.shape(), std::move(y), {a},
                   [xs = std::move(xs), ys = std::move(ys), dfdx = std::move(dfdx)](
                       std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * dfdx(xs[i], ys[i]);
                   });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  return impl_->shape.size() == 2 ? impl_->shape[0] : 1;
}

std::size_t Tensor::cols() const {
  if (impl_->shape.size() == 2) return impl_->shape[1];
  return impl_->shape.size() == 1 ? impl_->shape[0] : 1;
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
std::uint64_t Tensor::tape_id() const { return impl_->tape_id; }

std::span<const double> Tensor::grad() const {
  if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data, false); }

Tensor Tensor::clone() const { return from(impl_->shape, impl_->data, impl_->requires_grad); }

std::vector<double> Tensor::to_vector() const { return impl_->data; }

// ---------------------------------------------------------------------------
// Tape

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}
Tape::~Tape() = default;

Tape* Tape::active() noexcept { return t_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
TapeScope::~TapeScope() { t_active_tape = previous_; }

Tensor record_op(const char* name, Shape shape, std::vector<double> values,
                 std::vector<Tensor> inputs, BackwardFn backward) {
  if (shape_numel(shape) != values.size())
    throw DimensionError(std::string(name) + ": result shape " + shape_str(shape) +
                         " does not match value count");
  auto out = std::make_shared<TensorImpl>();
  out->shape = std::move(shape);
  out->data = std::move(values);

  Tape* tape = Tape::active();
  if (!tape) return Tensor(std::move(out));

  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (!in.impl_->requires_grad) continue;
    if (in.impl_->tape_id != 0 && in.impl_->tape_id != tape->id_)
      throw TapeError(std::string(name) + ": input was recorded on a different tape");
    needs_grad = true;
  }
  if (!needs_grad) return Tensor(std::move(out));
  if (tape->consumed_) throw TapeError(std::string(name) + ": tape already consumed by backward()");

  out->requires_grad = true;
  out->tape_id = tape->id_;
  out->grad.assign(out->data.size(), 0.0);
  Tape::Record rec{name, {}, out, std::move(backward)};
  rec.inputs.reserve(inputs.size());
  for (auto& in : inputs) rec.inputs.push_back(in.impl_);
  tape->records_.push_back(std::move(rec));
  return Tensor(std::move(out));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward: tape already consumed; re-run the forward pass");
  if (!loss.defined() || loss.numel() != 1)
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (loss.requires_grad() && loss.tape_id() != id_)
    throw TapeError("backward: loss was not recorded on this tape");
  consumed_ = true;
  if (!loss.requires_grad()) {
    records_.clear();
    return;
  }
  loss.impl_->grad[0] += 1.0;

  std::vector<double*> grad_in;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    grad_in.clear();
    for (auto& in : it->inputs)
      grad_in.push_back(in->requires_grad ? (in->grad.resize(in->data.size()), in->grad.data())
                                          : nullptr);
    it->backward(it->output->grad, grad_in);
  }
  records_.clear();
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2 || a.cols() != b.rows())
    throw DimensionError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> c(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return record_op("matmul", {m, n}, std::move(c), {a, b},
                   [a, b, m, k, n](std::span<const double> g, std::span<double* const> gin) {
                     const auto A = a.data();
                     const auto B = b.data();
                     const double fault = debug::backward_fault() ? 1.0 + 1e-3 : 1.0;
                     if (double* ga = gin[0]) {
                       // dA = dC * B^T
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t p = 0; p < k; ++p) {
                           double acc = 0.0;
                           const double* brow = B.data() + p * n;
                           const double* grow = g.data() + i * n;
                           for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                           ga[i * k + p] += fault * acc;
                         }
                     }
                     if (double* gb = gin[1]) {
                       // dB = A^T * dC
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t p = 0; p < k; ++p) {
                           const double aip = A[i * k + p];
                           if (aip == 0.0) continue;
                           const double* grow = g.data() + i * n;
                           double* gbrow = gb + p * n;
                           for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                         }
                     }
                   });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() > 2) throw DimensionError("transpose: rank > 2 " + shape_str(a.shape()));
  const std::size_t r = a.rows(), c = a.cols();
  const auto x = a.data();
  std::vector<double> y(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
  return record_op("transpose", {c, r}, std::move(y), {a},
                   [r, c](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j * r + i];
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return record_op("reshape", std::move(shape), a.to_vector(), {a},
                   [](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                   });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <typename Fwd, typename Bwd>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  const Broadcast kind = broadcast_kind(a, b, name);
  const auto x = a.data();
  const auto z = b.data();
  const std::size_t n = x.size();
  const std::size_t width = kind == Broadcast::Row ? a.cols() : n;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = fwd(x[i], z[kind == Broadcast::Row ? i % width : i]);
  return record_op(name, a.shape(), std::move(y), {a, b},
                   [a, b, kind, width, bwd](std::span<const double> g, std::span<double* const> gin) {
                     const auto x = a.data();
                     const auto z = b.data();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const std::size_t j = kind == Broadcast::Row ? i % width : i;
                       double da = 0.0, db = 0.0;
                       bwd(x[i], z[j], g[i], da, db);
                       if (gin[0]) gin[0][i] += da;
                       if (gin[1]) gin[1][j] += db;
                     }
                   });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double z) { return x + z; },
                [](double, double, double g, double& da, double& db) {
                  da = g;
                  db = g;
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double z) { return x - z; },
                [](double, double, double g, double& da, double& db) {
                  da = g;
                  db = -g;
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double z) { return x * z; },
                [](double x, double z, double g, double& da, double& db) {
                  da = g * z;
                  db = g * x;
                });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  return unary("affine", a, [scale, shift](double x) { return scale * x + shift; },
               [scale](double, double) { return scale; });
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b) {
  const bool binary_op = op == ElementwiseOp::Add || op == ElementwiseOp::Mul;
  if (binary_op && !b) throw DimensionError("elementwise: binary op needs a second operand");
  switch (op) {
    case ElementwiseOp::Add: return add(a, *b);
    case ElementwiseOp::Mul: return mul(a, *b);
    case ElementwiseOp::Relu: return relu(a);
    case ElementwiseOp::Sigmoid: return sigmoid(a);
    case ElementwiseOp::Tanh: return tanh(a);
  }
  throw DimensionError("elementwise: unknown op");
}

// ---------------------------------------------------------------------------
// Reductions and normalizations

namespace {

Tensor reduce(const char* name, const Tensor& a, int axis, bool average) {
  require_nonempty(a, name);
  const Lines L = lines_along(a, axis, name);
  const auto x = a.data();
  const double scale = average ? 1.0 / static_cast<double>(L.length) : 1.0;
  std::vector<double> y(L.count, 0.0);
  for (std::size_t l = 0; l < L.count; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < L.length; ++i) s += x[l * L.step + i * L.stride];
    y[l] = s * scale;
  }
  return record_op(name, reduced_shape(a, axis), std::move(y), {a},
                   [L, scale](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t l = 0; l < L.count; ++l)
                       for (std::size_t i = 0; i < L.length; ++i)
                         gin[0][l * L.step + i * L.stride] += g[l] * scale;
                   });
}

}  // namespace

Tensor sum(const Tensor& a, int axis) {
  if (axis != kAllAxes) return reduce("sum", a, axis, false);
  require_nonempty(a, "sum");
  const auto x = a.data();
  double s = 0.0;
  for (double v : x) s += v;
  const std::size_t n = x.size();
  return record_op("sum", {}, {s}, {a}, [n](std::span<const double> g, std::span<double* const> gin) {
    if (!gin[0]) return;
    for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0];
  });
}

Tensor mean(const Tensor& a, int axis) {
  if (axis != kAllAxes) return reduce("mean", a, axis, true);
  require_nonempty(a, "mean");
  const auto x = a.data();
  double s = 0.0;
  for (double v : x) s += v;
  const std::size_t n = x.size();
  const double inv = 1.0 / static_cast<double>(n);
  return record_op("mean", {}, {s * inv}, {a},
                   [n, inv](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0] * inv;
                   });
}

namespace {

void require_finite(const Tensor& a, const char* op) {
  for (double v : a.data())
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
}

// Softmax backward along one line: dx_i = y_i * (g_i - sum_j g_j y_j).
void softmax_line_backward(const double* y, const double* g, double* dx, std::size_t len,
                           std::size_t stride) {
  double dot = 0.0;
  for (std::size_t i = 0; i < len; ++i) dot += g[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < len; ++i) dx[i * stride] += y[i * stride] * (g[i * stride] - dot);
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  require_nonempty(a, "softmax");
  require_finite(a, "softmax");
  const Lines L = lines_along(a, axis, "softmax");
  const auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t l = 0; l < L.count; ++l) {
    const std::size_t base = l * L.step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L.length; ++i) mx = std::max(mx, x[base + i * L.stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < L.length; ++i) {
      const double e = std::exp(x[base + i * L.stride] - mx);
      y[base + i * L.stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < L.length; ++i) y[base + i * L.stride] /= z;
  }
  auto ys = y;
  return record_op("softmax", a.shape(), std::move(y), {a},
                   [ys = std::move(ys), L](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t l = 0; l < L.count; ++l) {
                       const std::size_t base = l * L.step;
                       softmax_line_backward(ys.data() + base, g.data() + base, gin[0] + base,
                                             L.length, L.stride);
                     }
                   });
}

Tensor masked_softmax_rows(const Tensor& a, std::span<const std::uint8_t> mask) {
  require_rank2(a, "masked_softmax_rows");
  require_nonempty(a, "masked_softmax_rows");
  if (mask.size() != a.numel())
    throw DimensionError("masked_softmax_rows: mask has " + std::to_string(mask.size()) +
                         " entries for shape " + shape_str(a.shape()));
  require_finite(a, "masked_softmax_rows");
  const std::size_t r = a.rows(), c = a.cols();
  const auto x = a.data();
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (mask[i * c + j]) mx = std::max(mx, x[i * c + j]);
    if (!std::isfinite(mx))
      throw DimensionError("masked_softmax_rows: row " + std::to_string(i) + " has no open entry");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (mask[i * c + j]) z += (y[i * c + j] = std::exp(x[i * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] /= z;
  }
  auto ys = y;
  // Masked entries carry y = 0, so the plain softmax backward already gives them zero gradient.
  return record_op("masked_softmax_rows", a.shape(), std::move(y), {a},
                   [ys = std::move(ys), r, c](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t i = 0; i < r; ++i)
                       softmax_line_backward(ys.data() + i * c, g.data() + i * c, gin[0] + i * c, c, 1);
                   });
}

Tensor l2_normalize(const Tensor& a) {
  require_nonempty(a, "l2_normalize");
  const auto x = a.data();
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("l2_normalize: vector has zero norm");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / norm;
  auto ys = y;
  return record_op("l2_normalize", a.shape(), std::move(y), {a},
                   [ys = std::move(ys), norm](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     double dot = 0.0;
                     for (std::size_t i = 0; i < g.size(); ++i) dot += ys[i] * g[i];
                     for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += (g[i] - ys[i] * dot) / norm;
                   });
}

// ---------------------------------------------------------------------------
// Structural ops

Tensor concat(std::span<const Tensor> tensors, int axis) {
  if (tensors.empty()) throw EmptyInputError("concat: no tensors");
  if (tensors.size() == 1) return tensors[0];
  const Tensor& first = tensors[0];
  const std::size_t rank = first.rank();
  if (rank == 0 || rank > 2) throw DimensionError("concat: unsupported rank " + shape_str(first.shape()));
  if (axis < 0 || axis >= static_cast<int>(rank))
    throw IndexError("concat: axis " + std::to_string(axis) + " out of range");
  for (const auto& t : tensors) {
    if (t.rank() != rank)
      throw DimensionError("concat: rank mismatch " + shape_str(first.shape()) + " vs " + shape_str(t.shape()));
    for (std::size_t d = 0; d < rank; ++d)
      if (static_cast<int>(d) != axis && t.shape()[d] != first.shape()[d])
        throw DimensionError("concat: shape mismatch " + shape_str(first.shape()) + " vs " +
                             shape_str(t.shape()));
  }

  // Treat rank 1 as a single row concatenated along columns.
  const bool by_rows = rank == 2 && axis == 0;
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const auto& t : tensors) out_shape[axis] += t.shape()[axis];
  const std::size_t out_rows = rank == 2 ? out_shape[0] : 1;
  const std::size_t out_cols = rank == 2 ? out_shape[1] : out_shape[0];

  std::vector<double> y(out_rows * out_cols);
  std::vector<std::size_t> offsets;  // row offset (by_rows) or column offset
  std::size_t off = 0;
  for (const auto& t : tensors) {
    offsets.push_back(off);
    const auto x = t.data();
    const std::size_t tr = t.rows(), tc = t.cols();
    for (std::size_t i = 0; i < tr; ++i)
      for (std::size_t j = 0; j < tc; ++j) {
        const std::size_t oi = by_rows ? off + i : i;
        const std::size_t oj = by_rows ? j : off + j;
        y[oi * out_cols + oj] = x[i * tc + j];
      }
    off += by_rows ? tr : tc;
  }
  std::vector<Tensor> inputs(tensors.begin(), tensors.end());
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (const auto& t : tensors) dims.emplace_back(t.rows(), t.cols());
  return record_op("concat", out_shape, std::move(y), inputs,
                   [dims, offsets, by_rows, out_cols](std::span<const double> g,
                                                      std::span<double* const> gin) {
                     for (std::size_t k = 0; k < dims.size(); ++k) {
                       if (!gin[k]) continue;
                       const auto [tr, tc] = dims[k];
                       for (std::size_t i = 0; i < tr; ++i)
                         for (std::size_t j = 0; j < tc; ++j) {
                           const std::size_t oi = by_rows ? offsets[k] + i : i;
                           const std::size_t oj = by_rows ? j : offsets[k] + j;
                           gin[k][i * tc + j] += g[oi * out_cols + oj];
                         }
                     }
                   });
}

Tensor concat(std::initializer_list<Tensor> tensors, int axis) {
  return concat(std::span<const Tensor>(tensors.begin(), tensors.size()), axis);
}

namespace {

Tensor gather_impl(const char* name, const Tensor& a, std::span<const std::size_t> idx, bool allow_pad) {
  require_rank2(a, name);
  const std::size_t n = a.rows(), d = a.cols();
  for (auto i : idx)
    if (!(allow_pad && i == kPadRow) && i >= n)
      throw IndexError(std::string(name) + ": row index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(n) + ")");
  const auto x = a.data();
  std::vector<double> y(idx.size() * d, 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] == kPadRow) continue;
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d, y.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  return record_op(name, {idx.size(), d}, std::move(y), {a},
                   [rows = std::move(rows), d](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t r = 0; r < rows.size(); ++r) {
                       if (rows[r] == kPadRow) continue;
                       double* dst = gin[0] + rows[r] * d;
                       const double* src = g.data() + r * d;
                       for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                     }
                   });
}

}  // namespace

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx) {
  return gather_impl("gather_rows", a, idx, false);
}

Tensor gather_rows_padded(const Tensor& a, std::span<const std::size_t> idx) {
  return gather_impl("gather_rows_padded", a, idx, true);
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> idx, std::size_t out_rows) {
  require_rank2(a, "scatter_add_rows");
  if (idx.size() != a.rows())
    throw DimensionError("scatter_add_rows: " + std::to_string(idx.size()) + " indices for " +
                         std::to_string(a.rows()) + " rows");
  for (auto i : idx)
    if (i >= out_rows)
      throw IndexError("scatter_add_rows: target row " + std::to_string(i) + " out of range");
  const std::size_t d = a.cols();
  const auto x = a.data();
  std::vector<double> y(out_rows * d, 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) y[idx[r] * d + j] += x[r * d + j];
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  return record_op("scatter_add_rows", {out_rows, d}, std::move(y), {a},
                   [rows = std::move(rows), d](std::span<const double> g, std::span<double* const> gin) {
                     if (!gin[0]) return;
                     for (std::size_t r = 0; r < rows.size(); ++r)
                       for (std::size_t j = 0; j < d; ++j) gin[0][r * d + j] += g[rows[r] * d + j];
                   });
}

Tensor scale_rows(const Tensor& a, const Tensor& scale) {
  require_rank2(a, "scale_rows");
  if (scale.numel() != a.rows())
    throw DimensionError("scale_rows: " + shape_str(scale.shape()) + " scale for " + shape_str(a.shape()));
  const std::size_t r = a.rows(), c = a.cols();
  const auto x = a.data();
  const auto s = scale.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] * s[i];
  return record_op("scale_rows", a.shape(), std::move(y), {a, scale},
                   [a, scale, r, c](std::span<const double> g, std::span<double* const> gin) {
                     const auto x = a.data();
                     const auto s = scale.data();
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j) {
                         if (gin[0]) gin[0][i * c + j] += g[i * c + j] * s[i];
                         if (gin[1]) gin[1][i] += g[i * c + j] * x[i * c + j];
                       }
                   });
}

namespace debug {
void set_backward_fault(bool enabled) noexcept { g_backward_fault.store(enabled); }
bool backward_fault() noexcept { return g_backward_fault.load(); }
}  // namespace debug

}  // namespace emcnet
