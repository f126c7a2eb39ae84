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

#include <cmath>

#include "doctest.h"
#include "emcnet/errors.hpp"
#include "emcnet/params.hpp"
#include "emcnet/rng.hpp"
#include "emcnet/tensor.hpp"
#include "support/fd.hpp"

using namespace emcnet;

namespace {

std::vector<double> values(const Tensor& t) { return t.to_vector(); }

}  // namespace

TEST_CASE("matmul hand cases") {
  const Tensor id = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  CHECK(values(matmul(id, b)) == std::vector<double>{3, 4, 5, 6});
  CHECK(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})).item() == 11.0);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("matmul gradient of sum is column sums of b") {
  Rng rng(1);
  Tensor a = testing::random_tensor(rng, {3, 4});
  Tensor b = testing::random_tensor(rng, {4, 2});
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(matmul(a, b)));
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.grad()[i * 4 + k] == doctest::Approx(b.at(k, 0) + b.at(k, 1)));
  CHECK(testing::max_fd_error({a, b}, [&] { return sum(matmul(a, b)); }) <= 1e-6);
}

TEST_CASE("elementwise ops") {
  CHECK(values(relu(Tensor::from({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(sigmoid(Tensor::from({1}, {0})).item() == 0.5);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);

  // Row-vector broadcast.
  const Tensor bc = add(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({1, 2}, {10, 20}));
  CHECK(values(bc) == std::vector<double>{11, 22, 13, 24});

  const Tensor e = elementwise(ElementwiseOp::Tanh, Tensor::from({1}, {0.5}));
  CHECK(e.item() == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));

  // relu subgradient at 0 is 0.
  Tensor z = Tensor::from({1}, {0.0}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(relu(z)));
  }
  CHECK(z.grad()[0] == 0.0);

  Rng rng(2);
  Tensor v = testing::random_tensor(rng, {5});
  CHECK(testing::max_fd_error({v}, [&] { return sum(tanh(v)); }) <= 1e-6);
  Tensor a = testing::random_tensor(rng, {3, 4});
  Tensor b = testing::random_tensor(rng, {3, 4});
  Tensor row = testing::random_tensor(rng, {1, 4});
  auto proj = testing::projector(rng, {3, 4});
  CHECK(testing::max_fd_error({a, b, row}, [&] {
          return proj(add(sub(mul(sigmoid(a), b), row), affine(mul(a, row), 0.5, 1.0)));
        }) <= 1e-6);
}

TEST_CASE("reductions") {
  const Tensor m = Tensor::from({2, 2}, {2, 4, 6, 8});
  CHECK(values(mean(m, 0)) == std::vector<double>{4, 6});
  CHECK(values(sum(m, 1)) == std::vector<double>{6, 14});
  CHECK(sum(m).item() == 20.0);
  CHECK_THROWS_AS(sum(Tensor::zeros({0})), EmptyInputError);
  CHECK_THROWS_AS(sum(m, 2), IndexError);

  Rng rng(3);
  Tensor a = testing::random_tensor(rng, {4, 3});
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(mean(a));
  }
  for (double g : a.grad()) CHECK(g == doctest::Approx(1.0 / 12.0));
  auto proj = testing::projector(rng, {3});
  CHECK(testing::max_fd_error({a}, [&] { return proj(mean(a, 0)); }) <= 1e-6);
}

TEST_CASE("softmax") {
  for (double p : values(softmax(Tensor::from({1, 3}, {0, 0, 0}), 1))) CHECK(p == doctest::Approx(1.0 / 3.0));
  const auto big = values(softmax(Tensor::from({1, 2}, {1000, 0}), 1));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(big[0]));
  CHECK_THROWS_AS(softmax(Tensor::from({1, 2}, {NAN, 0}), 1), NumericError);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor t = testing::random_tensor(rng, {3, 7}, 20.0, false);
    const Tensor s = softmax(t, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(s.at(r, c) >= 0.0);
        total += s.at(r, c);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }

  // Full Jacobian of a 4-vector, one output entry at a time.
  Tensor x = testing::random_tensor(rng, {1, 4});
  for (std::size_t j = 0; j < 4; ++j) {
    const std::vector<std::size_t> col{j};
    CHECK(testing::max_fd_error({x}, [&] { return sum(gather_rows(transpose(softmax(x, 1)), col)); }) <= 1e-6);
  }
}

TEST_CASE("masked softmax") {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const std::vector<std::uint8_t> mask{1, 0, 1, 0, 1, 0};
  const Tensor s = masked_softmax_rows(a, mask);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
  CHECK(s.at(1, 1) == 1.0);
  const std::vector<std::uint8_t> closed{1, 1, 1, 0, 0, 0};
  CHECK_THROWS_AS(masked_softmax_rows(a, closed), DimensionError);

  Rng rng(5);
  Tensor x = testing::random_tensor(rng, {2, 3});
  auto proj = testing::projector(rng, {2, 3});
  CHECK(testing::max_fd_error({x}, [&] { return proj(masked_softmax_rows(x, mask)); }) <= 1e-6);
}

TEST_CASE("concat") {
  const Tensor a = Tensor::from({1, 2}, {1, 2});
  const Tensor b = Tensor::from({1, 2}, {3, 4});
  CHECK(values(concat({a, b}, 1)) == std::vector<double>{1, 2, 3, 4});
  CHECK(values(concat({a, b}, 0)) == std::vector<double>{1, 2, 3, 4});
  CHECK(concat({a, b}, 0).shape() == Shape{2, 2});
  CHECK(values(concat({a}, 1)) == values(a));
  CHECK_THROWS_AS(concat({a, Tensor::zeros({2})}, 1), DimensionError);

  Rng rng(6);
  Tensor x = testing::random_tensor(rng, {2, 3});
  Tensor y = testing::random_tensor(rng, {2, 2});
  auto proj = testing::projector(rng, {2, 5});
  CHECK(testing::max_fd_error({x, y}, [&] { return proj(concat({x, y}, 1)); }) <= 1e-6);
}

TEST_CASE("gather and scatter rows") {
  const Tensor a = Tensor::from({3, 1}, {10, 20, 30});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(values(gather_rows(a, idx)) == std::vector<double>{30, 10});
  const std::vector<std::size_t> identity{0, 1, 2};
  CHECK(values(gather_rows(a, identity)) == values(a));
  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(gather_rows(a, bad), IndexError);

  Tensor w = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const std::vector<std::size_t> dup{1, 1};
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(gather_rows(w, dup)));
  }
  CHECK(values(Tensor::from({3, 2}, std::vector<double>(w.grad().begin(), w.grad().end()))) ==
        std::vector<double>{0, 0, 2, 2, 0, 0});

  const std::vector<std::size_t> padded{1, kPadRow};
  CHECK(values(gather_rows_padded(a, padded)) == std::vector<double>{20, 0});
  const std::vector<std::size_t> to{2, 2, 0};
  CHECK(values(scatter_add_rows(a, to, 4)) == std::vector<double>{30, 0, 30, 0});

  Rng rng(7);
  Tensor x = testing::random_tensor(rng, {3, 2});
  auto p1 = testing::projector(rng, {2, 2});
  auto p2 = testing::projector(rng, {4, 2});
  auto p3 = testing::projector(rng, {2, 2});
  CHECK(testing::max_fd_error({x}, [&] { return p1(gather_rows(x, dup)); }) <= 1e-6);
  CHECK(testing::max_fd_error({x}, [&] { return p2(scatter_add_rows(x, to, 4)); }) <= 1e-6);
  CHECK(testing::max_fd_error({x}, [&] { return p3(gather_rows_padded(x, padded)); }) <= 1e-6);
}

TEST_CASE("scale rows, l2 normalize, transpose, reshape") {
  Rng rng(8);
  Tensor a = testing::random_tensor(rng, {3, 2});
  Tensor s = testing::random_tensor(rng, {3, 1});
  auto proj = testing::projector(rng, {3, 2});
  CHECK(testing::max_fd_error({a, s}, [&] { return proj(scale_rows(a, s)); }) <= 1e-6);

  Tensor v = testing::random_tensor(rng, {4, 1});
  auto pv = testing::projector(rng, {4, 1});
  CHECK(testing::max_fd_error({v}, [&] { return pv(l2_normalize(v)); }) <= 1e-6);
  double norm = 0.0;
  const Tensor unit = l2_normalize(v);
  for (double x : unit.data()) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(l2_normalize(Tensor::zeros({3})), NumericError);

  auto pt = testing::projector(rng, {2, 3});
  CHECK(testing::max_fd_error({a}, [&] { return pt(transpose(a)); }) <= 1e-6);
  auto pr = testing::projector(rng, {1, 6});
  CHECK(testing::max_fd_error({a}, [&] { return pr(reshape(a, {1, 6})); }) <= 1e-6);
}

TEST_CASE("backward semantics") {
  Tensor w = Tensor::from({3}, {1, 2, 3}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(w));
  }
  for (double g : w.grad()) CHECK(g == 1.0);

  Tensor u = Tensor::from({2}, {1, 2}, true);
  Tensor other = Tensor::from({2}, {5, 6}, true);
  u.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor unrelated = sum(u);
    (void)unrelated;
    tape.backward(sum(other));
  }
  for (double g : u.grad()) CHECK(g == 0.0);

  Tape tape;
  TapeScope scope(tape);
  const Tensor loss = sum(mul(w, w));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), TapeError);

  Tape second;
  TapeScope inner(second);
  CHECK_THROWS_AS(second.backward(mul(w, w)), DimensionError);
}

TEST_CASE("gradients accumulate across tapes") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(w));
  }
  CHECK(w.grad()[0] == 2.0);
  w.zero_grad();
  CHECK(w.grad()[1] == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(9);
  ParamStore store;
  store.add("a", testing::random_tensor(rng, {3, 2}));
  store.add("b", testing::random_tensor(rng, {1, 4}));
  const auto path = std::filesystem::temp_directory_path() / "emcnet_test_ckpt.emcnet";
  save_checkpoint(path, store, {{"tag", "x"}});
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.meta.at("tag") == "x");
  REQUIRE(back.params.size() == 2);
  CHECK(back.params.at("a").to_vector() == store.at("a").to_vector());
  CHECK(back.params.at("b").shape() == Shape{1, 4});
  CHECK(back.params.at("b").to_vector() == store.at("b").to_vector());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(store.add("a", Tensor::zeros({1})), ConfigError);
}
