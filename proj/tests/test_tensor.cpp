#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "duplex/oracles.hpp"
#include "duplex/tensor.hpp"

using namespace duplex;

TEST_CASE("relu forward") {
  Tape tape;
  Tensor x = Tensor::from({-1.0, 2.0}, 1, 2);
  Tensor y = tape.relu(x);
  CHECK(y.at(0, 0) == 0.0);
  CHECK(y.at(0, 1) == 2.0);
}

TEST_CASE("segment_sum forward") {
  Tape tape;
  Tensor x = Tensor::from({1, 2, 3, 4, 5, 6}, 3, 2);
  std::vector<int> seg = {0, 0, 1};
  Tensor y = tape.segment_sum(x, seg, 2);
  CHECK(y.rows() == 2);
  CHECK(y.at(0, 0) == 4.0);
  CHECK(y.at(0, 1) == 6.0);
  CHECK(y.at(1, 0) == 5.0);
  CHECK(y.at(1, 1) == 6.0);
}

TEST_CASE("sigmoid at zero") {
  Tape tape;
  Tensor y = tape.sigmoid(Tensor::zeros(1, 1));
  CHECK(y.scalar() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul sum gradient is outer product with ones") {
  // loss = sum(W x): dL/dW[i][j] = x[j] for every row i.
  Tape tape;
  Tensor W = Tensor::from({1, 2, 3, 4}, 2, 2, true);
  Tensor x = Tensor::from({5, 7}, 2, 1);
  Tensor loss = tape.sum_all(tape.matmul(W, x));
  tape.backward(loss);
  CHECK(W.grad()[0] == 5.0);
  CHECK(W.grad()[1] == 7.0);
  CHECK(W.grad()[2] == 5.0);
  CHECK(W.grad()[3] == 7.0);
}

TEST_CASE("relu blocks gradient on the inactive side") {
  Tape tape;
  Tensor c = Tensor::from({3.0}, 1, 1, true);
  Tensor loss = tape.sum_all(tape.scalar_mul(tape.relu(tape.scalar_mul(c, -1.0)), 4.0));
  tape.backward(loss);
  CHECK(c.grad()[0] == 0.0);
}

TEST_CASE("gradient accumulates additively across uses") {
  Tape tape;
  Tensor x = Tensor::from({2.0}, 1, 1, true);
  // loss = x + x*x -> dL/dx = 1 + 2x = 5
  Tensor loss = tape.sum_all(tape.add(x, tape.hadamard(x, x)));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one") {
  Tape tape;
  std::mt19937_64 rng(7);
  Tensor x = Tensor::randn(5, 9, rng);
  Tensor s = tape.softmax_rows(x);
  for (int r = 0; r < s.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < s.cols(); ++c) sum += s.at(r, c);
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("finite differences confirm a composite gradient") {
  std::mt19937_64 rng(11);
  Tensor W = Tensor::glorot(4, 3, rng);
  Tensor b = Tensor::randn(1, 3, rng, true);
  Tensor x = Tensor::randn(5, 4, rng);
  auto value = [&]() {
    Tape tape;
    Tensor h = tape.leaky_relu(tape.add_rowvec(tape.matmul(x, W), b), 0.2);
    Tensor s = tape.softmax_rows(h);
    return tape.mean_all(tape.hadamard(s, h)).scalar();
  };
  auto compute = [&]() {
    Tape tape;
    Tensor h = tape.leaky_relu(tape.add_rowvec(tape.matmul(x, W), b), 0.2);
    Tensor s = tape.softmax_rows(h);
    tape.backward(tape.mean_all(tape.hadamard(s, h)));
  };
  FdOptions opt;
  FdReport rep = fd_gradient(value, compute, {{"W", W}, {"b", b}}, opt);
  CHECK(rep.pass(1e-4));
}

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  Tensor p = Tensor::from({1.0, -2.0}, 1, 2, true);
  p.zero_grad();
  std::vector<Tensor> params = {p};
  std::vector<AdamMoments> moments(1);
  adam_step(params, moments, AdamConfig{}, 1);
  CHECK(p.at(0, 0) == 1.0);
  CHECK(p.at(0, 1) == -2.0);
}

TEST_CASE("adam first step moves a unit gradient by about the learning rate") {
  Tensor p = Tensor::from({0.0}, 1, 1, true);
  std::vector<Tensor> params = {p};
  std::vector<AdamMoments> moments(1);
  params[0].node()->ensure_grad();
  params[0].grad()[0] = 1.0;
  adam_step(params, moments, AdamConfig{}, 1);
  // bias correction makes mhat/sqrt(vhat) = 1 at t=1, so the step is ~lr.
  CHECK(p.at(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam is deterministic for identical gradient sequences") {
  auto run = [&]() {
    Tensor p = Tensor::from({0.5, -0.25, 2.0}, 1, 3, true);
    std::vector<Tensor> params = {p};
    std::vector<AdamMoments> moments(1);
    for (int t = 1; t <= 7; ++t) {
      p.node()->ensure_grad();
      for (size_t i = 0; i < p.numel(); ++i) p.grad()[i] = 0.1 * (t + static_cast<double>(i));
      adam_step(params, moments, AdamConfig{}, t);
    }
    return p.data();
  };
  std::vector<double> a = run();
  std::vector<double> b = run();
  CHECK(a == b);
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  Tensor a = Tensor::zeros(2, 3);
  Tensor b = Tensor::zeros(3, 2);
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
  CHECK_THROWS(Tensor::from({1.0, 2.0}, 3, 1));
  CHECK_THROWS_AS(a.scalar(), std::invalid_argument);
}

TEST_CASE("row_gather and segment_sum validate indices") {
  Tape tape;
  Tensor x = Tensor::zeros(3, 2);
  std::vector<int> bad = {0, 5};
  CHECK_THROWS_AS(tape.row_gather(x, bad), std::invalid_argument);
  std::vector<int> unsorted = {1, 0, 1};
  CHECK_THROWS_AS(tape.segment_sum(x, unsorted, 2), std::invalid_argument);
}

TEST_CASE("dropout is identity outside training and validates p") {
  Tape tape;
  std::mt19937_64 rng(3);
  Tensor x = Tensor::randn(4, 4, rng);
  Tensor y = tape.dropout(x, 0.7, /*training=*/false, 42);
  CHECK(y.data() == x.data());
  CHECK_THROWS_AS(tape.dropout(x, 1.0, true, 42), ConfigError);
  CHECK_THROWS_AS(tape.dropout(x, -0.1, true, 42), ConfigError);
}

TEST_CASE("dropout keeps surviving entries inversely scaled and is seed-stable") {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::randn(16, 16, rng);
  Tape t1, t2;
  Tensor y1 = t1.dropout(x, 0.4, true, 99);
  Tensor y2 = t2.dropout(x, 0.4, true, 99);
  CHECK(y1.data() == y2.data());
  int kept = 0;
  for (size_t i = 0; i < x.numel(); ++i) {
    if (y1.data()[i] != 0.0) {
      ++kept;
      CHECK(y1.data()[i] == doctest::Approx(x.data()[i] / 0.6).epsilon(1e-12));
    }
  }
  CHECK(kept > 0);
  CHECK(kept < static_cast<int>(x.numel()));
}

TEST_CASE("a tape refuses to run backward twice") {
  Tape tape;
  Tensor x = Tensor::from({1.0}, 1, 1, true);
  Tensor loss = tape.sum_all(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::runtime_error);
}

TEST_CASE("concat_cols joins and routes gradients to both halves") {
  Tape tape;
  Tensor a = Tensor::from({1, 2}, 2, 1, true);
  Tensor b = Tensor::from({3, 4}, 2, 1, true);
  Tensor c = tape.concat_cols(a, b);
  CHECK(c.cols() == 2);
  CHECK(c.at(0, 1) == 3.0);
  Tensor w = Tensor::from({2, 0, 0, 5}, 2, 2);
  tape.backward(tape.sum_all(tape.hadamard(c, w)));
  CHECK(a.grad()[0] == 2.0);
  CHECK(a.grad()[1] == 0.0);
  CHECK(b.grad()[0] == 0.0);
  CHECK(b.grad()[1] == 5.0);
}

TEST_CASE("scale_rows broadcasts one scalar per row") {
  Tape tape;
  Tensor x = Tensor::from({1, 2, 3, 4}, 2, 2, true);
  Tensor s = Tensor::from({10, 100}, 2, 1, true);
  Tensor y = tape.scale_rows(x, s);
  CHECK(y.at(0, 1) == 20.0);
  CHECK(y.at(1, 0) == 300.0);
  tape.backward(tape.sum_all(y));
  CHECK(x.grad()[2] == 100.0);
  CHECK(s.grad()[1] == 7.0);  // 3 + 4
}
