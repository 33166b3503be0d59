#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "duplex/graph.hpp"
#include "duplex/oracles.hpp"
#include "duplex/tensor.hpp"

using namespace duplex;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  Matrix m(r, c);
  for (double& v : m.v) v = N(rng);
  return m;
}

Matrix matmul_ref(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k)
      for (int j = 0; j < b.cols; ++j) out.at(i, j) += a.at(i, k) * b.at(k, j);
  return out;
}

Matrix adjacency_of(const DiGraph& g) {
  Matrix A(g.num_nodes, g.num_nodes);
  for (auto [u, v] : g.edges) A.at(u, v) = 1.0;
  return A;
}

}  // namespace

TEST_CASE("central differences recover a quadratic gradient") {
  Tensor x = Tensor::from({1.0, 2.0}, 1, 2, true);
  auto value = [&]() {
    Tape tape;
    return tape.sum_all(tape.hadamard(x, x)).scalar();
  };
  auto compute = [&]() {
    Tape tape;
    tape.backward(tape.sum_all(tape.hadamard(x, x)));
  };
  FdReport rep = fd_gradient(value, compute, {{"x", x}}, {});
  CHECK(rep.tested == 2);
  CHECK(rep.skipped_kink == 0);
  CHECK(rep.pass(1e-6));
  // the analytic gradient itself is 2x
  x.zero_grad();
  compute();
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("coordinates at a kink are skipped, not failed") {
  Tensor x = Tensor::from({0.0, 1.0}, 1, 2, true);  // abs has a kink at 0
  auto value = [&]() {
    Tape tape;
    return tape.sum_all(tape.abs(x)).scalar();
  };
  auto compute = [&]() {
    Tape tape;
    tape.backward(tape.sum_all(tape.abs(x)));
  };
  FdReport rep = fd_gradient(value, compute, {{"x", x}}, {});
  CHECK(rep.skipped_kink == 1);
  CHECK(rep.tested == 1);
  CHECK(rep.pass(1e-6));
}

TEST_CASE("a wrong analytic gradient is caught") {
  Tensor x = Tensor::from({1.5}, 1, 1, true);
  auto value = [&]() {
    Tape tape;
    return tape.sum_all(tape.hadamard(x, x)).scalar();
  };
  auto compute = [&]() {
    Tape tape;
    tape.backward(tape.sum_all(tape.hadamard(x, x)));
    x.grad()[0] += 0.25;  // sabotage
  };
  FdReport rep = fd_gradient(value, compute, {{"x", x}}, {});
  CHECK(!rep.pass(1e-4));
  CHECK(rep.argmax_param == "x");
  CHECK(rep.argmax_index == 0);
}

TEST_CASE("coordinate subsampling respects the cap deterministically") {
  std::mt19937_64 rng(3);
  Tensor x = Tensor::randn(10, 10, rng, true);
  auto value = [&]() {
    Tape tape;
    return tape.sum_all(tape.hadamard(x, x)).scalar();
  };
  auto compute = [&]() {
    Tape tape;
    tape.backward(tape.sum_all(tape.hadamard(x, x)));
  };
  FdOptions opt;
  opt.max_coords_per_tensor = 7;
  opt.subsample_seed = 11;
  FdReport a = fd_gradient(value, compute, {{"x", x}}, opt);
  FdReport b = fd_gradient(value, compute, {{"x", x}}, opt);
  CHECK(a.tested == 7);
  CHECK(b.tested == 7);
  CHECK(a.max_rel_err == b.max_rel_err);
  CHECK(a.pass(1e-5));
}

TEST_CASE("quadratic-pair AUC reference behaves on the boundary cases") {
  std::vector<double> s = {3.0, 2.0, 2.0, 1.0};
  std::vector<int> l = {1, 1, 0, 0};
  // pairs: (3,2)=1 (3,1)=1 (2,2)=0.5 (2,1)=1 -> 3.5/4
  CHECK(auc_bruteforce(s, l) == doctest::Approx(0.875).epsilon(1e-15));
  std::vector<double> one = {1.0};
  std::vector<int> only_pos = {1};
  CHECK_THROWS(auc_bruteforce(one, only_pos));
}

TEST_CASE("jacobi svd reproduces an identity matrix") {
  Matrix I(4, 4);
  for (int i = 0; i < 4; ++i) I.at(i, i) = 1.0;
  SvdResult svd = truncated_svd_small(I, 4);
  for (double s : svd.sigma) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  Matrix recon = matmul_ref(svd.U, [&] {
    Matrix SVt(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) SVt.at(i, j) = svd.sigma[i] * svd.V.at(j, i);
    return SVt;
  }());
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(recon.at(i, j) == doctest::Approx(I.at(i, j)).epsilon(1e-10));
}

TEST_CASE("jacobi svd nails a planted rank-1 matrix") {
  // m = 3 * u v^T with |u| = |v| = 1
  Matrix m(3, 2);
  const double u[3] = {2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0};
  const double v[2] = {0.6, 0.8};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) m.at(i, j) = 3.0 * u[i] * v[j];
  SvdResult svd = truncated_svd_small(m, 2);
  CHECK(svd.sigma[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(svd.sigma[1] == doctest::Approx(0.0).epsilon(1e-10));
  // leading singular vectors match up to sign
  double dot_u = 0.0;
  for (int i = 0; i < 3; ++i) dot_u += svd.U.at(i, 0) * u[i];
  CHECK(std::fabs(dot_u) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("jacobi svd reconstructs random matrices with orthonormal factors") {
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Matrix m = random_matrix(8, 8, seed);
    SvdResult svd = truncated_svd_small(m, 8);
    for (size_t i = 1; i < svd.sigma.size(); ++i) CHECK(svd.sigma[i - 1] >= svd.sigma[i]);
    // orthonormal columns on both sides
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        double du = 0.0, dv = 0.0;
        for (int r = 0; r < 8; ++r) {
          du += svd.U.at(r, a) * svd.U.at(r, b);
          dv += svd.V.at(r, a) * svd.V.at(r, b);
        }
        CHECK(du == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
        CHECK(dv == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
      }
    // full-rank truncation reconstructs the input
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        double r = 0.0;
        for (int k = 0; k < 8; ++k) r += svd.U.at(i, k) * svd.sigma[k] * svd.V.at(j, k);
        CHECK(r == doctest::Approx(m.at(i, j)).epsilon(1e-8));
      }
  }
}

TEST_CASE("truncation keeps the dominant directions") {
  Matrix m(6, 6);
  // diagonal 6,5,...,1: best rank-2 approximation keeps 6 and 5
  for (int i = 0; i < 6; ++i) m.at(i, i) = 6.0 - i;
  SvdResult svd = truncated_svd_small(m, 2);
  REQUIRE(svd.sigma.size() == 2);
  CHECK(svd.sigma[0] == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(svd.sigma[1] == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(svd.U.cols == 2);
  CHECK(svd.V.cols == 2);
}

TEST_CASE("source embeddings of a plain adjacency vanish for sink nodes") {
  // 0 -> 1, 0 -> 2, 1 -> 2: node 2 has no outgoing edges.
  Matrix A(3, 3);
  A.at(0, 1) = A.at(0, 2) = A.at(1, 2) = 1.0;
  SinkRowReport rep = sink_row_check(A, 2);
  CHECK(!rep.skipped);
  REQUIRE(rep.zero_out_rows == std::vector<int>{2});
  CHECK(rep.max_zero_row_norm <= 1e-10);
  CHECK(rep.ham_rows_nonzero);  // 2 has in-edges, so its complex row survives
}

TEST_CASE("sink rows stay degenerate across random digraphs") {
  std::mt19937_64 rng(97);
  int checked = 0;
  for (uint64_t seed = 0; checked < 5 && seed < 40; ++seed) {
    const int n = 6 + static_cast<int>(seed % 3);
    std::vector<Edge> edges;
    for (int u = 0; u < n - 1; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && rng() % 3 == 0) edges.push_back({u, v});
    // force at least one sink with in-edges
    edges.push_back({0, n - 1});
    DiGraph g = DiGraph::from_edges(n, edges);
    if (g.out_degree(n - 1) != 0) continue;
    SinkRowReport rep = sink_row_check(adjacency_of(g), 4);
    if (rep.skipped) continue;
    ++checked;
    CHECK(!rep.zero_out_rows.empty());
    CHECK(rep.max_zero_row_norm <= 1e-10);
    CHECK(rep.ham_rows_nonzero);
  }
  CHECK(checked == 5);
}

TEST_CASE("the operator gradient suite passes wholesale") {
  std::vector<GradcheckResult> results = gradcheck_suite({}, false, 0);
  CHECK(results.size() >= 30);
  bool saw_encoder = false, saw_loss = false;
  for (const auto& r : results) {
    INFO(r.name, ": ", r.report.to_json());
    CHECK(r.pass);
    if (r.name.rfind("encoder", 0) == 0) saw_encoder = true;
    if (r.name.rfind("loss", 0) == 0) saw_loss = true;
  }
  CHECK(saw_encoder);
  CHECK(saw_loss);
}

TEST_CASE("the gradient suite flags an injected fault") {
  std::vector<GradcheckResult> results = gradcheck_suite({"matmul"}, true, 0);
  REQUIRE(results.size() == 1);
  CHECK(!results[0].pass);
  CHECK(results[0].report.max_rel_err > 1e-4);
}

TEST_CASE("the gradient suite filters by case name") {
  std::vector<GradcheckResult> two = gradcheck_suite({"relu", "sigmoid"}, false, 0);
  REQUIRE(two.size() == 2);
  CHECK(two[0].name == "relu");
  CHECK(two[1].name == "sigmoid");
  CHECK(two[0].pass);
  CHECK(two[1].pass);
}
