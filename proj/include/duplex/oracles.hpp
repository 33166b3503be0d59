#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "duplex/common.hpp"
#include "duplex/tensor.hpp"

namespace duplex {

struct FdOptions {
  double eps = 1e-5;
  // Coordinates whose one-sided slopes disagree by more than this relative
  // amount are treated as kink-adjacent and skipped (abs/relu subgradients
  // legitimately differ from central differences there).
  double kink_slope_tol = 0.05;
  // Cap on probed coordinates per tensor (0 = all), deterministic subsample.
  int max_coords_per_tensor = 0;
  uint64_t subsample_seed = 0;
};

struct FdReport {
  double eps = 0.0;
  double max_rel_err = 0.0;
  std::string argmax_param;
  int argmax_index = -1;
  int tested = 0;
  int skipped_kink = 0;

  bool pass(double tol) const { return tested > 0 && max_rel_err <= tol; }
  std::string to_json() const;
};

// Central-difference check of reverse-mode gradients. `loss_value` evaluates
// the objective at the current parameter values; `compute_grads` must fill
// each parameter's grad (fd_gradient zeroes them first). Relative error uses
// denominator max(1, |fd|, |analytic|).
FdReport fd_gradient(const std::function<double()>& loss_value,
                     const std::function<void()>& compute_grads,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const FdOptions& opts = {});

// Mean over all (positive, negative) pairs of 1[s_p > s_n] + 0.5*1[s_p == s_n].
double auc_bruteforce(std::span<const double> scores, std::span<const int> labels);

struct SvdResult {
  Matrix U;                   // m x d, orthonormal columns (zero where sigma=0)
  std::vector<double> sigma;  // d values, descending, nonnegative
  Matrix V;                   // n x d
};

// One-sided Jacobi SVD for matrices up to 64x64, truncated to rank d.
SvdResult truncated_svd_small(const Matrix& m, int d, double tol = 1e-12, int max_sweeps = 100);

struct SinkRowReport {
  bool skipped = false;  // degenerate spectrum
  std::string note;
  std::vector<int> zero_out_rows;
  double max_zero_row_norm = 0.0;  // max norm of those rows in U*sqrt(Sigma)
  bool ham_rows_nonzero = true;    // every such node with in-edges has a nonzero
                                   // row in the complex relation matrix
  std::string to_json() const;
};

// Demonstrates that rows of the rank-d source embedding U*Sigma^(1/2) of a
// plain adjacency matrix vanish for zero-out-degree nodes, while the complex
// relation matrix keeps those rows nonzero whenever the node has in-edges.
SinkRowReport sink_row_check(const Matrix& adjacency, int d);

struct GradcheckResult {
  std::string name;
  FdReport report;
  bool pass = false;
};

// Operator-level and end-to-end finite-difference suite. `ops` filters cases
// by name (empty = all); inject_fault corrupts one analytic gradient as a
// negative control, which must surface as a failure.
std::vector<GradcheckResult> gradcheck_suite(const std::vector<std::string>& ops,
                                             bool inject_fault, uint64_t seed, double tol = 1e-4);

}  // namespace duplex
