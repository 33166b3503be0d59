#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "duplex/common.hpp"

namespace duplex {

struct TensorNode;
using TensorNodePtr = std::shared_ptr<TensorNode>;

// Dense 2-D real tensor (64-bit). Shapes are rows x cols; scalars are 1x1.
// A Tensor is a cheap handle; the node owns data, the lazily allocated grad
// accumulator, and (for op results) the backward closure.
struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  std::function<void()> backward_fn;  // empty for leaves
  std::vector<TensorNodePtr> parents;

  size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorNodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value, bool requires_grad = false);
  static Tensor from(std::vector<double> values, int rows, int cols, bool requires_grad = false);
  // i.i.d. standard normal entries.
  static Tensor randn(int rows, int cols, std::mt19937_64& rng, bool requires_grad = false);
  // Glorot-uniform fan-based init for weight matrices (fan_in = rows, fan_out = cols).
  static Tensor glorot(int rows, int cols, std::mt19937_64& rng, bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  double at(int r, int c) const { return node_->data[static_cast<size_t>(r) * cols() + c]; }
  double& at(int r, int c) { return node_->data[static_cast<size_t>(r) * cols() + c]; }
  double scalar() const;  // value of a 1x1 tensor

  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  Matrix to_matrix() const;
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

  TensorNode* node() const { return node_.get(); }
  const TensorNodePtr& ptr() const { return node_; }

 private:
  TensorNodePtr node_;
};

// Records op nodes in forward execution order; backward() replays the exact
// reverse order, accumulating gradients additively into every consumer.
class Tape {
 public:
  // -- binary / broadcast arithmetic --------------------------------------
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor hadamard(const Tensor& a, const Tensor& b);
  Tensor scalar_mul(const Tensor& a, double s);
  // X (n x d) plus a broadcast 1 x d row vector / n x 1 column vector.
  Tensor add_rowvec(const Tensor& x, const Tensor& r);
  Tensor add_colvec(const Tensor& x, const Tensor& c);
  // Row i of x scaled by s[i] (s is n x 1).
  Tensor scale_rows(const Tensor& x, const Tensor& s);

  // -- structure ops -------------------------------------------------------
  Tensor row_gather(const Tensor& x, std::span<const int> index);
  // segment ids must be sorted non-decreasing and < num_segments.
  Tensor segment_sum(const Tensor& x, std::span<const int> segment, int num_segments);
  Tensor concat_cols(const Tensor& a, const Tensor& b);

  // -- elementwise ---------------------------------------------------------
  Tensor relu(const Tensor& x);
  Tensor leaky_relu(const Tensor& x, double slope);
  Tensor exp(const Tensor& x);
  Tensor log(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor sin(const Tensor& x);
  Tensor cos(const Tensor& x);
  Tensor abs(const Tensor& x);   // subgradient 0 at 0
  Tensor sqrt(const Tensor& x);  // derivative unbounded at 0; callers avoid the kink

  Tensor softmax_rows(const Tensor& x);
  // Inverted dropout: retained entries scaled by 1/(1-p); identity when not
  // training. Mask drawn from the given seed.
  Tensor dropout(const Tensor& x, double p, bool training, uint64_t seed);

  // -- reductions ----------------------------------------------------------
  Tensor sum_all(const Tensor& x);
  Tensor mean_all(const Tensor& x);
  // n x 1 vector of row sums (composed primitive, has its own backward).
  Tensor row_sum(const Tensor& x);

  // Fills grads of every requires_grad leaf reachable from `loss` (1x1).
  // Calling twice on one tape is an error.
  void backward(const Tensor& loss);

  size_t size() const { return order_.size(); }

 private:
  Tensor make_op(int rows, int cols, bool requires_grad, std::vector<TensorNodePtr> parents);
  std::vector<TensorNodePtr> order_;
  bool backward_done_ = false;
};

// Per-parameter Adam moment buffers.
struct AdamMoments {
  std::vector<double> m, v;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam update at step t (t >= 1); zeroes grads after.
void adam_step(std::span<Tensor> params, std::vector<AdamMoments>& moments, const AdamConfig& cfg,
               int64_t t);

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});
  void step();
  int64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace duplex
