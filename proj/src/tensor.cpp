#include "duplex/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace duplex {

namespace {

using ERow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const ERow>;
using MapM = Eigen::Map<ERow>;

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
  throw std::invalid_argument(os.str());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

}  // namespace

std::string hex64(uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[x & 0xf];
    x >>= 4;
  }
  return s;
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
  if (rows <= 0 || cols <= 0) throw ConfigError("tensor: non-positive shape");
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->data.assign(static_cast<size_t>(rows) * cols, value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<double> values, int rows, int cols, bool requires_grad) {
  if (values.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("tensor: data length does not match shape");
  Tensor t = zeros(rows, cols, requires_grad);
  t.data() = std::move(values);
  return t;
}

Tensor Tensor::randn(int rows, int cols, std::mt19937_64& rng, bool requires_grad) {
  Tensor t = zeros(rows, cols, requires_grad);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& x : t.data()) x = dist(rng);
  return t;
}

Tensor Tensor::glorot(int rows, int cols, std::mt19937_64& rng, bool requires_grad) {
  Tensor t = zeros(rows, cols, requires_grad);
  double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : t.data()) x = dist(rng);
  return t;
}

double Tensor::scalar() const {
  if (rows() != 1 || cols() != 1) throw std::invalid_argument("scalar(): tensor is not 1x1");
  return node_->data[0];
}

Matrix Tensor::to_matrix() const {
  Matrix m(rows(), cols());
  m.v = node_->data;
  return m;
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return from(m.v, m.rows, m.cols, requires_grad);
}

Tensor Tape::make_op(int rows, int cols, bool requires_grad, std::vector<TensorNodePtr> parents) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->data.assign(static_cast<size_t>(rows) * cols, 0.0);
  n->requires_grad = requires_grad;
  n->parents = std::move(parents);
  order_.push_back(n);
  return Tensor(n);
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Tensor out = make_op(a.rows(), b.cols(), a.requires_grad() || b.requires_grad(),
                       {a.ptr(), b.ptr()});
  auto *an = a.node(), *bn = b.node(), *on = out.node();
  MapC A(an->data.data(), an->rows, an->cols);
  MapC B(bn->data.data(), bn->rows, bn->cols);
  MapM C(on->data.data(), on->rows, on->cols);
  C.noalias() = A * B;
  if (out.requires_grad()) {
    on->backward_fn = [an, bn, on] {
      MapC A(an->data.data(), an->rows, an->cols);
      MapC B(bn->data.data(), bn->rows, bn->cols);
      MapC G(on->grad.data(), on->rows, on->cols);
      if (an->requires_grad) {
        an->ensure_grad();
        MapM dA(an->grad.data(), an->rows, an->cols);
        dA.noalias() += G * B.transpose();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        MapM dB(bn->grad.data(), bn->rows, bn->cols);
        dB.noalias() += A.transpose() * G;
      }
    };
  }
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = make_op(a.rows(), a.cols(), a.requires_grad() || b.requires_grad(),
                       {a.ptr(), b.ptr()});
  auto *an = a.node(), *bn = b.node(), *on = out.node();
  for (size_t i = 0; i < on->data.size(); ++i) on->data[i] = an->data[i] + bn->data[i];
  if (out.requires_grad()) {
    on->backward_fn = [an, bn, on] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
      }
    };
  }
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = make_op(a.rows(), a.cols(), a.requires_grad() || b.requires_grad(),
                       {a.ptr(), b.ptr()});
  auto *an = a.node(), *bn = b.node(), *on = out.node();
  for (size_t i = 0; i < on->data.size(); ++i) on->data[i] = an->data[i] - bn->data[i];
  if (out.requires_grad()) {
    on->backward_fn = [an, bn, on] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
      }
    };
  }
  return out;
}

Tensor Tape::hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  Tensor out = make_op(a.rows(), a.cols(), a.requires_grad() || b.requires_grad(),
                       {a.ptr(), b.ptr()});
  auto *an = a.node(), *bn = b.node(), *on = out.node();
  for (size_t i = 0; i < on->data.size(); ++i) on->data[i] = an->data[i] * bn->data[i];
  if (out.requires_grad()) {
    on->backward_fn = [an, bn, on] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->data[i];
      }
    };
  }
  return out;
}

Tensor Tape::scalar_mul(const Tensor& a, double s) {
  Tensor out = make_op(a.rows(), a.cols(), a.requires_grad(), {a.ptr()});
  auto *an = a.node(), *on = out.node();
  for (size_t i = 0; i < on->data.size(); ++i) on->data[i] = an->data[i] * s;
  if (out.requires_grad()) {
    on->backward_fn = [an, on, s] {
      an->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * s;
    };
  }
  return out;
}

Tensor Tape::add_rowvec(const Tensor& x, const Tensor& r) {
  if (r.rows() != 1 || r.cols() != x.cols()) shape_error("add_rowvec", x, r);
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad() || r.requires_grad(),
                       {x.ptr(), r.ptr()});
  auto *xn = x.node(), *rn = r.node(), *on = out.node();
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j)
      on->data[static_cast<size_t>(i) * x.cols() + j] =
          xn->data[static_cast<size_t>(i) * x.cols() + j] + rn->data[j];
  if (out.requires_grad()) {
    on->backward_fn = [xn, rn, on] {
      const int rows = on->rows, cols = on->cols;
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) rn->grad[j] += on->grad[static_cast<size_t>(i) * cols + j];
      }
    };
  }
  return out;
}

Tensor Tape::add_colvec(const Tensor& x, const Tensor& c) {
  if (c.cols() != 1 || c.rows() != x.rows()) shape_error("add_colvec", x, c);
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad() || c.requires_grad(),
                       {x.ptr(), c.ptr()});
  auto *xn = x.node(), *cn = c.node(), *on = out.node();
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j)
      on->data[static_cast<size_t>(i) * x.cols() + j] =
          xn->data[static_cast<size_t>(i) * x.cols() + j] + cn->data[i];
  if (out.requires_grad()) {
    on->backward_fn = [xn, cn, on] {
      const int rows = on->rows, cols = on->cols;
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
      }
      if (cn->requires_grad) {
        cn->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) cn->grad[i] += on->grad[static_cast<size_t>(i) * cols + j];
      }
    };
  }
  return out;
}

Tensor Tape::scale_rows(const Tensor& x, const Tensor& s) {
  if (s.cols() != 1 || s.rows() != x.rows()) shape_error("scale_rows", x, s);
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad() || s.requires_grad(),
                       {x.ptr(), s.ptr()});
  auto *xn = x.node(), *sn = s.node(), *on = out.node();
  for (int i = 0; i < x.rows(); ++i) {
    const double si = sn->data[i];
    for (int j = 0; j < x.cols(); ++j)
      on->data[static_cast<size_t>(i) * x.cols() + j] =
          xn->data[static_cast<size_t>(i) * x.cols() + j] * si;
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, sn, on] {
      const int rows = on->rows, cols = on->cols;
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
          const double si = sn->data[i];
          for (int j = 0; j < cols; ++j)
            xn->grad[static_cast<size_t>(i) * cols + j] +=
                on->grad[static_cast<size_t>(i) * cols + j] * si;
        }
      }
      if (sn->requires_grad) {
        sn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
          double acc = 0.0;
          for (int j = 0; j < cols; ++j)
            acc += on->grad[static_cast<size_t>(i) * cols + j] *
                   xn->data[static_cast<size_t>(i) * cols + j];
          sn->grad[i] += acc;
        }
      }
    };
  }
  return out;
}

Tensor Tape::row_gather(const Tensor& x, std::span<const int> index) {
  for (int idx : index)
    if (idx < 0 || idx >= x.rows())
      throw std::invalid_argument("row_gather: index " + std::to_string(idx) + " out of range [0," +
                                  std::to_string(x.rows()) + ")");
  Tensor out = make_op(static_cast<int>(index.size()), x.cols(), x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  const int cols = x.cols();
  std::vector<int> idx(index.begin(), index.end());
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(xn->data.data() + static_cast<size_t>(idx[i]) * cols, cols,
                on->data.data() + i * cols);
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, idx = std::move(idx), cols] {
      xn->ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i) {
        double* dst = xn->grad.data() + static_cast<size_t>(idx[i]) * cols;
        const double* src = on->grad.data() + i * cols;
        for (int j = 0; j < cols; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

Tensor Tape::segment_sum(const Tensor& x, std::span<const int> segment, int num_segments) {
  if (segment.size() != static_cast<size_t>(x.rows()))
    throw std::invalid_argument("segment_sum: segment id count does not match rows");
  for (size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= num_segments)
      throw std::invalid_argument("segment_sum: segment id out of range");
    if (i > 0 && segment[i] < segment[i - 1])
      throw std::invalid_argument("segment_sum: segment ids are not sorted");
  }
  Tensor out = make_op(num_segments, x.cols(), x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  const int cols = x.cols();
  std::vector<int> seg(segment.begin(), segment.end());
  for (size_t i = 0; i < seg.size(); ++i) {
    double* dst = on->data.data() + static_cast<size_t>(seg[i]) * cols;
    const double* src = xn->data.data() + i * cols;
    for (int j = 0; j < cols; ++j) dst[j] += src[j];
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, seg = std::move(seg), cols] {
      xn->ensure_grad();
      for (size_t i = 0; i < seg.size(); ++i) {
        double* dst = xn->grad.data() + i * cols;
        const double* src = on->grad.data() + static_cast<size_t>(seg[i]) * cols;
        for (int j = 0; j < cols; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
  const int ca = a.cols(), cb = b.cols();
  Tensor out = make_op(a.rows(), ca + cb, a.requires_grad() || b.requires_grad(),
                       {a.ptr(), b.ptr()});
  auto *an = a.node(), *bn = b.node(), *on = out.node();
  for (int i = 0; i < a.rows(); ++i) {
    std::copy_n(an->data.data() + static_cast<size_t>(i) * ca, ca,
                on->data.data() + static_cast<size_t>(i) * (ca + cb));
    std::copy_n(bn->data.data() + static_cast<size_t>(i) * cb, cb,
                on->data.data() + static_cast<size_t>(i) * (ca + cb) + ca);
  }
  if (out.requires_grad()) {
    on->backward_fn = [an, bn, on, ca, cb] {
      const int rows = on->rows;
      if (an->requires_grad) {
        an->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < ca; ++j)
            an->grad[static_cast<size_t>(i) * ca + j] +=
                on->grad[static_cast<size_t>(i) * (ca + cb) + j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cb; ++j)
            bn->grad[static_cast<size_t>(i) * cb + j] +=
                on->grad[static_cast<size_t>(i) * (ca + cb) + ca + j];
      }
    };
  }
  return out;
}

#define DUPLEX_ELEMENTWISE(NAME, FWD_EXPR, BWD_EXPR)                                       \
  Tensor Tape::NAME(const Tensor& x) {                                                     \
    Tensor out = make_op(x.rows(), x.cols(), x.requires_grad(), {x.ptr()});                \
    auto *xn = x.node(), *on = out.node();                                                 \
    for (size_t i = 0; i < on->data.size(); ++i) {                                         \
      const double v = xn->data[i];                                                        \
      (void)v;                                                                             \
      on->data[i] = (FWD_EXPR);                                                            \
    }                                                                                      \
    if (out.requires_grad()) {                                                             \
      on->backward_fn = [xn, on] {                                                         \
        xn->ensure_grad();                                                                 \
        for (size_t i = 0; i < on->grad.size(); ++i) {                                     \
          const double v = xn->data[i];                                                    \
          const double y = on->data[i];                                                    \
          (void)v;                                                                         \
          (void)y;                                                                         \
          xn->grad[i] += on->grad[i] * (BWD_EXPR);                                         \
        }                                                                                  \
      };                                                                                   \
    }                                                                                      \
    return out;                                                                            \
  }

DUPLEX_ELEMENTWISE(relu, v > 0 ? v : 0.0, v > 0 ? 1.0 : 0.0)
DUPLEX_ELEMENTWISE(exp, std::exp(v), y)
DUPLEX_ELEMENTWISE(log, std::log(v), 1.0 / v)
DUPLEX_ELEMENTWISE(sigmoid, 1.0 / (1.0 + std::exp(-v)), y*(1.0 - y))
DUPLEX_ELEMENTWISE(sin, std::sin(v), std::cos(v))
DUPLEX_ELEMENTWISE(cos, std::cos(v), -std::sin(v))
DUPLEX_ELEMENTWISE(abs, std::fabs(v), v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0))
DUPLEX_ELEMENTWISE(sqrt, std::sqrt(v), 0.5 / y)

#undef DUPLEX_ELEMENTWISE

Tensor Tape::leaky_relu(const Tensor& x, double slope) {
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  for (size_t i = 0; i < on->data.size(); ++i) {
    const double v = xn->data[i];
    on->data[i] = v > 0 ? v : slope * v;
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, slope] {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i)
        xn->grad[i] += on->grad[i] * (xn->data[i] > 0 ? 1.0 : slope);
    };
  }
  return out;
}

Tensor Tape::softmax_rows(const Tensor& x) {
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  const int cols = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = xn->data.data() + static_cast<size_t>(i) * cols;
    double* o = on->data.data() + static_cast<size_t>(i) * cols;
    double mx = in[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (int j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (int j = 0; j < cols; ++j) o[j] /= z;
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, cols] {
      xn->ensure_grad();
      for (int i = 0; i < on->rows; ++i) {
        const double* y = on->data.data() + static_cast<size_t>(i) * cols;
        const double* g = on->grad.data() + static_cast<size_t>(i) * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += y[j] * g[j];
        double* dx = xn->grad.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dx[j] += y[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

Tensor Tape::dropout(const Tensor& x, double p, bool training, uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
  if (!training || p == 0.0) return x;
  Tensor out = make_op(x.rows(), x.cols(), x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  const double scale = 1.0 / (1.0 - p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<float> mask(on->data.size());
  for (size_t i = 0; i < on->data.size(); ++i) {
    mask[i] = uni(rng) >= p ? 1.0f : 0.0f;
    on->data[i] = xn->data[i] * mask[i] * scale;
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, mask = std::move(mask), scale] {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * mask[i] * scale;
    };
  }
  return out;
}

Tensor Tape::sum_all(const Tensor& x) {
  Tensor out = make_op(1, 1, x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  double acc = 0.0;
  for (double v : xn->data) acc += v;
  on->data[0] = acc;
  if (out.requires_grad()) {
    on->backward_fn = [xn, on] {
      xn->ensure_grad();
      const double g = on->grad[0];
      for (auto& d : xn->grad) d += g;
    };
  }
  return out;
}

Tensor Tape::mean_all(const Tensor& x) {
  Tensor out = make_op(1, 1, x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  double acc = 0.0;
  for (double v : xn->data) acc += v;
  const double inv = 1.0 / static_cast<double>(xn->data.size());
  on->data[0] = acc * inv;
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, inv] {
      xn->ensure_grad();
      const double g = on->grad[0] * inv;
      for (auto& d : xn->grad) d += g;
    };
  }
  return out;
}

Tensor Tape::row_sum(const Tensor& x) {
  Tensor out = make_op(x.rows(), 1, x.requires_grad(), {x.ptr()});
  auto *xn = x.node(), *on = out.node();
  const int cols = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    const double* in = xn->data.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += in[j];
    on->data[i] = acc;
  }
  if (out.requires_grad()) {
    on->backward_fn = [xn, on, cols] {
      xn->ensure_grad();
      for (int i = 0; i < on->rows; ++i) {
        const double g = on->grad[i];
        double* dx = xn->grad.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dx[j] += g;
      }
    };
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar tensor");
  if (backward_done_) throw std::runtime_error("backward: tape already differentiated");
  backward_done_ = true;
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorNode* n = it->get();
    if (n->backward_fn && !n->grad.empty()) n->backward_fn();
  }
}

void adam_step(std::span<Tensor> params, std::vector<AdamMoments>& moments, const AdamConfig& cfg,
               int64_t t) {
  if (t <= 0) throw std::invalid_argument("adam_step: step index must be >= 1");
  if (moments.size() != params.size()) moments.resize(params.size());
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& param = params[p];
    param.node()->ensure_grad();
    auto& m = moments[p].m;
    auto& v = moments[p].v;
    if (m.size() != param.numel()) m.assign(param.numel(), 0.0);
    if (v.size() != param.numel()) v.assign(param.numel(), 0.0);
    auto& data = param.data();
    auto& grad = param.grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    param.zero_grad();
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
  ++t_;
  adam_step(params_, moments_, cfg_, t_);
}

}  // namespace duplex
