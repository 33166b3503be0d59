#include "duplex/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include <json.hpp>

#include "duplex/encoder.hpp"
#include "duplex/graph.hpp"
#include "duplex/objective.hpp"

namespace duplex {

using json = nlohmann::json;

std::string FdReport::to_json() const {
  json j = {{"eps", eps},           {"max_rel_err", max_rel_err}, {"argmax_param", argmax_param},
            {"argmax_index", argmax_index}, {"tested", tested},   {"skipped_kink", skipped_kink}};
  return j.dump(2);
}

FdReport fd_gradient(const std::function<double()>& loss_value,
                     const std::function<void()>& compute_grads,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const FdOptions& opts) {
  FdReport rep;
  rep.eps = opts.eps;

  for (const auto& [name, t] : params) t.node()->grad.assign(t.numel(), 0.0);
  compute_grads();

  std::mt19937_64 rng(opts.subsample_seed);
  for (const auto& [name, t] : params) {
    std::vector<size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), size_t{0});
    if (opts.max_coords_per_tensor > 0 &&
        coords.size() > static_cast<size_t>(opts.max_coords_per_tensor)) {
      for (size_t i = coords.size(); i > 1; --i)
        std::swap(coords[i - 1], coords[bounded_rand(rng, i)]);
      coords.resize(opts.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto& data = t.node()->data;
    const auto& grad = t.node()->grad;
    for (size_t c : coords) {
      const double saved = data[c];
      data[c] = saved + opts.eps;
      const double f_plus = loss_value();
      data[c] = saved - opts.eps;
      const double f_minus = loss_value();
      data[c] = saved;
      const double f_mid = loss_value();

      const double slope_plus = (f_plus - f_mid) / opts.eps;
      const double slope_minus = (f_mid - f_minus) / opts.eps;
      const double slope_scale = std::max({1.0, std::fabs(slope_plus), std::fabs(slope_minus)});
      if (std::fabs(slope_plus - slope_minus) / slope_scale > opts.kink_slope_tol) {
        ++rep.skipped_kink;
        continue;
      }
      const double fd = (f_plus - f_minus) / (2.0 * opts.eps);
      const double an = grad.empty() ? 0.0 : grad[c];
      double rel = std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
      // NaN/inf anywhere is a hard failure, never a silent pass
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      ++rep.tested;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.argmax_param = name;
        rep.argmax_index = static_cast<int>(c);
      }
    }
  }
  return rep;
}

double auc_bruteforce(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_bruteforce: size mismatch");
  long long n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc_bruteforce: need both classes present");
  double acc = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j])
        acc += 1.0;
      else if (scores[i] == scores[j])
        acc += 0.5;
    }
  }
  return acc / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SvdResult truncated_svd_small(const Matrix& m, int d, double tol, int max_sweeps) {
  if (m.rows > 64 || m.cols > 64) throw ConfigError("truncated_svd_small: matrix exceeds 64x64");
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("truncated_svd_small: empty matrix");
  if (m.cols > m.rows) {
    // Work on the transpose and swap factors: M^T = V Sigma U^T.
    Matrix mt(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) mt.at(j, i) = m.at(i, j);
    SvdResult r = truncated_svd_small(mt, d, tol, max_sweeps);
    std::swap(r.U, r.V);
    return r;
  }
  if (d < 1 || d > m.cols) throw std::invalid_argument("truncated_svd_small: bad rank");

  const int rows = m.rows, cols = m.cols;
  Matrix w = m;                 // columns get orthogonalized in place
  Matrix v(cols, cols, 0.0);    // accumulated right rotations
  for (int i = 0; i < cols; ++i) v.at(i, i) = 1.0;

  auto col_dot = [&](const Matrix& mat, int p, int q) {
    double s = 0.0;
    for (int i = 0; i < mat.rows; ++i) s += mat.at(i, p) * mat.at(i, q);
    return s;
  };
  auto rotate = [&](Matrix& mat, int p, int q, double cs, double sn) {
    for (int i = 0; i < mat.rows; ++i) {
      const double a = mat.at(i, p), b = mat.at(i, q);
      mat.at(i, p) = cs * a - sn * b;
      mat.at(i, q) = sn * a + cs * b;
    }
  };

  // Columns annihilated by rotations retain denormal-level residue on
  // rank-deficient inputs; their pair updates then stall below rounding
  // precision. Flush them to exact zero against an absolute floor.
  double fro2 = 0.0;
  for (double x : m.v) fro2 += x * x;
  const double col_floor2 = fro2 * 1e-28;  // (1e-14 * ||M||_F)^2

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (int j = 0; j < cols; ++j) {
      if (col_dot(w, j, j) <= col_floor2)
        for (int i = 0; i < rows; ++i) w.at(i, j) = 0.0;
    }
    for (int p = 0; p < cols - 1; ++p) {
      for (int q = p + 1; q < cols; ++q) {
        const double app = col_dot(w, p, p);
        const double aqq = col_dot(w, q, q);
        const double apq = col_dot(w, p, q);
        if (std::fabs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        converged = false;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double tt = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + tt * tt);
        const double sn = cs * tt;
        rotate(w, p, q, cs, sn);
        rotate(v, p, q, cs, sn);
      }
    }
  }
  if (!converged)
    throw std::runtime_error("truncated_svd_small: Jacobi did not converge within sweep limit");

  std::vector<int> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> norms(cols);
  for (int j = 0; j < cols; ++j) norms[j] = std::sqrt(col_dot(w, j, j));
  std::sort(order.begin(), order.end(), [&](int a, int b) { return norms[a] > norms[b]; });

  SvdResult out;
  out.U = Matrix(rows, d);
  out.V = Matrix(cols, d);
  out.sigma.resize(d);
  for (int k = 0; k < d; ++k) {
    const int j = order[k];
    out.sigma[k] = norms[j];
    if (norms[j] > 0.0)
      for (int i = 0; i < rows; ++i) out.U.at(i, k) = w.at(i, j) / norms[j];
    for (int i = 0; i < cols; ++i) out.V.at(i, k) = v.at(i, j);
  }
  return out;
}

std::string SinkRowReport::to_json() const {
  json j = {{"skipped", skipped},
            {"note", note},
            {"zero_out_rows", zero_out_rows},
            {"max_zero_row_norm", max_zero_row_norm},
            {"ham_rows_nonzero", ham_rows_nonzero}};
  return j.dump(2);
}

SinkRowReport sink_row_check(const Matrix& adjacency, int d) {
  const int n = adjacency.rows;
  if (n != adjacency.cols) throw std::invalid_argument("sink_row_check: adjacency must be square");
  SinkRowReport rep;
  for (int i = 0; i < n; ++i) {
    bool zero = true;
    for (int j = 0; j < n; ++j)
      if (adjacency.at(i, j) != 0.0) {
        zero = false;
        break;
      }
    if (zero) rep.zero_out_rows.push_back(i);
  }
  if (rep.zero_out_rows.empty())
    throw std::invalid_argument("sink_row_check: adjacency has no zero-out-degree rows");

  // One extra singular value to detect a tie at the truncation boundary.
  const int probe = std::min(n, d + 1);
  SvdResult svd = truncated_svd_small(adjacency, probe);
  for (int k = 0; k + 1 < std::min(d, probe); ++k)
    if (std::fabs(svd.sigma[k] - svd.sigma[k + 1]) < 1e-8) {
      rep.skipped = true;
      rep.note = "degenerate spectrum: sigma tie within top-d";
      return rep;
    }
  if (svd.sigma[std::min(d, probe) - 1] < 1e-8) {
    rep.skipped = true;
    rep.note = "degenerate spectrum: sigma_d is (near) zero";
    return rep;
  }
  if (probe > d && std::fabs(svd.sigma[d - 1] - svd.sigma[d]) < 1e-8) {
    rep.skipped = true;
    rep.note = "degenerate spectrum: tie across the truncation boundary";
    return rep;
  }

  for (int u : rep.zero_out_rows) {
    double norm2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double x = svd.U.at(u, k) * std::sqrt(svd.sigma[k]);
      norm2 += x * x;
    }
    rep.max_zero_row_norm = std::max(rep.max_zero_row_norm, std::sqrt(norm2));
  }

  // Contrast: the complex relation matrix row of a zero-out-degree node is
  // nonzero as soon as the node has any in-edge (it holds a -i entry there).
  for (int u : rep.zero_out_rows) {
    bool has_in = false;
    for (int i = 0; i < n; ++i)
      if (adjacency.at(i, u) != 0.0) {
        has_in = true;
        break;
      }
    if (!has_in) continue;
    bool row_nonzero = false;
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      const bool fwd = adjacency.at(u, v) != 0.0, rev = adjacency.at(v, u) != 0.0;
      if (fwd || rev) {
        row_nonzero = true;
        break;
      }
    }
    rep.ham_rows_nonzero = rep.ham_rows_nonzero && row_nonzero;
  }
  return rep;
}

namespace {

struct GradCase {
  std::string name;
  std::vector<std::pair<std::string, Tensor>> leaves;
  std::function<Tensor(Tape&)> build;  // fresh tape -> scalar loss
  FdOptions opts;
};

Tensor leaf_randn(std::mt19937_64& rng, int rows, int cols, double scale = 0.8) {
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t = Tensor::zeros(rows, cols, true);
  for (double& v : t.data()) v = nd(rng);
  return t;
}

// Values bounded away from zero, for ops with a kink or a domain edge there.
Tensor leaf_offzero(std::mt19937_64& rng, int rows, int cols, double lo = 0.4, double hi = 1.5) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Tensor t = Tensor::zeros(rows, cols, true);
  for (double& v : t.data()) v = ud(rng) * (rng() & 1 ? 1.0 : -1.0);
  return t;
}

Tensor leaf_positive(std::mt19937_64& rng, int rows, int cols, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Tensor t = Tensor::zeros(rows, cols, true);
  for (double& v : t.data()) v = ud(rng);
  return t;
}

DiGraph gradcheck_graph() {
  // Seven nodes: mixes pure-forward, pure-reverse and one bidirectional pair,
  // and leaves node 6 with in-edges only.
  std::vector<Edge> edges = {{0, 1}, {1, 0}, {0, 2}, {2, 3}, {3, 4}, {4, 0}, {1, 3}, {2, 5}, {5, 6}, {3, 6}};
  return DiGraph::from_edges(7, edges);
}

std::vector<EdgeSample> gradcheck_samples() {
  return {{0, 1, Relation::Bidirectional}, {0, 2, Relation::Forward}, {3, 2, Relation::Reverse},
          {5, 6, Relation::Forward},       {4, 2, Relation::NoEdge},  {6, 1, Relation::NoEdge},
          {2, 3, Relation::Forward},       {4, 3, Relation::Reverse}};
}

constexpr int fx_node_classes = 3;

struct EncoderFixture {
  DiGraph g;
  AggIndex idx;
  EncoderConfig cfg;
  EncoderParams params;
  ComplexEmbedding init;
  std::vector<EdgeSample> samples;
};

std::shared_ptr<EncoderFixture> make_encoder_fixture(uint64_t seed, Backbone backbone,
                                                     Fusion fusion, PhaseNorm norm,
                                                     int head_classes = 0) {
  auto fx = std::make_shared<EncoderFixture>();
  fx->g = gradcheck_graph();
  fx->idx = AggIndex::build(fx->g);
  fx->cfg.layers = 2;
  fx->cfg.dims = {3, 4, 3};
  fx->cfg.backbone = backbone;
  fx->cfg.fusion = fusion;
  fx->cfg.phase_norm = norm;
  fx->cfg.dropout = 0.0;  // kept differentiable-smooth for the probe
  fx->cfg.validate();
  fx->params = init_params(fx->cfg, mix_seed(seed, 11), 0, head_classes);
  fx->init = init_embeddings(fx->g, 3, InitMode::RandomNormal, mix_seed(seed, 13));
  fx->samples = gradcheck_samples();
  return fx;
}

}  // namespace

std::vector<GradcheckResult> gradcheck_suite(const std::vector<std::string>& ops,
                                             bool inject_fault, uint64_t seed, double tol) {
  std::mt19937_64 rng(mix_seed(seed, 0x9eadbeef));
  std::vector<GradCase> cases;

  auto add = [&](std::string name, std::vector<std::pair<std::string, Tensor>> leaves,
                 std::function<Tensor(Tape&)> build, FdOptions opts = {}) {
    cases.push_back({std::move(name), std::move(leaves), std::move(build), opts});
  };

  {
    Tensor x = Tensor::from({1.0, 2.0}, 1, 2, true);
    add("quadratic", {{"x", x}},
        [x](Tape& t) { return t.sum_all(t.hadamard(x, x)); });
  }
  {
    Tensor a = leaf_randn(rng, 3, 4), b = leaf_randn(rng, 4, 2);
    add("matmul", {{"a", a}, {"b", b}},
        [a, b](Tape& t) { return t.mean_all(t.matmul(a, b)); });
  }
  {
    Tensor a = leaf_randn(rng, 3, 3), b = leaf_randn(rng, 3, 3);
    add("add", {{"a", a}, {"b", b}}, [a, b](Tape& t) { return t.mean_all(t.add(a, b)); });
    Tensor c = leaf_randn(rng, 3, 3), d = leaf_randn(rng, 3, 3);
    add("sub", {{"c", c}, {"d", d}}, [c, d](Tape& t) { return t.mean_all(t.sub(c, d)); });
    Tensor e = leaf_randn(rng, 3, 3), f = leaf_randn(rng, 3, 3);
    add("hadamard", {{"e", e}, {"f", f}},
        [e, f](Tape& t) { return t.mean_all(t.hadamard(e, f)); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 3);
    add("scalar_mul", {{"x", x}}, [x](Tape& t) { return t.mean_all(t.scalar_mul(x, 1.7)); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 4), r = leaf_randn(rng, 1, 4);
    add("add_rowvec", {{"x", x}, {"r", r}},
        [x, r](Tape& t) { return t.mean_all(t.sin(t.add_rowvec(x, r))); });
    Tensor y = leaf_randn(rng, 3, 4), c = leaf_randn(rng, 3, 1);
    add("add_colvec", {{"y", y}, {"c", c}},
        [y, c](Tape& t) { return t.mean_all(t.sin(t.add_colvec(y, c))); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 4), s = leaf_randn(rng, 3, 1);
    add("scale_rows", {{"x", x}, {"s", s}},
        [x, s](Tape& t) { return t.mean_all(t.scale_rows(x, s)); });
  }
  {
    Tensor x = leaf_randn(rng, 5, 3);
    std::vector<int> idx = {4, 0, 2, 2};
    add("row_gather", {{"x", x}}, [x, idx](Tape& t) {
      Tensor g = t.row_gather(x, idx);
      return t.mean_all(t.hadamard(g, g));
    });
  }
  {
    Tensor x = leaf_randn(rng, 6, 2);
    std::vector<int> seg = {0, 0, 1, 3, 3, 3};
    add("segment_sum", {{"x", x}}, [x, seg](Tape& t) {
      Tensor s = t.segment_sum(x, seg, 4);
      return t.mean_all(t.hadamard(s, s));
    });
  }
  {
    Tensor a = leaf_randn(rng, 3, 2), b = leaf_randn(rng, 3, 3);
    add("concat_cols", {{"a", a}, {"b", b}}, [a, b](Tape& t) {
      Tensor c = t.concat_cols(a, b);
      return t.mean_all(t.hadamard(c, c));
    });
  }
  {
    Tensor x = leaf_offzero(rng, 3, 4);
    add("relu", {{"x", x}}, [x](Tape& t) { return t.mean_all(t.relu(x)); });
    Tensor y = leaf_offzero(rng, 3, 4);
    add("leaky_relu", {{"y", y}},
        [y](Tape& t) { return t.mean_all(t.leaky_relu(y, 0.2)); });
    Tensor z = leaf_offzero(rng, 3, 4);
    add("abs", {{"z", z}}, [z](Tape& t) { return t.mean_all(t.abs(z)); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 3, 0.5);
    add("exp", {{"x", x}}, [x](Tape& t) { return t.mean_all(t.exp(x)); });
    Tensor y = leaf_positive(rng, 3, 3);
    add("log", {{"y", y}}, [y](Tape& t) { return t.mean_all(t.log(y)); });
    Tensor z = leaf_positive(rng, 3, 3);
    add("sqrt", {{"z", z}}, [z](Tape& t) { return t.mean_all(t.sqrt(z)); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 3);
    add("sigmoid", {{"x", x}}, [x](Tape& t) { return t.mean_all(t.sigmoid(x)); });
    Tensor y = leaf_randn(rng, 3, 3);
    add("sin", {{"y", y}}, [y](Tape& t) { return t.mean_all(t.sin(y)); });
    Tensor z = leaf_randn(rng, 3, 3);
    add("cos", {{"z", z}}, [z](Tape& t) { return t.mean_all(t.cos(z)); });
  }
  {
    Tensor x = leaf_randn(rng, 3, 4);
    add("softmax_rows", {{"x", x}}, [x](Tape& t) {
      // log of softmax keeps the row-coupled derivative nontrivial
      return t.mean_all(t.log(t.softmax_rows(x)));
    });
  }
  {
    Tensor x = leaf_randn(rng, 4, 4);
    add("dropout", {{"x", x}}, [x](Tape& t) {
      return t.mean_all(t.hadamard(t.dropout(x, 0.3, true, 77), x));
    });
  }
  {
    Tensor x = leaf_randn(rng, 3, 4);
    add("sum_all", {{"x", x}}, [x](Tape& t) { return t.sum_all(t.hadamard(x, x)); });
    Tensor y = leaf_randn(rng, 3, 4);
    add("mean_all", {{"y", y}}, [y](Tape& t) { return t.mean_all(t.hadamard(y, y)); });
    Tensor z = leaf_randn(rng, 3, 4);
    add("row_sum", {{"z", z}}, [z](Tape& t) {
      Tensor s = t.row_sum(z);
      return t.mean_all(t.hadamard(s, s));
    });
  }

  FdOptions deep;
  deep.max_coords_per_tensor = 24;
  deep.subsample_seed = mix_seed(seed, 0x5eed);

  auto add_encoder_case = [&](const std::string& name, Backbone bb, Fusion fu, PhaseNorm pn,
                              Distance dist, int which_loss) {
    auto fx = make_encoder_fixture(seed, bb, fu, pn, which_loss == 3 ? fx_node_classes : 0);
    add(name, fx->params.named(),
        [fx, dist, which_loss](Tape& t) -> Tensor {
          ComplexEmbedding emb = encode(t, fx->idx, fx->init, fx->cfg, fx->params, false, 0);
          switch (which_loss) {
            case 0:
              return direction_loss(t, emb, fx->samples, dist);
            case 1:
              return connection_loss(t, emb, fx->samples);
            case 2: {
              LossSchedule sc;
              sc.lambda0 = 0.3;
              return total_loss(t, emb, fx->samples, sc, 0, dist).total;
            }
            default: {
              Tensor logits = head_node_classifier(t, emb, *fx->params.node_head);
              std::vector<int> labels(fx->g.num_nodes);
              for (int i = 0; i < fx->g.num_nodes; ++i) labels[i] = i % fx_node_classes;
              return supervised_ce_loss(t, logits, labels);
            }
          }
        },
        deep);
  };

  add_encoder_case("loss_direction", Backbone::GAT, Fusion::None, PhaseNorm::Union, Distance::L1, 0);
  add_encoder_case("loss_direction_l2", Backbone::GAT, Fusion::None, PhaseNorm::Union, Distance::L2, 0);
  add_encoder_case("loss_connection", Backbone::GAT, Fusion::None, PhaseNorm::Union, Distance::L1, 1);
  add_encoder_case("loss_total", Backbone::GAT, Fusion::None, PhaseNorm::Union, Distance::L1, 2);
  add_encoder_case("loss_supervised", Backbone::GAT, Fusion::None, PhaseNorm::Union, Distance::L1, 3);
  add_encoder_case("encoder_gcn", Backbone::GCN, Fusion::None, PhaseNorm::Union, Distance::L1, 0);
  add_encoder_case("encoder_fusion_all", Backbone::GAT, Fusion::All, PhaseNorm::Union, Distance::L1, 0);
  add_encoder_case("encoder_ews", Backbone::GAT, Fusion::EWS, PhaseNorm::Union, Distance::L1, 0);
  add_encoder_case("encoder_persign", Backbone::GAT, Fusion::None, PhaseNorm::PerSign, Distance::L1, 0);

  std::vector<GradcheckResult> results;
  for (const auto& gc : cases) {
    if (!ops.empty() && std::find(ops.begin(), ops.end(), gc.name) == ops.end()) continue;
    auto loss_value = [&gc]() {
      Tape t;
      return gc.build(t).scalar();
    };
    auto compute = [&gc, inject_fault]() {
      Tape t;
      Tensor loss = gc.build(t);
      t.backward(loss);
      if (inject_fault && !gc.leaves.empty()) {
        auto& g = gc.leaves.front().second.node()->grad;
        for (double& v : g) v += 0.5;
      }
    };
    GradcheckResult r;
    r.name = gc.name;
    r.report = fd_gradient(loss_value, compute, gc.leaves, gc.opts);
    r.pass = r.report.pass(tol);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace duplex
