#include "chebtt/completion.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <chrono>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <utility>

#include "chebtt/rng.hpp"

namespace chebtt {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct SampleView {
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> idx;  // N x d
  VectorXd val;                                              // N
};

SampleView make_view(const SampleSet& s, std::span<const std::size_t> pos) {
  const Index n = static_cast<Index>(pos.size());
  const Index d = static_cast<Index>(s.dims().size());
  SampleView v;
  v.idx.resize(n, d);
  v.val.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto& e = s.entries()[pos[static_cast<std::size_t>(r)]];
    for (Index c = 0; c < d; ++c) v.idx(r, c) = e.idx[static_cast<std::size_t>(c)];
    v.val[r] = e.value;
  }
  return v;
}

// relative RMSE; falls back to absolute RMSE for all-zero targets
double rel_misfit(const VectorXd& res, double target_norm) {
  if (res.size() == 0) return 0.0;
  if (target_norm > 0.0) return res.norm() / target_norm;
  return res.norm() / std::sqrt(static_cast<double>(res.size()));
}

VectorXd evaluate_tt(const TensorTrain<double>& t, const SampleView& sv) {
  const Index n = sv.idx.rows();
  VectorXd out(n);
  for (Index s = 0; s < n; ++s) {
    RowVectorXd v = t.core(0).slice(sv.idx(s, 0));
    for (int i = 1; i < t.dim(); ++i) v = v * t.core(i).slice(sv.idx(s, i));
    out[s] = v(0);
  }
  return out;
}

// The working representation: the same tensor kept in left-orthogonal form
// (cores 0..d-2 orthonormal, center last) and right-orthogonal form (cores
// 1..d-1 orthonormal, center first). Left cores serve as prefix bases U_i,
// right cores as suffix bases V_i of the tangent-space parametrization.
struct ManifoldPoint {
  TensorTrain<double> left;
  TensorTrain<double> right;
};

ManifoldPoint canonicalize(TensorTrain<double> x) {
  tt_left_orthogonalize(x);
  TensorTrain<double> r = x;
  tt_right_orthogonalize(r);
  return ManifoldPoint{std::move(x), std::move(r)};
}

// A tangent vector in gauge-fixed first-order form: one delta core per
// dimension (left-unfolding shape), with U_i^T dU_i = 0 for i < d-1. Under
// that gauge the components are mutually orthogonal, so inner products and
// norms decompose core by core.
struct Tangent {
  std::vector<MatrixXd> dU;
};

double dot(const Tangent& a, const Tangent& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.dU.size(); ++i)
    total += (a.dU[i].array() * b.dU[i].array()).sum();
  return total;
}

Tangent axpy(double alpha, const Tangent& x, double beta, const Tangent& y) {
  Tangent out;
  out.dU.resize(x.dU.size());
  for (std::size_t i = 0; i < x.dU.size(); ++i) out.dU[i] = alpha * x.dU[i] + beta * y.dU[i];
  return out;
}

// Per-sample prefix products of left cores (L[i]: N x r_i) and suffix
// products of right cores (R[i]: N x r_{i+1}).
struct Interfaces {
  std::vector<MatrixXd> L, R;
};

Interfaces compute_interfaces(const ManifoldPoint& p, const SampleView& sv) {
  const int d = p.left.dim();
  const Index n = sv.idx.rows();
  const auto ranks = p.left.ranks();
  Interfaces f;
  f.L.resize(static_cast<std::size_t>(d));
  f.R.resize(static_cast<std::size_t>(d));
  f.L[0] = MatrixXd::Ones(n, 1);
  for (int i = 1; i < d; ++i) {
    auto& m = f.L[static_cast<std::size_t>(i)];
    m.resize(n, ranks[static_cast<std::size_t>(i)]);
    const auto& prev = f.L[static_cast<std::size_t>(i - 1)];
    for (Index s = 0; s < n; ++s)
      m.row(s).noalias() = prev.row(s) * p.left.core(i - 1).slice(sv.idx(s, i - 1));
  }
  f.R[static_cast<std::size_t>(d - 1)] = MatrixXd::Ones(n, 1);
  for (int i = d - 2; i >= 0; --i) {
    auto& m = f.R[static_cast<std::size_t>(i)];
    m.resize(n, ranks[static_cast<std::size_t>(i + 1)]);
    const auto& next = f.R[static_cast<std::size_t>(i + 1)];
    for (Index s = 0; s < n; ++s)
      m.row(s).noalias() = (p.right.core(i + 1).slice(sv.idx(s, i + 1)) * next.row(s).transpose())
                               .transpose();
  }
  return f;
}

void gauge_project(const ManifoldPoint& p, Tangent& t) {
  for (int i = 0; i + 1 < p.left.dim(); ++i) {
    const auto& u = p.left.core(i).m;
    t.dU[static_cast<std::size_t>(i)] -= u * (u.transpose() * t.dU[static_cast<std::size_t>(i)]);
  }
}

// Riemannian gradient of 1/2 sum res^2: project the sparse residual tensor
// onto the tangent space via the sample interfaces.
Tangent sparse_gradient(const ManifoldPoint& p, const SampleView& sv, const Interfaces& f,
                        const VectorXd& res) {
  const int d = p.left.dim();
  const auto ranks = p.left.ranks();
  Tangent g;
  g.dU.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    g.dU[static_cast<std::size_t>(i)] = MatrixXd::Zero(
        ranks[static_cast<std::size_t>(i)] * p.left.mode_size(i), ranks[static_cast<std::size_t>(i) + 1]);
  const Index n = sv.idx.rows();
  for (Index s = 0; s < n; ++s) {
    if (res[s] == 0.0) continue;
    for (int i = 0; i < d; ++i) {
      const Index rl = ranks[static_cast<std::size_t>(i)];
      auto block = g.dU[static_cast<std::size_t>(i)].middleRows(sv.idx(s, i) * rl, rl);
      block.noalias() += res[s] * f.L[static_cast<std::size_t>(i)].row(s).transpose() *
                         f.R[static_cast<std::size_t>(i)].row(s);
    }
  }
  gauge_project(p, g);
  return g;
}

VectorXd tangent_values(const ManifoldPoint& p, const Tangent& t, const SampleView& sv,
                        const Interfaces& f) {
  const int d = p.left.dim();
  const auto ranks = p.left.ranks();
  const Index n = sv.idx.rows();
  VectorXd out = VectorXd::Zero(n);
  for (Index s = 0; s < n; ++s)
    for (int i = 0; i < d; ++i) {
      const Index rl = ranks[static_cast<std::size_t>(i)];
      out[s] += f.L[static_cast<std::size_t>(i)].row(s) *
                t.dU[static_cast<std::size_t>(i)].middleRows(sv.idx(s, i) * rl, rl) *
                f.R[static_cast<std::size_t>(i)].row(s).transpose();
    }
  return out;
}

// Exact TT form of X + alpha * t (include_point) or alpha * t alone, via the
// block-core construction: the product of
//   [a dU_0, U_0] , [[V_i, 0], [a dU_i, U_i]] , [[V_{d-1}], [a dU_{d-1} (+ C)]]
// telescopes to a sum with dU_k flanked by U prefixes and V suffixes.
TensorTrain<double> tangent_to_tt(const ManifoldPoint& p, const Tangent& t, double alpha,
                                  bool include_point) {
  const int d = p.left.dim();
  if (d == 1) {
    MatrixXd m = alpha * t.dU[0];
    if (include_point) m += p.left.core(0).m;
    return TensorTrain<double>({TTCore<double>(std::move(m), p.left.mode_size(0))});
  }
  const auto ranks = p.left.ranks();
  std::vector<TTCore<double>> cores;
  cores.reserve(static_cast<std::size_t>(d));
  {
    const Index n0 = p.left.mode_size(0), r1 = ranks[1];
    MatrixXd m(n0, 2 * r1);
    m.leftCols(r1) = alpha * t.dU[0];
    m.rightCols(r1) = p.left.core(0).m;
    cores.emplace_back(std::move(m), n0);
  }
  for (int i = 1; i + 1 < d; ++i) {
    const Index ni = p.left.mode_size(i);
    const Index rl = ranks[static_cast<std::size_t>(i)], rr = ranks[static_cast<std::size_t>(i) + 1];
    MatrixXd m = MatrixXd::Zero(2 * rl * ni, 2 * rr);
    for (Index j = 0; j < ni; ++j) {
      m.block(j * 2 * rl, 0, rl, rr) = p.right.core(i).slice(j);
      m.block(j * 2 * rl + rl, 0, rl, rr) =
          alpha * t.dU[static_cast<std::size_t>(i)].middleRows(j * rl, rl);
      m.block(j * 2 * rl + rl, rr, rl, rr) = p.left.core(i).slice(j);
    }
    cores.emplace_back(std::move(m), ni);
  }
  {
    const int i = d - 1;
    const Index ni = p.left.mode_size(i), rl = ranks[static_cast<std::size_t>(i)];
    MatrixXd m(2 * rl * ni, 1);
    for (Index j = 0; j < ni; ++j) {
      m.block(j * 2 * rl, 0, rl, 1) = p.right.core(i).slice(j);
      MatrixXd bottom = alpha * t.dU[static_cast<std::size_t>(i)].middleRows(j * rl, rl);
      if (include_point) bottom += p.left.core(i).slice(j);
      m.block(j * 2 * rl + rl, 0, rl, 1) = bottom;
    }
    cores.emplace_back(std::move(m), ni);
  }
  return TensorTrain<double>(std::move(cores));
}

// Projection of an arbitrary TT onto the tangent space at p, by left/right
// transfer-matrix recursions against the U and V bases. Used as vector
// transport for the CG direction and previous gradient.
Tangent project_tt(const ManifoldPoint& p, const TensorTrain<double>& z) {
  const int d = p.left.dim();
  const auto ranks = p.left.ranks();
  std::vector<MatrixXd> A(static_cast<std::size_t>(d) + 1), B(static_cast<std::size_t>(d) + 1);
  A[0] = MatrixXd::Ones(1, 1);
  for (int i = 0; i + 1 < d; ++i) {
    MatrixXd next = MatrixXd::Zero(z.core(i).rank_right(), ranks[static_cast<std::size_t>(i) + 1]);
    for (Index j = 0; j < z.core(i).n; ++j)
      next.noalias() += z.core(i).slice(j).transpose() * A[static_cast<std::size_t>(i)] *
                        p.left.core(i).slice(j);
    A[static_cast<std::size_t>(i) + 1] = std::move(next);
  }
  B[static_cast<std::size_t>(d)] = MatrixXd::Ones(1, 1);
  for (int i = d - 1; i >= 1; --i) {
    MatrixXd prev = MatrixXd::Zero(z.core(i).rank_left(), ranks[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < z.core(i).n; ++j)
      prev.noalias() += z.core(i).slice(j) * B[static_cast<std::size_t>(i) + 1] *
                        p.right.core(i).slice(j).transpose();
    B[static_cast<std::size_t>(i)] = std::move(prev);
  }
  Tangent out;
  out.dU.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const Index rl = ranks[static_cast<std::size_t>(i)], rr = ranks[static_cast<std::size_t>(i) + 1];
    const Index ni = p.left.mode_size(i);
    MatrixXd m(rl * ni, rr);
    for (Index j = 0; j < ni; ++j)
      m.middleRows(j * rl, rl).noalias() = A[static_cast<std::size_t>(i)].transpose() *
                                           z.core(i).slice(j) *
                                           B[static_cast<std::size_t>(i) + 1];
    out.dU[static_cast<std::size_t>(i)] = std::move(m);
  }
  gauge_project(p, out);
  return out;
}

TensorTrain<double> random_tt_with_ranks(std::span<const Index> dims,
                                         std::span<const Index> ranks_full, double bias,
                                         double sigma, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<TTCore<double>> cores;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    MatrixXd m(ranks_full[i] * dims[i], ranks_full[i + 1]);
    for (Index q = 0; q < m.size(); ++q) m(q) = bias + gauss(eng);
    cores.emplace_back(std::move(m), dims[i]);
  }
  return TensorTrain<double>(std::move(cores));
}

struct StageOutcome {
  TensorTrain<double> x;  // best iterate by training loss
  int iterations = 0;
  bool train_converged = false;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> loss_history;  // accepted-iterate training losses

  explicit StageOutcome(TensorTrain<double> start) : x(std::move(start)) {}
};

StageOutcome run_stage(const SampleView& train, std::span<const Index> dims,
                       std::span<const Index> ranks_full, const CompletionConfig& cfg,
                       const TensorTrain<double>* warm, std::uint64_t stage_block) {
  const int d = static_cast<int>(dims.size());
  auto eng = make_engine(cfg.rng_seed, StreamTag::kCompletion, stage_block);

  // Cold starts race one mean-one draw against two centered draws and keep
  // the lowest initial misfit. Centered cores make deep-chain sample values
  // heavy-tailed (they are products of d independent factors), which can
  // strand the early iterations behind sign barriers at large d; the biased
  // draw starts well conditioned whenever the data is predominantly one
  // signed. Each candidate is scaled so the first residual is O(data).
  ManifoldPoint p = [&] {
    if (warm) return canonicalize(*warm);
    constexpr std::pair<double, double> kColdDraws[] = {{1.0, 0.25}, {0.0, 1.0}, {0.0, 1.0}};
    std::optional<ManifoldPoint> best_pt;
    double best_f = std::numeric_limits<double>::infinity();
    for (const auto& [bias, sigma] : kColdDraws) {
      auto x0 = random_tt_with_ranks(dims, ranks_full, bias, sigma, eng);
      auto pt = canonicalize(std::move(x0));
      const VectorXd v0 = evaluate_tt(pt.left, train);
      const double rms_x = v0.norm();
      const double rms_t = train.val.norm();
      const double scale = rms_t > 0.0 ? rms_t / std::max(rms_x, 1e-300) : 0.0;
      pt.left.core(d - 1).m *= scale;
      pt.right.core(0).m *= scale;
      const double f0 = (scale * v0 - train.val).squaredNorm();
      if (f0 < best_f) {
        best_f = f0;
        best_pt = std::move(pt);
      }
    }
    return std::move(*best_pt);
  }();

  const double target_norm = train.val.norm();
  const std::vector<Index> caps(ranks_full.begin() + 1, ranks_full.end() - 1);

  StageOutcome out(p.left);
  Tangent grad, dir;
  TensorTrain<double> grad_tt({TTCore<double>(MatrixXd::Zero(1, 1), 1)});
  TensorTrain<double> dir_tt = grad_tt;
  double gn2_prev = 0.0;
  bool have_prev = false;

  for (int it = 0; it < cfg.max_cg_iterations; ++it) {
    const VectorXd res = evaluate_tt(p.left, train) - train.val;
    const double f = 0.5 * res.squaredNorm();
    if (!std::isfinite(f))
      throw CompletionError("completion: non-finite training loss at stage " +
                            std::to_string(stage_block) + ", iteration " + std::to_string(it));
    out.loss_history.push_back(f);
    if (f < out.best_loss) {
      out.best_loss = f;
      out.x = p.left;
    }
    out.iterations = it;
    if (rel_misfit(res, target_norm) <= cfg.train_rel_tol) {
      out.train_converged = true;
      break;
    }

    const Interfaces faces = compute_interfaces(p, train);
    grad = sparse_gradient(p, train, faces, res);
    const double gn2 = dot(grad, grad);
    if (std::sqrt(gn2) <= 1e-13 * std::max(1.0, target_norm)) break;

    double slope;
    if (have_prev) {
      const Tangent tg = project_tt(p, grad_tt);
      const Tangent td = project_tt(p, dir_tt);
      const double beta = std::max(0.0, (gn2 - dot(grad, tg)) / gn2_prev);
      dir = axpy(-1.0, grad, beta, td);
      slope = dot(grad, dir);
      const double dn2 = dot(dir, dir);
      if (!(slope < -1e-14 * std::sqrt(gn2 * dn2))) {  // not a descent direction: restart
        dir = axpy(-1.0, grad, 0.0, grad);
        slope = -gn2;
      }
    } else {
      dir = axpy(-1.0, grad, 0.0, grad);
      slope = -gn2;
    }

    const VectorXd dvals = tangent_values(p, dir, train, faces);
    const double dd = dvals.squaredNorm();
    if (!(dd > 0.0) || !std::isfinite(dd)) break;
    double step = -res.dot(dvals) / dd;
    if (!(step > 0.0)) {  // linearized minimizer points backwards: restart from steepest
      dir = axpy(-1.0, grad, 0.0, grad);
      slope = -gn2;
      step = gn2 / std::max(dd, 1e-300);
    }

    constexpr double kArmijo = 1e-4;
    bool accepted = false;
    TensorTrain<double> cand = p.left;
    for (int trial = 0; trial < 30; ++trial) {
      cand = tt_round(tangent_to_tt(p, dir, step, true), std::span<const Index>(caps));
      const VectorXd cres = evaluate_tt(cand, train) - train.val;
      const double fc = 0.5 * cres.squaredNorm();
      if (std::isfinite(fc) && fc <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    // remember the accepted direction and gradient as TTs anchored at the old
    // point; they are transported by projection at the next iterate
    grad_tt = tangent_to_tt(p, grad, 1.0, false);
    dir_tt = tangent_to_tt(p, dir, 1.0, false);
    gn2_prev = gn2;
    have_prev = true;
    p = canonicalize(std::move(cand));
  }
  return out;
}

void check_config(const CompletionConfig& cfg) {
  if (cfg.max_cg_iterations < 1) throw ConfigError("completion: max_cg_iterations must be >= 1");
  if (!(cfg.train_rel_tol > 0.0) || !(cfg.test_rel_tol > 0.0) || !(cfg.stagnation_epsilon > 0.0))
    throw ConfigError("completion: tolerances must be positive");
  if (cfg.max_rank < 1) throw ConfigError("completion: max_rank must be >= 1");
  if (!(cfg.sample_growth_factor > 1.0))
    throw ConfigError("completion: sample_growth_factor must exceed 1");
  if (cfg.max_sample_rounds < 0) throw ConfigError("completion: max_sample_rounds must be >= 0");
}

void check_ranks(std::span<const Index> ranks, std::span<const Index> dims) {
  if (ranks.size() != dims.size() + 1)
    throw ConfigError("completion: rank tuple must have d+1 entries");
  if (ranks.front() != 1 || ranks.back() != 1)
    throw ConfigError("completion: boundary ranks must be 1");
  for (std::size_t b = 1; b < ranks.size(); ++b) {
    if (ranks[b] < 1) throw ConfigError("completion: ranks must be >= 1");
    if (b < ranks.size() - 1 &&
        (ranks[b] > ranks[b - 1] * dims[b - 1] || ranks[b] > dims[b] * ranks[b + 1]))
      throw ConfigError("completion: rank " + std::to_string(ranks[b]) + " at bond " +
                        std::to_string(b) + " is inadmissible for the mode sizes");
  }
}

std::size_t manifold_dof(std::span<const Index> ranks, std::span<const Index> dims) {
  std::size_t dof = 0;
  for (std::size_t i = 0; i < dims.size(); ++i)
    dof += static_cast<std::size_t>(ranks[i] * dims[i] * ranks[i + 1]);
  for (std::size_t b = 1; b + 1 < ranks.size(); ++b)
    dof -= static_cast<std::size_t>(ranks[b] * ranks[b]);
  return dof;
}

struct Assessment {
  double train_rmse, test_rmse, train_sq, test_sq;
};

Assessment assess(const TensorTrain<double>& x, const SampleView& train, const SampleView& test) {
  Assessment a{};
  const VectorXd rtr = evaluate_tt(x, train) - train.val;
  a.train_sq = rtr.squaredNorm();
  a.train_rmse = rel_misfit(rtr, train.val.norm());
  if (test.val.size() > 0) {
    const VectorXd rte = evaluate_tt(x, test) - test.val;
    a.test_sq = rte.squaredNorm();
    a.test_rmse = rel_misfit(rte, test.val.norm());
  } else {  // no held-out entries: mirror the training metric
    a.test_sq = a.train_sq;
    a.test_rmse = a.train_rmse;
  }
  return a;
}

// one extra noise column on the left core of the bond, one noise row block on
// the right core; scale tied to each core's norm so the warm start stays a
// small perturbation
TensorTrain<double> pad_bond(const TensorTrain<double>& x, int bond, std::mt19937_64& eng) {
  const int d = x.dim();
  std::vector<TTCore<double>> cores;
  cores.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) cores.push_back(x.core(i));
  auto noise = [&eng](double sd, Index rows, Index cols) {
    std::normal_distribution<double> g(0.0, sd);
    MatrixXd m(rows, cols);
    for (Index q = 0; q < m.size(); ++q) m(q) = g(eng);
    return m;
  };
  {
    auto& c = cores[static_cast<std::size_t>(bond)];
    const double sd = 1e-4 * c.m.norm() / std::sqrt(static_cast<double>(c.m.size()));
    MatrixXd m(c.m.rows(), c.m.cols() + 1);
    m.leftCols(c.m.cols()) = c.m;
    m.rightCols(1) = noise(sd, c.m.rows(), 1);
    c = TTCore<double>(std::move(m), c.n);
  }
  {
    auto& c = cores[static_cast<std::size_t>(bond) + 1];
    const Index rl = c.rank_left(), rr = c.rank_right();
    const double sd = 1e-4 * c.m.norm() / std::sqrt(static_cast<double>(c.m.size()));
    MatrixXd m((rl + 1) * c.n, rr);
    for (Index j = 0; j < c.n; ++j) {
      m.middleRows(j * (rl + 1), rl) = c.slice(j);
      m.row(j * (rl + 1) + rl) = noise(sd, 1, rr);
    }
    c = TTCore<double>(std::move(m), c.n);
  }
  return TensorTrain<double>(std::move(cores));
}

}  // namespace

SampleSet::SampleSet(std::vector<Index> dims, std::vector<SampleEntry> entries,
                     double train_fraction, std::uint64_t seed)
    : dims_(std::move(dims)), entries_(std::move(entries)) {
  if (dims_.empty()) throw ConfigError("SampleSet: empty dims");
  for (Index n : dims_)
    if (n < 1) throw ConfigError("SampleSet: mode sizes must be >= 1");
  if (!(train_fraction > 0.0) || train_fraction > 1.0)
    throw ConfigError("SampleSet: train_fraction must be in (0, 1]");
  std::set<std::vector<Index>> seen;
  for (const auto& e : entries_) {
    if (e.idx.size() != dims_.size())
      throw ConfigError("SampleSet: multi-index arity does not match dims");
    for (std::size_t k = 0; k < dims_.size(); ++k)
      if (e.idx[k] < 0 || e.idx[k] >= dims_[k])
        throw ConfigError("SampleSet: multi-index out of bounds in dimension " +
                          std::to_string(k));
    if (!seen.insert(e.idx).second) throw ConfigError("SampleSet: duplicate multi-index");
    if (!std::isfinite(e.value)) throw ConfigError("SampleSet: non-finite sample value");
  }
  const std::size_t n = entries_.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  // the permutation depends only on n and the seed, never on the values
  std::mt19937_64 eng(splitmix64(seed));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(eng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::min(std::max<std::size_t>(n_train, n > 0 ? 1 : 0), n);
  train_.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  test_.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train_.begin(), train_.end());
  std::sort(test_.begin(), test_.end());
}

std::string CompletionReport::to_json() const {
  nlohmann::ordered_json j;
  j["final_ranks"] = std::vector<long long>(final_ranks.begin(), final_ranks.end());
  j["train_rmse"] = train_rmse;
  j["test_rmse"] = test_rmse;
  j["train_sq_loss"] = train_sq_loss;
  j["test_sq_loss"] = test_sq_loss;
  j["iterations_per_stage"] = iterations_per_stage;
  j["train_loss_history"] = train_loss_history;
  j["samples_used"] = samples_used;
  j["sample_rounds"] = sample_rounds;
  j["converged"] = converged;
  return j.dump(2);
}

std::pair<TensorTrain<double>, CompletionReport> complete_fixed_rank(
    const SampleSet& samples, std::span<const Index> ranks, const CompletionConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_config(cfg);
  if (samples.size() == 0) throw ConfigError("complete_fixed_rank: no samples");
  check_ranks(ranks, samples.dims());
  const SampleView train = make_view(samples, samples.train_positions());
  const SampleView test = make_view(samples, samples.test_positions());
  if (train.val.size() < static_cast<Index>(manifold_dof(ranks, samples.dims())))
    std::cerr << "completion: warning: " << train.val.size()
              << " training samples for a manifold with " << manifold_dof(ranks, samples.dims())
              << " degrees of freedom\n";

  StageOutcome stage = run_stage(train, samples.dims(), ranks, cfg, nullptr, 0);
  const Assessment a = assess(stage.x, train, test);

  CompletionReport rep;
  rep.final_ranks = stage.x.ranks();
  rep.train_rmse = a.train_rmse;
  rep.test_rmse = a.test_rmse;
  rep.train_sq_loss = a.train_sq;
  rep.test_sq_loss = a.test_sq;
  rep.iterations_per_stage = {stage.iterations};
  rep.train_loss_history = stage.loss_history;
  rep.samples_used = samples.size();
  rep.converged = a.test_rmse <= cfg.test_rel_tol;
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(stage.x), std::move(rep)};
}

std::pair<TensorTrain<double>, CompletionReport> rank_adaptive(const SampleSet& samples,
                                                               const CompletionConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_config(cfg);
  if (samples.size() == 0) throw ConfigError("rank_adaptive: no samples");
  const int d = static_cast<int>(samples.dims().size());
  const SampleView train = make_view(samples, samples.train_positions());
  const SampleView test = make_view(samples, samples.test_positions());
  auto pad_eng = make_engine(cfg.rng_seed, StreamTag::kCompletion, 1u << 20);

  std::vector<Index> ranks(static_cast<std::size_t>(d) + 1, 1);
  CompletionReport rep;
  rep.samples_used = samples.size();

  StageOutcome stage = run_stage(train, samples.dims(), ranks, cfg, nullptr, 0);
  Assessment a = assess(stage.x, train, test);
  rep.iterations_per_stage.push_back(stage.iterations);

  TensorTrain<double> best_x = stage.x;
  Assessment best_a = a;
  double cycle_baseline = a.test_rmse;
  int increments_in_cycle = 0;
  int bond = 0;
  std::uint64_t stage_block = 0;

  while (a.test_rmse > cfg.test_rel_tol) {
    // next admissible bond in cyclic order
    int chosen = -1;
    for (int probe = 0; probe < d - 1; ++probe) {
      const int b = (bond + probe) % std::max(d - 1, 1);
      const Index cand = ranks[static_cast<std::size_t>(b) + 1] + 1;
      if (cand <= cfg.max_rank &&
          cand <= ranks[static_cast<std::size_t>(b)] * samples.dims()[static_cast<std::size_t>(b)] &&
          cand <= samples.dims()[static_cast<std::size_t>(b) + 1] *
                      ranks[static_cast<std::size_t>(b) + 2]) {
        chosen = b;
        break;
      }
    }
    if (chosen < 0) break;  // every bond at its cap
    bond = (chosen + 1) % std::max(d - 1, 1);
    ranks[static_cast<std::size_t>(chosen) + 1] += 1;

    const TensorTrain<double> warm = pad_bond(stage.x, chosen, pad_eng);
    stage = run_stage(train, samples.dims(), ranks, cfg, &warm, ++stage_block);
    if (!stage.train_converged) {
      // padded warm starts can sit near a saddle of the new manifold; a fresh
      // start often does better, so take the lower training loss of the two
      StageOutcome fresh =
          run_stage(train, samples.dims(), ranks, cfg, nullptr, stage_block + (1u << 16));
      if (fresh.best_loss < stage.best_loss) stage = std::move(fresh);
    }
    a = assess(stage.x, train, test);
    rep.iterations_per_stage.push_back(stage.iterations);
    if (a.test_rmse < best_a.test_rmse) {
      best_x = stage.x;
      best_a = a;
    }

    if (++increments_in_cycle == d - 1) {
      increments_in_cycle = 0;
      const double improvement =
          (cycle_baseline - best_a.test_rmse) / std::max(cycle_baseline, 1e-300);
      if (improvement < cfg.stagnation_epsilon) break;
      cycle_baseline = best_a.test_rmse;
    }
  }

  if (a.test_rmse <= best_a.test_rmse) {
    best_x = std::move(stage.x);
    best_a = a;
  }
  rep.final_ranks = best_x.ranks();
  rep.train_loss_history = stage.loss_history;
  rep.train_rmse = best_a.train_rmse;
  rep.test_rmse = best_a.test_rmse;
  rep.train_sq_loss = best_a.train_sq;
  rep.test_sq_loss = best_a.test_sq;
  rep.converged = best_a.test_rmse <= cfg.test_rel_tol;
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(best_x), std::move(rep)};
}

std::pair<TensorTrain<double>, CompletionReport> sample_adaptive(const std::vector<Index>& dims,
                                                                 const Sampler& sampler,
                                                                 std::size_t initial_count,
                                                                 const CompletionConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_config(cfg);
  if (initial_count == 0) throw ConfigError("sample_adaptive: initial_count must be positive");

  std::vector<SampleEntry> entries = sampler(initial_count);
  if (entries.empty()) throw ConfigError("sample_adaptive: sampler produced no entries");

  std::pair<TensorTrain<double>, CompletionReport> best{
      TensorTrain<double>({TTCore<double>(Eigen::MatrixXd::Zero(1, 1), 1)}), {}};
  bool have_best = false;

  int round = 0;
  bool exhausted = false;
  while (true) {
    SampleSet set(dims, entries, 0.8,
                  derive_stream(cfg.rng_seed, StreamTag::kSampleSelection,
                                static_cast<std::uint64_t>(round)));
    auto [x, rep] = rank_adaptive(set, cfg);
    rep.sample_rounds = round;
    if (!have_best || rep.test_rmse < best.second.test_rmse) {
      best = {std::move(x), std::move(rep)};
      have_best = true;
    }
    if (best.second.converged || exhausted || round >= cfg.max_sample_rounds) break;

    const std::size_t target = static_cast<std::size_t>(
        std::ceil(static_cast<double>(entries.size()) * cfg.sample_growth_factor));
    const std::size_t want = target > entries.size() ? target - entries.size() : 1;
    std::vector<SampleEntry> extra = sampler(want);
    if (extra.empty()) break;  // grid exhausted: keep the best attempt
    if (extra.size() < want) exhausted = true;
    entries.insert(entries.end(), std::make_move_iterator(extra.begin()),
                   std::make_move_iterator(extra.end()));
    ++round;
  }
  best.second.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return best;
}

std::vector<std::vector<Index>> draw_unique_indices(std::span<const Index> dims, std::size_t count,
                                                    std::uint64_t seed) {
  if (dims.empty()) throw ConfigError("draw_unique_indices: empty dims");
  double total = 1.0;
  for (Index n : dims) {
    if (n < 1) throw ConfigError("draw_unique_indices: mode sizes must be >= 1");
    total *= static_cast<double>(n);
  }
  if (static_cast<double>(count) > total)
    throw ConfigError("draw_unique_indices: more indices requested than grid points");
  std::mt19937_64 eng(splitmix64(seed));

  // dense grids: enumerate and partially shuffle, avoiding rejection stalls
  if (total <= std::max(4.0 * static_cast<double>(count), 65536.0) && total <= double(1 << 22)) {
    const auto n_total = static_cast<std::size_t>(total);
    std::vector<std::vector<Index>> all(n_total);
    std::vector<Index> cur(dims.size(), 0);
    for (std::size_t q = 0; q < n_total; ++q) {
      all[q] = cur;
      for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
        if (++cur[static_cast<std::size_t>(k)] < dims[static_cast<std::size_t>(k)]) break;
        cur[static_cast<std::size_t>(k)] = 0;
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(eng() % (n_total - i));
      std::swap(all[i], all[j]);
    }
    all.resize(count);
    return all;
  }

  std::set<std::vector<Index>> seen;
  std::vector<std::vector<Index>> out;
  out.reserve(count);
  std::vector<Index> cur(dims.size());
  while (out.size() < count) {
    for (std::size_t k = 0; k < dims.size(); ++k)
      cur[k] = static_cast<Index>(eng() % static_cast<std::uint64_t>(dims[k]));
    if (seen.insert(cur).second) out.push_back(cur);
  }
  return out;
}

}  // namespace chebtt
