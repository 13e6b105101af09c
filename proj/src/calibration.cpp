#include "chebtt/calibration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "chebtt/rng.hpp"

namespace chebtt {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_policy_supported(DomainPolicy policy) {
  if (policy == DomainPolicy::kPricerFallback) {
    throw ConfigError("DomainPolicy::kPricerFallback is declared but not implemented");
  }
}

// Dense path: contract the leading theta dimensions (deriv_axis selects one
// derivative functional, -1 for pure values), leaving the (maturity, strike)
// node slice.
Eigen::VectorXd dense_theta_contraction(const ChebyshevTensor<double>& t,
                                        const Eigen::VectorXd& theta, int deriv_axis) {
  const auto& g = t.grid();
  const int theta_d = g.dim() - 2;
  Eigen::VectorXd cur = t.values(), w, next;
  for (int k = 0; k < theta_d; ++k) {
    if (k == deriv_axis) {
      g.derivative_weights(k, theta[k], w);
    } else {
      g.value_weights(k, theta[k], w);
    }
    const Index nk = g.count(k);
    Eigen::Map<const RowMat> m(cur.data(), nk, cur.size() / nk);
    next.noalias() = m.transpose() * w;
    cur.swap(next);
  }
  return cur;  // maturity-node x strike-node slice, row-major
}

}  // namespace

Surrogate::Surrogate(ChebyshevTensor<double> dense) : body_(std::move(dense)) {
  if (grid().dim() < 3) {
    throw ConfigError("Surrogate: need at least one theta dimension plus maturity and strike");
  }
}

Surrogate::Surrogate(TensorTrain<double> train) : body_(std::move(train)) {
  if (!std::get<1>(body_).grid) throw ConfigError("Surrogate: tensor train carries no grid");
  if (grid().dim() < 3) {
    throw ConfigError("Surrogate: need at least one theta dimension plus maturity and strike");
  }
}

const ChebyshevGrid<double>& Surrogate::grid() const {
  return is_train() ? *std::get<1>(body_).grid : std::get<0>(body_).grid();
}

int Surrogate::dim() const { return grid().dim(); }

const ChebyshevTensor<double>& Surrogate::dense() const {
  if (is_train()) throw ConfigError("Surrogate: tensor-train surrogate has no dense body");
  return std::get<0>(body_);
}

const TensorTrain<double>& Surrogate::train() const {
  if (!is_train()) throw ConfigError("Surrogate: dense surrogate has no tensor-train body");
  return std::get<1>(body_);
}

double Surrogate::eval(std::span<const double> x) const {
  return is_train() ? tt_cheb_eval(std::get<1>(body_), x)
                    : eval_barycentric(std::get<0>(body_), x);
}

Eigen::VectorXd Surrogate::eval_gradient(std::span<const double> x) const {
  return is_train() ? tt_cheb_gradient(std::get<1>(body_), x)
                    : chebtt::eval_gradient(std::get<0>(body_), x);
}

Eigen::VectorXd Surrogate::theta_lower() const {
  Eigen::VectorXd lo(theta_dim());
  for (int k = 0; k < theta_dim(); ++k) lo[k] = grid().interval(k).lo;
  return lo;
}

Eigen::VectorXd Surrogate::theta_upper() const {
  Eigen::VectorXd hi(theta_dim());
  for (int k = 0; k < theta_dim(); ++k) hi[k] = grid().interval(k).hi;
  return hi;
}

SurfaceEvaluator::SurfaceEvaluator(const Surrogate& s, const SurfaceSpec& spec)
    : surrogate_(&s), spec_(spec) {
  spec_.validate();
  const auto& g = s.grid();
  const int d = g.dim();
  for (double t : spec_.maturities) {
    if (!g.interval(d - 2).contains(t)) {
      std::ostringstream os;
      os << "SurfaceEvaluator: maturity " << t << " outside surrogate interval ["
         << g.interval(d - 2).lo << ", " << g.interval(d - 2).hi << "]";
      throw OutOfDomainError(os.str());
    }
  }
  for (double k : spec_.strikes) {
    if (!g.interval(d - 1).contains(k)) {
      std::ostringstream os;
      os << "SurfaceEvaluator: strike " << k << " outside surrogate interval ["
         << g.interval(d - 1).lo << ", " << g.interval(d - 1).hi << "]";
      throw OutOfDomainError(os.str());
    }
  }
  w_mat_.resize(spec_.maturities.size());
  for (std::size_t i = 0; i < spec_.maturities.size(); ++i) {
    g.value_weights(d - 2, spec_.maturities[i], w_mat_[i]);
  }
  w_strike_.resize(spec_.strikes.size());
  for (std::size_t j = 0; j < spec_.strikes.size(); ++j) {
    g.value_weights(d - 1, spec_.strikes[j], w_strike_[j]);
  }
}

Eigen::VectorXd SurfaceEvaluator::prepared_theta(std::span<const double> theta,
                                                 DomainPolicy policy) const {
  check_policy_supported(policy);
  const auto& g = surrogate_->grid();
  const int theta_d = surrogate_->theta_dim();
  if (static_cast<int>(theta.size()) != theta_d) {
    throw ConfigError("SurfaceEvaluator: theta arity does not match the surrogate");
  }
  Eigen::VectorXd out(theta_d);
  for (int k = 0; k < theta_d; ++k) {
    double x = theta[static_cast<std::size_t>(k)];
    if (!std::isfinite(x)) throw ConfigError("SurfaceEvaluator: non-finite theta component");
    const auto& iv = g.interval(k);
    if (!iv.contains(x)) {
      if (policy == DomainPolicy::kReject) {
        std::ostringstream os;
        os << "theta component " << k << " = " << x << " outside [" << iv.lo << ", " << iv.hi
           << "]";
        throw OutOfDomainError(os.str());
      }
      x = std::clamp(x, iv.lo, iv.hi);
    }
    out[k] = x;
  }
  return out;
}

Eigen::MatrixXd SurfaceEvaluator::values(std::span<const double> theta,
                                         DomainPolicy policy) const {
  const Eigen::VectorXd th = prepared_theta(theta, policy);
  const auto n_mat = static_cast<Eigen::Index>(spec_.maturities.size());
  const auto n_k = static_cast<Eigen::Index>(spec_.strikes.size());
  Eigen::MatrixXd out(n_mat, n_k);

  if (!surrogate_->is_train()) {
    const Eigen::VectorXd slice = dense_theta_contraction(surrogate_->dense(), th, -1);
    const auto& g = surrogate_->grid();
    Eigen::Map<const RowMat> s(slice.data(), g.count(g.dim() - 2), g.count(g.dim() - 1));
    for (Eigen::Index i = 0; i < n_mat; ++i) {
      const Eigen::VectorXd tmp = s.transpose() * w_mat_[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n_k; ++j) {
        out(i, j) = tmp.dot(w_strike_[static_cast<std::size_t>(j)]);
      }
    }
    return out;
  }

  const auto& t = surrogate_->train();
  const auto& g = *t.grid;
  const int theta_d = g.dim() - 2;
  Eigen::VectorXd w;
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Ones(1, 1);
  for (int k = 0; k < theta_d; ++k) {
    g.value_weights(k, th[k], w);
    prefix = prefix * detail::weighted_core(t.core(k), w);
  }
  std::vector<Eigen::MatrixXd> strike_cores(static_cast<std::size_t>(n_k));
  for (Eigen::Index j = 0; j < n_k; ++j) {
    strike_cores[static_cast<std::size_t>(j)] =
        detail::weighted_core(t.core(theta_d + 1), w_strike_[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index i = 0; i < n_mat; ++i) {
    const Eigen::MatrixXd row =
        prefix * detail::weighted_core(t.core(theta_d), w_mat_[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < n_k; ++j) {
      out(i, j) = (row * strike_cores[static_cast<std::size_t>(j)])(0, 0);
    }
  }
  return out;
}

Eigen::MatrixXd SurfaceEvaluator::values_and_gradients(std::span<const double> theta,
                                                       std::vector<Eigen::MatrixXd>& grads,
                                                       DomainPolicy policy) const {
  const Eigen::VectorXd th = prepared_theta(theta, policy);
  const auto n_mat = static_cast<Eigen::Index>(spec_.maturities.size());
  const auto n_k = static_cast<Eigen::Index>(spec_.strikes.size());
  const auto& g = surrogate_->grid();
  const int theta_d = surrogate_->theta_dim();
  grads.assign(static_cast<std::size_t>(theta_d), Eigen::MatrixXd(n_mat, n_k));
  Eigen::MatrixXd out(n_mat, n_k);

  if (!surrogate_->is_train()) {
    const auto& dense = surrogate_->dense();
    auto sandwich = [&](const Eigen::VectorXd& slice, Eigen::MatrixXd& target) {
      Eigen::Map<const RowMat> s(slice.data(), g.count(g.dim() - 2), g.count(g.dim() - 1));
      for (Eigen::Index i = 0; i < n_mat; ++i) {
        const Eigen::VectorXd tmp = s.transpose() * w_mat_[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_k; ++j) {
          target(i, j) = tmp.dot(w_strike_[static_cast<std::size_t>(j)]);
        }
      }
    };
    sandwich(dense_theta_contraction(dense, th, -1), out);
    for (int a = 0; a < theta_d; ++a) {
      sandwich(dense_theta_contraction(dense, th, a), grads[static_cast<std::size_t>(a)]);
    }
    return out;
  }

  const auto& t = surrogate_->train();
  Eigen::VectorXd w;
  std::vector<Eigen::MatrixXd> val_core(static_cast<std::size_t>(theta_d));
  std::vector<Eigen::MatrixXd> der_core(static_cast<std::size_t>(theta_d));
  for (int k = 0; k < theta_d; ++k) {
    g.value_weights(k, th[k], w);
    val_core[static_cast<std::size_t>(k)] = detail::weighted_core(t.core(k), w);
    g.derivative_weights(k, th[k], w);
    der_core[static_cast<std::size_t>(k)] = detail::weighted_core(t.core(k), w);
  }
  // prefix[k] multiplies cores < k, suffix[k] multiplies cores >= k.
  std::vector<Eigen::MatrixXd> prefix(static_cast<std::size_t>(theta_d) + 1);
  prefix[0] = Eigen::MatrixXd::Ones(1, 1);
  for (int k = 0; k < theta_d; ++k) {
    prefix[static_cast<std::size_t>(k) + 1] = prefix[static_cast<std::size_t>(k)] * val_core[static_cast<std::size_t>(k)];
  }
  std::vector<Eigen::MatrixXd> suffix(static_cast<std::size_t>(theta_d) + 1);
  suffix[static_cast<std::size_t>(theta_d)] =
      Eigen::MatrixXd::Identity(t.core(theta_d).rank_left(), t.core(theta_d).rank_left());
  for (int k = theta_d - 1; k >= 0; --k) {
    suffix[static_cast<std::size_t>(k)] =
        val_core[static_cast<std::size_t>(k)] * suffix[static_cast<std::size_t>(k) + 1];
  }
  std::vector<Eigen::MatrixXd> rows(static_cast<std::size_t>(theta_d) + 1);
  rows[0] = prefix[static_cast<std::size_t>(theta_d)];  // value row
  for (int a = 0; a < theta_d; ++a) {
    rows[static_cast<std::size_t>(a) + 1] = prefix[static_cast<std::size_t>(a)] *
                                            der_core[static_cast<std::size_t>(a)] *
                                            suffix[static_cast<std::size_t>(a) + 1];
  }
  std::vector<Eigen::MatrixXd> strike_cores(static_cast<std::size_t>(n_k));
  for (Eigen::Index j = 0; j < n_k; ++j) {
    strike_cores[static_cast<std::size_t>(j)] =
        detail::weighted_core(t.core(theta_d + 1), w_strike_[static_cast<std::size_t>(j)]);
  }
  // Per maturity, fold each row through the maturity core once; the cell loop
  // then reduces against the strike cores in the same association as values().
  std::vector<Eigen::MatrixXd> folded(static_cast<std::size_t>(theta_d) + 1);
  for (Eigen::Index i = 0; i < n_mat; ++i) {
    const Eigen::MatrixXd mat_core =
        detail::weighted_core(t.core(theta_d), w_mat_[static_cast<std::size_t>(i)]);
    for (int q = 0; q <= theta_d; ++q) {
      folded[static_cast<std::size_t>(q)] = rows[static_cast<std::size_t>(q)] * mat_core;
    }
    for (Eigen::Index j = 0; j < n_k; ++j) {
      const auto& kc = strike_cores[static_cast<std::size_t>(j)];
      out(i, j) = (folded[0] * kc)(0, 0);
      for (int a = 0; a < theta_d; ++a) {
        grads[static_cast<std::size_t>(a)](i, j) = (folded[static_cast<std::size_t>(a) + 1] * kc)(0, 0);
      }
    }
  }
  return out;
}

double loss(std::span<const double> theta, const VolSurface& surface, const Surrogate& s,
            DomainPolicy policy) {
  surface.validate();
  const SurfaceEvaluator ev(s, surface.spec);
  const Eigen::MatrixXd v = ev.values(theta, policy);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (!surface.valid(i, j)) continue;
      const double r = surface.quotes(i, j) - v(i, j);
      acc += surface.weights(i, j) * r * r;
    }
  }
  return acc;
}

Eigen::VectorXd loss_gradient(std::span<const double> theta, const VolSurface& surface,
                              const Surrogate& s, DomainPolicy policy) {
  surface.validate();
  const SurfaceEvaluator ev(s, surface.spec);
  std::vector<Eigen::MatrixXd> grads;
  const Eigen::MatrixXd v = ev.values_and_gradients(theta, grads, policy);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(s.theta_dim());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (!surface.valid(i, j)) continue;
      const double coeff = -2.0 * surface.weights(i, j) * (surface.quotes(i, j) - v(i, j));
      for (int k = 0; k < s.theta_dim(); ++k) {
        g[k] += coeff * grads[static_cast<std::size_t>(k)](i, j);
      }
    }
  }
  if (policy == DomainPolicy::kClamp) {
    for (int k = 0; k < s.theta_dim(); ++k) {
      if (!s.grid().interval(k).contains(theta[static_cast<std::size_t>(k)])) g[k] = 0.0;
    }
  }
  return g;
}

VolSurface surrogate_surface(const Surrogate& s, std::span<const double> theta,
                             const SurfaceSpec& spec, DomainPolicy policy) {
  const SurfaceEvaluator ev(s, spec);
  const Eigen::MatrixXd v = ev.values(theta, policy);
  VolSurface out = VolSurface::with_spec(spec);
  out.quotes = v;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (!(v(i, j) > 0.0) || !std::isfinite(v(i, j))) {
        out.quotes(i, j) = 0.0;
        out.valid(i, j) = false;
      }
    }
  }
  return out;
}

namespace {

struct CellRef {
  Eigen::Index i, j;
  double quote, weight;
};

double loss_of(const Eigen::MatrixXd& vals, const std::vector<CellRef>& cells) {
  double acc = 0.0;
  for (const auto& c : cells) {
    const double r = c.quote - vals(c.i, c.j);
    acc += c.weight * r * r;
  }
  return acc;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& x, const ThetaBox& box) {
  return x.cwiseMax(box.lo).cwiseMin(box.hi);
}

struct StartRun {
  Eigen::VectorXd theta;
  double final_loss = 0.0;
  std::vector<double> trajectory;
  int iterations = 0;
  std::string termination;
};

StartRun run_lm_start(const SurfaceEvaluator& ev, const std::vector<CellRef>& cells,
                      const ThetaBox& box, Eigen::VectorXd theta, const CalibrationConfig& cfg,
                      long& evaluator_calls) {
  const int theta_d = static_cast<int>(theta.size());
  std::vector<Eigen::MatrixXd> grads;
  auto values_at = [&](const Eigen::VectorXd& th) {
    ++evaluator_calls;
    return ev.values(std::span<const double>(th.data(), th.size()), cfg.policy);
  };
  auto gradients_at = [&](const Eigen::VectorXd& th) {
    ++evaluator_calls;
    return ev.values_and_gradients(std::span<const double>(th.data(), th.size()), grads,
                                   cfg.policy);
  };

  StartRun run;
  run.termination = "iterations";
  Eigen::MatrixXd vals = gradients_at(theta);
  double cur_loss = loss_of(vals, cells);
  run.trajectory.push_back(cur_loss);

  double lambda = 1e-3;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    run.iterations = it + 1;
    // Gauss-Newton pieces: residual r_c = sqrt(w)(q - v), J = dr/dtheta.
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(theta_d);
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(theta_d, theta_d);
    Eigen::VectorXd jrow(theta_d);
    for (const auto& c : cells) {
      const double res = c.quote - vals(c.i, c.j);
      for (int k = 0; k < theta_d; ++k) jrow[k] = grads[static_cast<std::size_t>(k)](c.i, c.j);
      jtr.noalias() -= c.weight * res * jrow;  // J^T r with the -sqrt(w) sign folded in
      jtj.selfadjointView<Eigen::Lower>().rankUpdate(jrow, c.weight);
    }
    // Only the lower triangle of jtj is filled; LDLT below reads just that.

    // Projected gradient: components pinned at an active bound do not count.
    Eigen::VectorXd pg = 2.0 * jtr;
    for (int k = 0; k < theta_d; ++k) {
      if (theta[k] <= box.lo[k] && pg[k] > 0.0) pg[k] = 0.0;
      if (theta[k] >= box.hi[k] && pg[k] < 0.0) pg[k] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() < cfg.gradient_tol) {
      run.termination = "gradient";
      run.iterations = it;
      break;
    }

    // Marquardt scaling keeps the step invariant under a positive rescaling
    // of all weights; the floor only guards identically-zero columns.
    const double max_diag = jtj.diagonal().maxCoeff();
    const Eigen::VectorXd damping = jtj.diagonal().cwiseMax(1e-12 * max_diag);

    bool accepted = false;
    double accepted_step = 0.0;
    for (int tries = 0; tries < 100; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * damping;
      const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
      const Eigen::VectorXd candidate = project_box(theta + delta, box);
      if ((candidate.array() == theta.array()).all()) {
        lambda *= 4.0;
      } else {
        const Eigen::MatrixXd cand_vals = values_at(candidate);
        const double cand_loss = loss_of(cand_vals, cells);
        if (cand_loss < cur_loss) {
          accepted_step = (candidate - theta).norm();
          theta = candidate;
          cur_loss = cand_loss;
          run.trajectory.push_back(cur_loss);
          lambda = std::max(lambda / 3.0, 1e-14);
          accepted = true;
          break;
        }
        lambda *= 4.0;
      }
      if (lambda > 1e14) break;
    }
    if (!accepted) {
      run.termination = "step";  // no resolvable improving step left
      break;
    }
    if (accepted_step < cfg.step_tol) {
      run.termination = "step";
      break;
    }
    vals = gradients_at(theta);
  }

  run.theta = theta;
  run.final_loss = cur_loss;
  return run;
}

}  // namespace

CalibrationResult calibrate(const VolSurface& surface, const Surrogate& s,
                            const std::optional<ThetaBox>& bounds, const CalibrationConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  check_policy_supported(cfg.policy);
  surface.validate();
  if (cfg.multi_starts < 1) throw ConfigError("calibrate: need at least one start");
  if (cfg.max_iterations < 1) throw ConfigError("calibrate: need at least one iteration");

  const int theta_d = s.theta_dim();
  ThetaBox box{s.theta_lower(), s.theta_upper()};
  if (bounds) {
    if (bounds->lo.size() != theta_d || bounds->hi.size() != theta_d) {
      throw ConfigError("calibrate: bounds arity does not match the surrogate");
    }
    for (int k = 0; k < theta_d; ++k) {
      if (!(bounds->lo[k] <= bounds->hi[k]) || bounds->lo[k] < box.lo[k] ||
          bounds->hi[k] > box.hi[k]) {
        throw ConfigError("calibrate: bounds must be ordered and inside the surrogate theta box");
      }
    }
    box = *bounds;
  }

  const SurfaceEvaluator ev(s, surface.spec);
  std::vector<CellRef> cells;
  for (Eigen::Index i = 0; i < surface.quotes.rows(); ++i) {
    for (Eigen::Index j = 0; j < surface.quotes.cols(); ++j) {
      if (surface.valid(i, j)) cells.push_back({i, j, surface.quotes(i, j), surface.weights(i, j)});
    }
  }
  if (cells.empty()) throw ConfigError("calibrate: surface has no valid cells");

  // Latin hypercube starts: one stratum per start and dimension.
  auto eng = make_engine(cfg.rng_seed, StreamTag::kCalibration, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_starts = cfg.multi_starts;
  Eigen::MatrixXd starts(theta_d, n_starts);
  std::vector<int> perm(static_cast<std::size_t>(n_starts));
  for (int k = 0; k < theta_d; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), eng);
    for (int si = 0; si < n_starts; ++si) {
      const double frac = (perm[static_cast<std::size_t>(si)] + unit(eng)) / n_starts;
      starts(k, si) = box.lo[k] + frac * (box.hi[k] - box.lo[k]);
    }
  }

  long evaluator_calls = 0;
  std::vector<StartRun> runs;
  runs.reserve(static_cast<std::size_t>(n_starts));
  for (int si = 0; si < n_starts; ++si) {
    runs.push_back(run_lm_start(ev, cells, box, starts.col(si), cfg, evaluator_calls));
  }
  std::size_t best = 0;
  for (std::size_t si = 1; si < runs.size(); ++si) {
    if (runs[si].final_loss < runs[best].final_loss) best = si;
  }
  bool any_progress = false;
  for (const auto& r : runs) {
    if (r.trajectory.size() > 1) any_progress = true;
  }

  CalibrationResult out;
  out.theta = runs[best].theta;
  out.final_loss = runs[best].final_loss;
  out.loss_trajectory = runs[best].trajectory;
  out.iterations = runs[best].iterations;
  out.termination = any_progress ? runs[best].termination : "no-progress";
  out.surrogate_calls = evaluator_calls + 1;  // + the refit evaluation below
  out.pricer_calls = 0;
  out.out_of_box_probes = 0;  // probes are projected into the box before evaluation

  // RMSE recomputed from the fitted surface over the surface's own mask.
  const Eigen::MatrixXd fitted =
      ev.values(std::span<const double>(out.theta.data(), out.theta.size()), cfg.policy);
  double acc = 0.0;
  for (const auto& c : cells) {
    const double d = c.quote - fitted(c.i, c.j);
    acc += d * d;
  }
  out.rmse = std::sqrt(acc / static_cast<double>(cells.size()));

  const int pillars = theta_d - 3;
  if (pillars >= 1) {
    std::vector<double> times = cfg.pillar_times;
    if (times.empty()) {
      for (int i = 1; i <= pillars; ++i) times.push_back(2.0 * i / pillars);
    }
    if (static_cast<int>(times.size()) == pillars) {
      RoughBergomiParams p;
      p.xi.times = times;
      p.xi.values.assign(out.theta.data(), out.theta.data() + pillars);
      p.eta = out.theta[pillars];
      p.rho = out.theta[pillars + 1];
      p.hurst = out.theta[pillars + 2];
      out.theta_star = p;
    } else {
      throw ConfigError("calibrate: pillar_times length must equal theta_dim - 3");
    }
  }

  out.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace chebtt
