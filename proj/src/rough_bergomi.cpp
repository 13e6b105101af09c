#include "chebtt/rough_bergomi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <utility>

#include "chebtt/black_scholes.hpp"
#include "chebtt/rng.hpp"

namespace chebtt {
namespace {

constexpr int kGaussJacobiPoints = 32;
constexpr int kGaussLegendrePoints = 16;
constexpr double kCovarianceJitter = 1e-12;
// Paths are simulated in fixed-size blocks, one RNG stream per block, so a
// future parallel dispatch cannot change the numbers.
constexpr std::int64_t kPathBlock = 512;

struct QuadratureRule {
  Eigen::VectorXd nodes;  // on [-1, 1]
  Eigen::VectorXd weights;
};

// Golub-Welsch rule for the Jacobi weight (1-x)^a (1+x)^b on [-1, 1];
// a = b = 0 gives Gauss-Legendre.
QuadratureRule gauss_jacobi(int n, double a, double b) {
  const double ab = a + b;
  Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
  jm(0, 0) = (b - a) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    const double two_k = 2.0 * k + ab;
    jm(k, k) = (b * b - a * a) / (two_k * (two_k + 2.0));
    const double beta = 4.0 * k * (k + a) * (k + b) * (k + ab) /
                        (two_k * two_k * (two_k + 1.0) * (two_k - 1.0));
    jm(k, k - 1) = jm(k - 1, k) = std::sqrt(beta);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jm);
  const double mu0 =
      std::pow(2.0, ab + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(ab + 2.0);
  QuadratureRule r;
  r.nodes = es.eigenvalues();
  r.weights = mu0 * es.eigenvectors().row(0).array().square().matrix();
  return r;
}

// Quadrature rules for the kernel overlap integrand (g+y)^a y^a at a fixed
// exponent a = H - 1/2, with the y^a endpoint singularity absorbed into the
// Gauss-Jacobi weight on the first unit segment.
struct KernelRules {
  double a = 0.0;
  Eigen::ArrayXd jac_y, jac_w;  // on [0, 1], weight y^a included in jac_w
  Eigen::ArrayXd leg_y, leg_w;  // plain rule on [0, 1]
};

KernelRules make_kernel_rules(double hurst) {
  KernelRules kr;
  kr.a = hurst - 0.5;
  const QuadratureRule gj = gauss_jacobi(kGaussJacobiPoints, 0.0, kr.a);
  kr.jac_y = (gj.nodes.array() + 1.0) / 2.0;
  kr.jac_w = gj.weights.array() * std::pow(2.0, -kr.a - 1.0);
  const QuadratureRule gl = gauss_jacobi(kGaussLegendrePoints, 0.0, 0.0);
  kr.leg_y = (gl.nodes.array() + 1.0) / 2.0;
  kr.leg_w = gl.weights.array() / 2.0;
  return kr;
}

// integral over [0, 1] of (g+y)^a y^a dy for gap g >= 1.
double first_segment(const KernelRules& kr, double g) {
  return (kr.jac_w * (g + kr.jac_y).pow(kr.a)).sum();
}

// integral over [k, k+1] of (g+y)^a y^a dy for k >= 1 (smooth integrand).
double unit_segment(const KernelRules& kr, double g, double k) {
  const Eigen::ArrayXd y = k + kr.leg_y;
  return (kr.leg_w * (g + y).pow(kr.a) * y.pow(kr.a)).sum();
}

void check_hurst(double hurst) {
  if (!(hurst > 0.0) || !(hurst < 1.0)) {
    throw ConfigError("hurst parameter must lie in (0, 1)");
  }
}

// Lower-triangular cross block Cov(Y_i, dZ_k), k <= i, divided by sqrt(dt):
// the closed form integral of (t_i - s)^(H-1/2) over the k-th step.
Eigen::MatrixXd cross_cholesky_block(int steps, double hurst, double dt) {
  const double e = hurst + 0.5;
  const double scale = std::pow(dt, e) / (e * std::sqrt(dt));
  Eigen::MatrixXd l21 = Eigen::MatrixXd::Zero(steps, steps);
  for (int i = 1; i <= steps; ++i) {
    for (int k = 1; k <= i; ++k) {
      l21(i - 1, k - 1) = scale * (std::pow(i - k + 1, e) - std::pow(i - k, e));
    }
  }
  return l21;
}

}  // namespace

double ForwardVarianceCurve::at(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  const auto idx = (it == times.end()) ? times.size() - 1
                                       : static_cast<std::size_t>(it - times.begin());
  return values[idx];
}

void ForwardVarianceCurve::validate() const {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("ForwardVarianceCurve: need equally many pillar times and values, at least one");
  }
  double prev = -1.0;
  for (double t : times) {
    if (!std::isfinite(t) || t < 0.0 || t <= prev) {
      throw ConfigError("ForwardVarianceCurve: pillar times must be finite, >= 0, strictly increasing");
    }
    prev = t;
  }
  for (double v : values) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw ConfigError("ForwardVarianceCurve: variance values must be finite and > 0");
    }
  }
}

void RoughBergomiParams::validate() const {
  xi.validate();
  if (!std::isfinite(eta) || !(eta > 0.0)) throw ConfigError("RoughBergomiParams: eta must be > 0");
  if (!std::isfinite(rho) || rho < -1.0 || rho > 1.0) {
    throw ConfigError("RoughBergomiParams: rho must lie in [-1, 1]");
  }
  if (!std::isfinite(hurst)) throw ConfigError("RoughBergomiParams: hurst must be finite");
  check_hurst(hurst);
}

Eigen::VectorXd RoughBergomiParams::flatten() const {
  const auto n = static_cast<Eigen::Index>(xi.values.size());
  Eigen::VectorXd v(n + 3);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = xi.values[static_cast<std::size_t>(i)];
  v[n] = eta;
  v[n + 1] = rho;
  v[n + 2] = hurst;
  return v;
}

RoughBergomiParams RoughBergomiParams::from_flat(const Eigen::VectorXd& v,
                                                 const std::vector<double>& pillar_times) {
  const auto n = static_cast<Eigen::Index>(pillar_times.size());
  if (v.size() != n + 3) {
    throw ConfigError("RoughBergomiParams::from_flat: vector length must be pillar count + 3");
  }
  RoughBergomiParams p;
  p.xi.times = pillar_times;
  p.xi.values.assign(v.data(), v.data() + n);
  p.eta = v[n];
  p.rho = v[n + 1];
  p.hurst = v[n + 2];
  p.validate();
  return p;
}

void MCConfig::validate() const {
  if (paths < 2) throw ConfigError("MCConfig: need at least 2 paths");
  if (time_steps_per_year < 1) throw ConfigError("MCConfig: need at least 1 time step per year");
  if (antithetic && (paths % 2 != 0 || paths < 4)) {
    throw ConfigError("MCConfig: antithetic sampling needs an even path count >= 4");
  }
}

TimeGrid make_time_grid(std::span<const double> maturities, int time_steps_per_year) {
  if (maturities.empty()) throw ConfigError("make_time_grid: no maturities");
  if (time_steps_per_year < 1) throw ConfigError("make_time_grid: need >= 1 step per year");
  double prev = 0.0;
  for (double t : maturities) {
    if (!std::isfinite(t) || !(t > prev)) {
      throw ConfigError("make_time_grid: maturities must be finite, positive, strictly increasing");
    }
    prev = t;
  }
  TimeGrid g;
  const double horizon = maturities.back();
  g.steps = std::max(1, static_cast<int>(std::ceil(time_steps_per_year * horizon - 1e-9)));
  g.dt = horizon / g.steps;
  g.maturity_step.reserve(maturities.size());
  for (double t : maturities) {
    const int k = static_cast<int>(std::llround(t / g.dt));
    g.maturity_step.push_back(std::clamp(k, 1, g.steps));
  }
  return g;
}

double volterra_cov_integral(int i, int j, double hurst) {
  check_hurst(hurst);
  if (i < 1 || j < 1) throw ConfigError("volterra_cov_integral: indices start at 1");
  if (i == j) return std::pow(i, 2.0 * hurst) / (2.0 * hurst);
  const int g = std::abs(i - j);
  const int m = std::min(i, j);
  const KernelRules kr = make_kernel_rules(hurst);
  double acc = first_segment(kr, g);
  for (int k = 1; k < m; ++k) acc += unit_segment(kr, g, k);
  return acc;
}

Eigen::MatrixXd volterra_covariance(int steps, double hurst) {
  check_hurst(hurst);
  if (steps < 1) throw ConfigError("volterra_covariance: need >= 1 step");
  Eigen::MatrixXd m(steps, steps);
  for (int i = 1; i <= steps; ++i) {
    m(i - 1, i - 1) = std::pow(i, 2.0 * hurst) / (2.0 * hurst);
  }
  const KernelRules kr = make_kernel_rules(hurst);
  // One running sum per gap: I(g+j, j) = I(g+j-1, j-1) + segment [j-1, j].
  for (int g = 1; g < steps; ++g) {
    double acc = first_segment(kr, g);
    m(g, 0) = m(0, g) = acc;
    for (int j = 2; j + g <= steps; ++j) {
      acc += unit_segment(kr, g, j - 1);
      m(g + j - 1, j - 1) = m(j - 1, g + j - 1) = acc;
    }
  }
  return m;
}

namespace {

// Per-call setup shared by both estimators: time grid, scheme factorization,
// and the compensated variance prefactor. vary[k] is the scheme's own
// Var(Y_{k+1}); compensating with it (not the continuous-time t^(2H)) keeps
// E[V_t] = xi(t) exact under either scheme.
struct SimSetup {
  TimeGrid tg;
  Eigen::MatrixXd l21, l22, conv;
  double h_l21 = 0.0, h_l22 = 0.0;
  Eigen::VectorXd xi_comp;
};

SimSetup make_sim_setup(const RoughBergomiParams& p, std::span<const double> maturities,
                        const MCConfig& mc) {
  SimSetup s;
  s.tg = make_time_grid(maturities, mc.time_steps_per_year);
  const int n = s.tg.steps;
  const double dt = s.tg.dt;
  const double h = p.hurst;

  Eigen::VectorXd vary(n);
  if (mc.scheme == Scheme::kExactCholesky) {
    Eigen::MatrixXd cyy = std::pow(dt, 2.0 * h) * volterra_covariance(n, h);
    vary = cyy.diagonal();
    s.l21 = cross_cholesky_block(n, h, dt);
    Eigen::MatrixXd schur = cyy - s.l21 * s.l21.transpose();
    schur.diagonal().array() += kCovarianceJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(schur);
    if (llt.info() != Eigen::Success) {
      throw SimulationError("rough Bergomi simulation: covariance not positive definite after regularization");
    }
    s.l22 = llt.matrixL();
  } else {
    // Hybrid: the step containing the kernel singularity is simulated with
    // its exact 2x2 covariance against dZ; older steps enter through a
    // mean-value Riemann weight per lag.
    const double a = h - 0.5;
    const double e = h + 0.5;
    const double c12 = std::pow(dt, e) / e;
    const double v11 = std::pow(dt, 2.0 * h) / (2.0 * h);
    s.h_l21 = c12 / std::sqrt(dt);
    s.h_l22 = std::sqrt(std::max(v11 - s.h_l21 * s.h_l21, 0.0));
    s.conv = Eigen::MatrixXd::Zero(n, n);
    for (int i = 2; i <= n; ++i) {
      for (int m = 1; m < i; ++m) {
        const int lag = i - m + 1;
        s.conv(i - 1, m - 1) =
            std::pow(dt, a) * (std::pow(lag, a + 1.0) - std::pow(lag - 1.0, a + 1.0)) / (a + 1.0);
      }
    }
    for (int k = 0; k < n; ++k) {
      vary[k] = v11 + dt * s.conv.row(k).squaredNorm();
    }
  }

  // Per-step variance prefactor xi(t_k) exp(-0.5 Var(G_k)) at the step's
  // left endpoint; multiplied by exp(G_k) on the fly.
  s.xi_comp.resize(n);
  s.xi_comp[0] = p.xi.at(0.0);  // Y_0 = 0, no compensation at t = 0
  for (int k = 1; k < n; ++k) {
    s.xi_comp[k] = p.xi.at(k * dt) * std::exp(-h * p.eta * p.eta * vary[k - 1]);
  }
  return s;
}

// Fills a block of standard normal draws, one column per path, each path's
// draws contiguous across the passed matrices. Antithetic pairs sit in
// adjacent columns; even block size and the even-paths precondition keep
// pairs from straddling blocks.
void fill_block_draws(std::uint64_t seed, std::uint64_t block, int bs, bool antithetic,
                      std::span<Eigen::MatrixXd*> gs) {
  auto eng = make_engine(seed, StreamTag::kMonteCarlo, block);
  std::normal_distribution<double> nd;
  const int stride = antithetic ? 2 : 1;
  for (int c = 0; c < bs; c += stride) {
    for (Eigen::MatrixXd* g : gs) {
      for (Eigen::Index r = 0; r < g->rows(); ++r) (*g)(r, c) = nd(eng);
    }
    if (antithetic && c + 1 < bs) {
      for (Eigen::MatrixXd* g : gs) g->col(c + 1) = -g->col(c);
    }
  }
}

}  // namespace

Eigen::MatrixXd simulate_terminal_log_prices(const RoughBergomiParams& p,
                                             std::span<const double> maturities,
                                             const MCConfig& mc) {
  p.validate();
  mc.validate();
  const SimSetup su = make_sim_setup(p, maturities, mc);
  const int n = su.tg.steps;
  const double dt = su.tg.dt;

  const double s2h_eta = std::sqrt(2.0 * p.hurst) * p.eta;
  const std::int64_t total_paths = mc.paths;
  const auto n_mat = static_cast<Eigen::Index>(maturities.size());
  Eigen::MatrixXd out(total_paths, n_mat);
  const double rho = p.rho;
  const double rho_c = std::sqrt(std::max(1.0 - rho * rho, 0.0));
  const double sdt = std::sqrt(dt);

  Eigen::MatrixXd g1(n, kPathBlock), g2(n, kPathBlock), g3(n, kPathBlock);
  std::array<Eigen::MatrixXd*, 3> gs = {&g1, &g2, &g3};
  for (std::int64_t base = 0, block = 0; base < total_paths; base += kPathBlock, ++block) {
    const auto bs = static_cast<int>(std::min<std::int64_t>(kPathBlock, total_paths - base));
    fill_block_draws(mc.rng_seed, static_cast<std::uint64_t>(block), bs, mc.antithetic, gs);
    const auto g1b = g1.leftCols(bs);
    const auto g2b = g2.leftCols(bs);
    const auto g3b = g3.leftCols(bs);

    Eigen::MatrixXd dz = sdt * g1b;
    Eigen::MatrixXd y;
    if (mc.scheme == Scheme::kExactCholesky) {
      y = su.l21 * g1b + su.l22 * g2b;
    } else {
      y = su.conv * dz + su.h_l21 * g1b + su.h_l22 * g2b;
    }
    Eigen::MatrixXd dw = rho * dz + (rho_c * sdt) * g3b;

    Eigen::ArrayXd x = Eigen::ArrayXd::Zero(bs);
    Eigen::ArrayXd v(bs);
    Eigen::Index mi = 0;
    for (int k = 0; k < n; ++k) {
      if (k == 0) {
        v.setConstant(su.xi_comp[0]);
      } else {
        v = su.xi_comp[k] * (s2h_eta * y.row(k - 1).transpose().array()).exp();
      }
      x += -0.5 * dt * v + v.sqrt() * dw.row(k).transpose().array();
      while (mi < n_mat && su.tg.maturity_step[static_cast<std::size_t>(mi)] == k + 1) {
        out.col(mi).segment(base, bs) = x.matrix();
        ++mi;
      }
    }
  }
  return out;
}

ConditionalDraws simulate_conditional_draws(const RoughBergomiParams& p,
                                            std::span<const double> maturities,
                                            const MCConfig& mc) {
  p.validate();
  mc.validate();
  const SimSetup su = make_sim_setup(p, maturities, mc);
  const int n = su.tg.steps;
  const double dt = su.tg.dt;

  const double s2h_eta = std::sqrt(2.0 * p.hurst) * p.eta;
  const std::int64_t total_paths = mc.paths;
  const auto n_mat = static_cast<Eigen::Index>(maturities.size());
  ConditionalDraws out;
  out.log_spot.resize(total_paths, n_mat);
  out.res_var.resize(total_paths, n_mat);
  const double rho = p.rho;
  const double rho2 = rho * rho;
  const double res_frac = std::max(1.0 - rho2, 0.0);
  const double sdt = std::sqrt(dt);

  // Only the variance driver (g1, g2) is consumed; the orthogonal spot
  // component is integrated out analytically, so g3 is never drawn.
  Eigen::MatrixXd g1(n, kPathBlock), g2(n, kPathBlock);
  std::array<Eigen::MatrixXd*, 2> gs = {&g1, &g2};
  for (std::int64_t base = 0, block = 0; base < total_paths; base += kPathBlock, ++block) {
    const auto bs = static_cast<int>(std::min<std::int64_t>(kPathBlock, total_paths - base));
    fill_block_draws(mc.rng_seed, static_cast<std::uint64_t>(block), bs, mc.antithetic, gs);
    const auto g1b = g1.leftCols(bs);
    const auto g2b = g2.leftCols(bs);

    Eigen::MatrixXd dz = sdt * g1b;
    Eigen::MatrixXd y;
    if (mc.scheme == Scheme::kExactCholesky) {
      y = su.l21 * g1b + su.l22 * g2b;
    } else {
      y = su.conv * dz + su.h_l21 * g1b + su.h_l22 * g2b;
    }

    // The effective spot walks with the correlated driver only; v at step k
    // depends on draws strictly before dz.row(k), so each step multiplier
    // exp(rho sqrt(v) dZ - rho^2 v dt / 2) has conditional mean one and the
    // factor is an exact discrete martingale.
    Eigen::ArrayXd xeff = Eigen::ArrayXd::Zero(bs);
    Eigen::ArrayXd iv = Eigen::ArrayXd::Zero(bs);
    Eigen::ArrayXd v(bs);
    Eigen::Index mi = 0;
    for (int k = 0; k < n; ++k) {
      if (k == 0) {
        v.setConstant(su.xi_comp[0]);
      } else {
        v = su.xi_comp[k] * (s2h_eta * y.row(k - 1).transpose().array()).exp();
      }
      xeff += -0.5 * rho2 * dt * v + rho * v.sqrt() * dz.row(k).transpose().array();
      iv += dt * v;
      while (mi < n_mat && su.tg.maturity_step[static_cast<std::size_t>(mi)] == k + 1) {
        out.log_spot.col(mi).segment(base, bs) = xeff.matrix();
        out.res_var.col(mi).segment(base, bs) = (res_frac * iv).matrix();
        ++mi;
      }
    }
  }
  return out;
}

namespace {

// Mean and standard error of a per-path sample. An antithetic pair is one
// sample: its halves are dependent by construction.
std::pair<double, double> sample_mean_se(const Eigen::ArrayXd& sample, bool antithetic) {
  const auto paths = sample.size();
  if (antithetic) {
    const auto pairs = paths / 2;
    Eigen::ArrayXd folded(pairs);
    for (Eigen::Index i = 0; i < pairs; ++i) {
      folded[i] = 0.5 * (sample[2 * i] + sample[2 * i + 1]);
    }
    const double mean = folded.mean();
    const double se = std::sqrt((folded - mean).square().sum() /
                                (static_cast<double>(pairs - 1) * static_cast<double>(pairs)));
    return {mean, se};
  }
  const double mean = sample.mean();
  const double se = std::sqrt((sample - mean).square().sum() /
                              (static_cast<double>(paths - 1) * static_cast<double>(paths)));
  return {mean, se};
}

}  // namespace

PriceSurface price_call_surface(const RoughBergomiParams& p, const SurfaceSpec& spec,
                                const MCConfig& mc) {
  spec.validate();
  const auto n_mat = static_cast<Eigen::Index>(spec.maturities.size());
  const auto n_k = static_cast<Eigen::Index>(spec.strikes.size());
  PriceSurface out;
  out.spec = spec;
  out.price.resize(n_mat, n_k);
  out.std_error.resize(n_mat, n_k);
  out.time_value.resize(n_mat, n_k);

  if (mc.estimator == Estimator::kConditionalBS) {
    const ConditionalDraws cd = simulate_conditional_draws(p, spec.maturities, mc);
    const auto paths = cd.log_spot.rows();
    Eigen::ArrayXd sample(paths);
    for (Eigen::Index m = 0; m < n_mat; ++m) {
      const Eigen::ArrayXd spot = cd.log_spot.col(m).array().exp();
      const Eigen::ArrayXd tstd = cd.res_var.col(m).array().max(0.0).sqrt();
      for (Eigen::Index j = 0; j < n_k; ++j) {
        const double strike = spec.strikes[static_cast<std::size_t>(j)];
        const bool parity = mc.itm_put_parity && strike < 1.0;
        for (Eigen::Index i = 0; i < paths; ++i) {
          sample[i] = parity ? bs_put_total(spot[i], strike, tstd[i])
                             : bs_call_total(spot[i], strike, tstd[i]);
        }
        const auto [mean, se] = sample_mean_se(sample, mc.antithetic);
        // Under parity the sample is the put, whose intrinsic value at unit
        // spot vanishes for strike < 1: the mean is the shared time value of
        // both sides, exact even when adding the call intrinsic rounds it
        // away entirely. Without parity the subtraction can cancel.
        out.price(m, j) = parity ? (1.0 - strike) + mean : mean;
        out.std_error(m, j) = se;
        out.time_value(m, j) =
            (parity || strike >= 1.0) ? mean : mean - (1.0 - strike);
      }
    }
    return out;
  }

  const Eigen::MatrixXd x = simulate_terminal_log_prices(p, spec.maturities, mc);
  const auto paths = x.rows();
  Eigen::ArrayXd payoff(paths);
  for (Eigen::Index m = 0; m < n_mat; ++m) {
    const Eigen::ArrayXd terminal = x.col(m).array().exp();
    for (Eigen::Index j = 0; j < n_k; ++j) {
      const double strike = spec.strikes[static_cast<std::size_t>(j)];
      // ITM calls through put parity: the put payoff is bounded by the
      // strike, so the estimator variance stays small where the call payoff
      // is dominated by the forward.
      const bool parity = mc.itm_put_parity && strike < 1.0;
      if (parity) {
        payoff = (strike - terminal).max(0.0);
      } else {
        payoff = (terminal - strike).max(0.0);
      }
      const auto [mean, se] = sample_mean_se(payoff, mc.antithetic);
      out.price(m, j) = parity ? (1.0 - strike) + mean : mean;
      out.std_error(m, j) = se;
      out.time_value(m, j) =
          (parity || strike >= 1.0) ? mean : mean - (1.0 - strike);
    }
  }
  return out;
}

VolSurface implied_vol_surface(const RoughBergomiParams& p, const SurfaceSpec& spec,
                               const MCConfig& mc) {
  const PriceSurface ps = price_call_surface(p, spec, mc);
  const bool from_tv = mc.estimator == Estimator::kConditionalBS;
  VolSurface out = VolSurface::with_spec(spec);
  Eigen::Index n_valid = 0;
  for (Eigen::Index i = 0; i < ps.price.rows(); ++i) {
    for (Eigen::Index j = 0; j < ps.price.cols(); ++j) {
      const double strike = spec.strikes[static_cast<std::size_t>(j)];
      const double maturity = spec.maturities[static_cast<std::size_t>(i)];
      try {
        out.quotes(i, j) = from_tv
                               ? implied_vol_from_time_value(ps.time_value(i, j), strike, maturity)
                               : implied_vol(ps.price(i, j), strike, maturity);
        ++n_valid;
      } catch (const NoSolutionError&) {
        out.quotes(i, j) = 0.0;
        out.valid(i, j) = false;
      }
    }
  }
  if (n_valid == 0) {
    throw SimulationError("implied_vol_surface: every cell priced outside the no-arbitrage band");
  }
  return out;
}

}  // namespace chebtt
