#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "chebtt/errors.hpp"
#include "chebtt/vol_surface.hpp"

namespace chebtt {

// Piecewise-constant forward variance term structure. values[i] applies on
// (times[i-1], times[i]] (left-open, right-closed, so the curve is
// left-continuous at pillars); the last value extends beyond the final
// pillar, and at(0) returns the first value.
struct ForwardVarianceCurve {
  std::vector<double> times;
  std::vector<double> values;

  static ForwardVarianceCurve constant(double v) { return {{1.0}, {v}}; }
  double at(double t) const;
  void validate() const;
};

// Model parameters. Flattened vector order is (xi pillar values..., eta,
// rho, hurst); pillar times are structural metadata, not parameters.
struct RoughBergomiParams {
  ForwardVarianceCurve xi;
  double eta = 1.0;   // vol-of-vol, > 0
  double rho = 0.0;   // driver correlation, in [-1, 1]
  double hurst = 0.5; // in (0, 1)

  void validate() const;
  Eigen::VectorXd flatten() const;
  static RoughBergomiParams from_flat(const Eigen::VectorXd& v,
                                      const std::vector<double>& pillar_times);
};

enum class Scheme {
  kExactCholesky,  // joint Gaussian of (Brownian increments, Volterra values)
  kHybrid,         // exact near-singularity block + Riemann tail convolution
};

enum class Estimator {
  kTerminalPayoff,  // average the discounted payoff of the simulated spot
  kConditionalBS,   // average closed-form prices conditional on the variance path
};

struct MCConfig {
  std::int64_t paths = 60000;
  int time_steps_per_year = 120;
  std::uint64_t rng_seed = 0;
  Scheme scheme = Scheme::kExactCholesky;
  Estimator estimator = Estimator::kTerminalPayoff;
  // Variance-reduction toggles; both leave the estimator unbiased.
  bool antithetic = false;      // pair each path with its sign-flipped draws
  bool itm_put_parity = true;   // price strikes < 1 as (1 - K) + put estimate

  void validate() const;
};

// Uniform simulation grid covering [0, max maturity]. Requested maturities
// are snapped to the nearest grid time (never below one step); with the
// default 120 steps/year the standard surface maturities land exactly.
struct TimeGrid {
  int steps = 0;       // grid has times k * dt, k = 0..steps
  double dt = 0.0;
  std::vector<int> maturity_step;  // per input maturity, in [1, steps]
};

TimeGrid make_time_grid(std::span<const double> maturities, int time_steps_per_year);

// Overlap integral of the power kernel on the unit-step grid:
//   integral over [0, min(i,j)] of (i-u)^(H-1/2) (j-u)^(H-1/2) du,
// so that Cov(Y_i, Y_j) = dt^(2H) * volterra_cov_integral(i, j, H) for the
// Volterra process Y_t = integral of (t-s)^(H-1/2) dZ_s. The diagonal is the
// closed form i^(2H)/(2H); off-diagonal entries use Gauss-Jacobi quadrature
// on the singular first unit segment and Gauss-Legendre on the rest.
double volterra_cov_integral(int i, int j, double hurst);

// Full matrix of the above for i, j in 1..steps; O(steps^2) quadrature
// segments via per-gap running sums.
Eigen::MatrixXd volterra_covariance(int steps, double hurst);

// Simulates paths of the log-price X (X_0 = 0, spot 1, zero rates) and
// returns X at each requested maturity, paths x maturities. The Volterra
// exponent is simulated jointly with the Brownian increments (exact
// covariance Cholesky by default), and the variance process applies the
// Wick compensator exp(G - Var(G)/2), so E[V_t] = xi(t) exactly and the
// log-Euler walk is a martingale in expectation at every step.
// Randomness is drawn per 512-path block from counter-based streams, so
// results depend only on (seed, paths), not on scheduling.
Eigen::MatrixXd simulate_terminal_log_prices(const RoughBergomiParams& p,
                                             std::span<const double> maturities,
                                             const MCConfig& mc);

// Per-path conditional state at each requested maturity, paths x maturities.
// Conditional on the variance path, the price of a call struck at K is the
// closed-form value bs_call_total(exp(log_spot), K, sqrt(res_var)): the
// correlated part of the spot diffusion is absorbed into an effective spot
// factor (itself a martingale with mean 1) and the orthogonal remainder
// (1 - rho^2) * integrated variance stays log-normal. Averaging those values
// is unbiased, strictly positive at every strike, and collapses to zero
// variance as eta -> 0, which makes deep wings resolvable at modest path
// counts where the raw payoff average would be exactly intrinsic.
struct ConditionalDraws {
  Eigen::MatrixXd log_spot;  // log of the effective spot factor
  Eigen::MatrixXd res_var;   // residual total variance, >= 0
};

ConditionalDraws simulate_conditional_draws(const RoughBergomiParams& p,
                                            std::span<const double> maturities,
                                            const MCConfig& mc);

struct PriceSurface {
  SurfaceSpec spec;
  Eigen::MatrixXd price;      // maturities x strikes
  Eigen::MatrixXd std_error;  // standard error of each price estimate
  // price - intrinsic, accumulated on the out-of-the-money side whenever the
  // estimator prices that side (itm_put_parity for strikes below one), so
  // deep wings keep full relative precision instead of rounding into the
  // intrinsic value when the two are added.
  Eigen::MatrixXd time_value;
};

// One path set prices every (maturity, strike) cell.
PriceSurface price_call_surface(const RoughBergomiParams& p, const SurfaceSpec& spec,
                                const MCConfig& mc);

// price_call_surface composed with implied-vol inversion per cell. The
// conditional estimator inverts the time value directly (each path is a
// closed-form price, so wing time values far below float noise are exact and
// meaningful); the payoff average inverts the raw price, where anything
// within float noise of the arbitrage bounds is indistinguishable from a
// miss. Cells with no solution are flagged invalid, never filled in; throws
// SimulationError only if every cell is invalid.
VolSurface implied_vol_surface(const RoughBergomiParams& p, const SurfaceSpec& spec,
                               const MCConfig& mc);

}  // namespace chebtt
