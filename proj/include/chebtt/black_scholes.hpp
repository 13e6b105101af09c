#pragma once

#include "chebtt/errors.hpp"

namespace chebtt {

// All prices are spot-normalized: underlying value 1, zero rates and
// dividends. Strikes and prices are therefore dimensionless moneyness units.

double normal_cdf(double x);

// European call price for volatility vol > 0 and maturity > 0. vol = 0 is
// accepted and returns the intrinsic value max(1 - strike, 0).
double bs_price(double strike, double maturity, double vol);

// dPrice/dVol at the same point; zero in the degenerate vol = 0 limit.
double bs_vega(double strike, double maturity, double vol);

// Call/put value at an arbitrary spot, parameterized by the total standard
// deviation of the terminal log-spot (vol * sqrt(maturity) collapsed into one
// argument). total_std = 0 returns the intrinsic value. Used by the
// conditional Monte Carlo estimator, where each path contributes a
// closed-form price with its own spot factor and residual variance.
double bs_call_total(double spot, double strike, double total_std);
double bs_put_total(double spot, double strike, double total_std);

// Time value bs_price(strike, maturity, vol) - intrinsic, evaluated on the
// out-of-the-money side so deep wings keep full relative precision instead
// of cancelling against the intrinsic value (representable down to the
// subnormal range, ~1e-300). Time value is side-independent by parity.
double bs_time_value(double strike, double maturity, double vol);

// Inverts bs_price in vol over the bracket [1e-4, 5.0] with a safeguarded
// Newton iteration (bisection fallback keeps the iterate inside a shrinking
// bracket). Throws NoSolutionError when the price sits outside the open
// no-arbitrage band (intrinsic, 1) or outside the price range reachable
// within the vol bracket; the error carries the violated band. Throws
// SolverError after 200 iterations (unreachable for in-band prices since the
// bisection safeguard halves the bracket every step).
double implied_vol(double price, double strike, double maturity);

// Inverts bs_time_value in vol over the same bracket. Unlike implied_vol,
// which works on raw prices and treats anything within float noise of the
// arbitrage bounds as unattainable, this accepts every positive time value:
// the caller vouches that the input was accumulated at full relative
// precision (per-path closed forms, not payoff averages), so a wing value of
// 1e-40 is information, not noise. Throws NoSolutionError when the time
// value is not inside (0, min(1, strike)) or not reachable within the vol
// bracket; throws SolverError after 200 iterations (unreachable, as above).
double implied_vol_from_time_value(double time_value, double strike, double maturity);

}  // namespace chebtt
