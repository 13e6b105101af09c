#include "chebtt/black_scholes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chebtt {
namespace {

constexpr double kVolLo = 1e-4;
constexpr double kVolHi = 5.0;
// Prices this close to the arbitrage bounds are treated as unattainable.
// Kept at float-noise scale, not larger: deep wings carry genuine time
// values down to ~1e-13 (conditional estimates resolve them), while payoff
// averages that miss every path land exactly on intrinsic and must fail.
constexpr double kBandEps = 1e-15;
constexpr double kTwoPi = 6.2831853071795864769;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

std::string band_message(const char* reason, double price, double lo, double hi) {
  std::ostringstream os;
  os << "implied_vol: price " << price << " " << reason << " [" << lo << ", " << hi << "]";
  return os.str();
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double bs_price(double strike, double maturity, double vol) {
  if (!(strike > 0.0) || !(maturity > 0.0) || !(vol >= 0.0)) {
    throw ConfigError("bs_price: requires strike > 0, maturity > 0, vol >= 0");
  }
  const double intrinsic = std::max(1.0 - strike, 0.0);
  const double s = vol * std::sqrt(maturity);
  if (s <= 0.0) return intrinsic;
  const double d1 = (-std::log(strike) + 0.5 * s * s) / s;
  const double d2 = d1 - s;
  return normal_cdf(d1) - strike * normal_cdf(d2);
}

double bs_vega(double strike, double maturity, double vol) {
  if (!(strike > 0.0) || !(maturity > 0.0) || !(vol >= 0.0)) {
    throw ConfigError("bs_vega: requires strike > 0, maturity > 0, vol >= 0");
  }
  const double sqrt_t = std::sqrt(maturity);
  const double s = vol * sqrt_t;
  if (s <= 0.0) return 0.0;
  const double d1 = (-std::log(strike) + 0.5 * s * s) / s;
  return kInvSqrt2Pi * std::exp(-0.5 * d1 * d1) * sqrt_t;
}

double bs_call_total(double spot, double strike, double total_std) {
  if (!(spot >= 0.0) || !(strike > 0.0) || !(total_std >= 0.0) || !std::isfinite(spot) ||
      !std::isfinite(total_std)) {
    throw ConfigError("bs_call_total: requires spot >= 0, strike > 0, total_std >= 0");
  }
  if (total_std <= 0.0 || spot <= 0.0) return std::max(spot - strike, 0.0);
  const double d1 = (std::log(spot / strike) + 0.5 * total_std * total_std) / total_std;
  const double d2 = d1 - total_std;
  return spot * normal_cdf(d1) - strike * normal_cdf(d2);
}

double bs_put_total(double spot, double strike, double total_std) {
  if (!(spot >= 0.0) || !(strike > 0.0) || !(total_std >= 0.0) || !std::isfinite(spot) ||
      !std::isfinite(total_std)) {
    throw ConfigError("bs_put_total: requires spot >= 0, strike > 0, total_std >= 0");
  }
  if (total_std <= 0.0 || spot <= 0.0) return std::max(strike - spot, 0.0);
  const double d1 = (std::log(spot / strike) + 0.5 * total_std * total_std) / total_std;
  const double d2 = d1 - total_std;
  return strike * normal_cdf(-d2) - spot * normal_cdf(-d1);
}

double bs_time_value(double strike, double maturity, double vol) {
  if (!(strike > 0.0) || !(maturity > 0.0) || !(vol >= 0.0)) {
    throw ConfigError("bs_time_value: requires strike > 0, maturity > 0, vol >= 0");
  }
  const double s = vol * std::sqrt(maturity);
  if (s <= 0.0) return 0.0;
  // The out-of-the-money option at unit spot has zero intrinsic value, so
  // its price is the time value of both sides.
  return strike <= 1.0 ? bs_put_total(1.0, strike, s) : bs_call_total(1.0, strike, s);
}

double implied_vol(double price, double strike, double maturity) {
  if (!(strike > 0.0) || !(maturity > 0.0) || !std::isfinite(price)) {
    throw ConfigError("implied_vol: requires strike > 0, maturity > 0, finite price");
  }
  const double intrinsic = std::max(1.0 - strike, 0.0);
  if (price <= intrinsic + kBandEps || price >= 1.0 - kBandEps) {
    throw NoSolutionError(band_message("outside the no-arbitrage band", price, intrinsic, 1.0),
                          intrinsic, 1.0);
  }
  double lo = kVolLo;
  double hi = kVolHi;
  const double p_lo = bs_price(strike, maturity, lo);
  const double p_hi = bs_price(strike, maturity, hi);
  if (price < p_lo || price > p_hi) {
    throw NoSolutionError(
        band_message("outside the range reachable in the vol bracket", price, p_lo, p_hi),
        p_lo, p_hi);
  }

  // Safeguarded Newton: [lo, hi] always brackets the root; a Newton step that
  // leaves the bracket (or has no usable vega) is replaced by bisection.
  double sigma = std::clamp(std::sqrt(kTwoPi / maturity) * std::max(price - 0.5 * intrinsic, 1e-8),
                            lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double p = bs_price(strike, maturity, sigma);
    const double diff = p - price;
    if (diff > 0.0) {
      hi = sigma;
    } else {
      lo = sigma;
    }
    const double v = bs_vega(strike, maturity, sigma);
    double next = (v > 1e-300) ? sigma - diff / v : 0.5 * (lo + hi);
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - sigma) < 1e-12 * std::max(1.0, sigma)) return next;
    sigma = next;
  }
  throw SolverError("implied_vol: no convergence after 200 iterations");
}

double implied_vol_from_time_value(double time_value, double strike, double maturity) {
  if (!(strike > 0.0) || !(maturity > 0.0) || !std::isfinite(time_value)) {
    throw ConfigError(
        "implied_vol_from_time_value: requires strike > 0, maturity > 0, finite time value");
  }
  // As vol grows the out-of-the-money option value tends to min(1, strike).
  const double upper = std::min(1.0, strike);
  if (!(time_value > 0.0) || time_value >= upper) {
    throw NoSolutionError(band_message("outside the attainable time-value band (time value)",
                                       time_value, 0.0, upper),
                          0.0, upper);
  }
  double lo = kVolLo;
  double hi = kVolHi;
  const double t_lo = bs_time_value(strike, maturity, lo);
  const double t_hi = bs_time_value(strike, maturity, hi);
  if (time_value < t_lo || time_value > t_hi) {
    throw NoSolutionError(band_message("outside the range reachable in the vol bracket (time value)",
                                       time_value, t_lo, t_hi),
                          t_lo, t_hi);
  }

  // Safeguarded Newton on log(time value). In the wings the time value
  // decays like exp(-d^2 / 2), so a plain Newton step tv / vega ~ sigma / d^2
  // crawls across magnitudes, while the log residual stays well scaled at
  // every depth. The bracket safeguard is as in implied_vol; it also covers
  // the region where the time value underflows to zero.
  const double target = std::log(time_value);
  double sigma = std::clamp(std::sqrt(kTwoPi / maturity) * std::max(time_value, 1e-8), lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double p = bs_time_value(strike, maturity, sigma);
    if (p > time_value) {
      hi = sigma;
    } else {
      lo = sigma;
    }
    const double v = bs_vega(strike, maturity, sigma);
    double next = (p > 0.0 && v > 1e-300) ? sigma - (std::log(p) - target) * p / v
                                          : 0.5 * (lo + hi);
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - sigma) < 1e-12 * std::max(1.0, sigma)) return next;
    sigma = next;
  }
  throw SolverError("implied_vol_from_time_value: no convergence after 200 iterations");
}

}  // namespace chebtt
