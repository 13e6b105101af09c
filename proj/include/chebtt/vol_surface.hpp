#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "chebtt/errors.hpp"

namespace chebtt {

// Maturity x strike grid shared by price and vol surfaces. Spot is
// normalized to 1, so strikes are moneyness levels.
struct SurfaceSpec {
  std::vector<double> maturities;  // years, strictly increasing, > 0
  std::vector<double> strikes;     // strictly increasing, > 0

  bool operator==(const SurfaceSpec&) const = default;

  void validate() const {
    if (maturities.empty() || strikes.empty()) {
      throw ConfigError("SurfaceSpec: maturities and strikes must be non-empty");
    }
    auto check = [](const std::vector<double>& v, const char* name) {
      double prev = 0.0;
      for (double x : v) {
        if (!(x > prev) || !std::isfinite(x)) {
          throw ConfigError(std::string("SurfaceSpec: ") + name +
                            " must be finite, positive, strictly increasing");
        }
        prev = x;
      }
    };
    check(maturities, "maturities");
    check(strikes, "strikes");
  }
};

// Implied-vol quotes on a surface grid. Cells can be individually invalid
// (price outside the no-arbitrage band, typically deep ITM at short
// maturity); invalid cells carry quote 0 and are skipped by every consumer.
struct VolSurface {
  SurfaceSpec spec;
  Eigen::MatrixXd quotes;   // maturities x strikes
  Eigen::MatrixXd weights;  // >= 0, default all 1
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;

  // All-valid surface with unit weights and zero quotes.
  static VolSurface with_spec(SurfaceSpec s) {
    s.validate();
    const auto rows = static_cast<Eigen::Index>(s.maturities.size());
    const auto cols = static_cast<Eigen::Index>(s.strikes.size());
    VolSurface out;
    out.spec = std::move(s);
    out.quotes = Eigen::MatrixXd::Zero(rows, cols);
    out.weights = Eigen::MatrixXd::Ones(rows, cols);
    out.valid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, true);
    return out;
  }

  void validate() const {
    spec.validate();
    const auto rows = static_cast<Eigen::Index>(spec.maturities.size());
    const auto cols = static_cast<Eigen::Index>(spec.strikes.size());
    if (quotes.rows() != rows || quotes.cols() != cols || weights.rows() != rows ||
        weights.cols() != cols || valid.rows() != rows || valid.cols() != cols) {
      throw ConfigError("VolSurface: matrix shapes must match the spec grid");
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(weights(i, j) >= 0.0)) throw ConfigError("VolSurface: weights must be >= 0");
        if (valid(i, j) && !(quotes(i, j) > 0.0)) {
          throw ConfigError("VolSurface: valid cells must carry positive quotes");
        }
      }
    }
  }
};

// Root-mean-square difference over the jointly valid cells. Throws
// ConfigError when the specs differ or no cell is valid in both surfaces
// (the mean would be over an empty set).
inline double rmse(const VolSurface& a, const VolSurface& b) {
  if (!(a.spec == b.spec)) throw ConfigError("rmse: surface specs differ");
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < a.quotes.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.quotes.cols(); ++j) {
      if (!a.valid(i, j) || !b.valid(i, j)) continue;
      const double d = a.quotes(i, j) - b.quotes(i, j);
      sum += d * d;
      ++n;
    }
  }
  if (n == 0) throw ConfigError("rmse: no jointly valid cells");
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace chebtt
