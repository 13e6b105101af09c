#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "chebtt/chebyshev.hpp"
#include "chebtt/rough_bergomi.hpp"
#include "chebtt/tensor_train.hpp"
#include "chebtt/vol_surface.hpp"

namespace chebtt {

// Implied-vol interpolant over (theta components..., maturity, strike) in
// either dense or tensor-train storage. The trailing two grid dimensions are
// always maturity and strike; everything before them is the model parameter
// vector in flattening order.
class Surrogate {
 public:
  explicit Surrogate(ChebyshevTensor<double> dense);
  explicit Surrogate(TensorTrain<double> train);  // must carry its grid

  const ChebyshevGrid<double>& grid() const;
  int dim() const;
  int theta_dim() const { return dim() - 2; }
  bool is_train() const { return body_.index() == 1; }
  const ChebyshevTensor<double>& dense() const;
  const TensorTrain<double>& train() const;

  double eval(std::span<const double> x) const;
  Eigen::VectorXd eval_gradient(std::span<const double> x) const;

  // Theta-box corners of the grid (dimensions 0..theta_dim-1).
  Eigen::VectorXd theta_lower() const;
  Eigen::VectorXd theta_upper() const;

 private:
  std::variant<ChebyshevTensor<double>, TensorTrain<double>> body_;
};

// What to do when a requested theta leaves the surrogate's domain box.
// kPricerFallback is part of the configuration surface but intentionally
// unimplemented; selecting it is a configuration error.
enum class DomainPolicy { kReject, kClamp, kPricerFallback };

// Precomputed per-cell interpolation weights for one surface grid, so
// repeated surface evaluations at changing theta share all (maturity,
// strike) work. Construction fails if any cell lies outside the surrogate's
// trailing two grid intervals.
class SurfaceEvaluator {
 public:
  SurfaceEvaluator(const Surrogate& s, const SurfaceSpec& spec);

  // Surrogate values at (theta, T_i, K_j) for every cell.
  Eigen::MatrixXd values(std::span<const double> theta,
                         DomainPolicy policy = DomainPolicy::kReject) const;
  // Same, plus d(value)/d(theta_k) per cell; grads[k] matches values' shape.
  Eigen::MatrixXd values_and_gradients(std::span<const double> theta,
                                       std::vector<Eigen::MatrixXd>& grads,
                                       DomainPolicy policy = DomainPolicy::kReject) const;

  const Surrogate& surrogate() const { return *surrogate_; }
  const SurfaceSpec& spec() const { return spec_; }

 private:
  Eigen::VectorXd prepared_theta(std::span<const double> theta, DomainPolicy policy) const;

  const Surrogate* surrogate_;
  SurfaceSpec spec_;
  // Value weights per maturity (dimension dim-2) and strike (dimension
  // dim-1) node axis.
  std::vector<Eigen::VectorXd> w_mat_, w_strike_;
};

// Weighted squared-residual loss over the surface's valid cells:
// sum of weights * (quote - surrogate)^2.
double loss(std::span<const double> theta, const VolSurface& surface, const Surrogate& s,
            DomainPolicy policy = DomainPolicy::kReject);

// Gradient of loss with respect to theta. Under kClamp, components whose
// coordinate was clamped are zero (the clamped composite is flat there).
Eigen::VectorXd loss_gradient(std::span<const double> theta, const VolSurface& surface,
                              const Surrogate& s, DomainPolicy policy = DomainPolicy::kReject);

// Surface of surrogate values at theta. Cells whose interpolated value is
// not a positive vol are flagged invalid rather than reported as quotes.
VolSurface surrogate_surface(const Surrogate& s, std::span<const double> theta,
                             const SurfaceSpec& spec,
                             DomainPolicy policy = DomainPolicy::kReject);

struct ThetaBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct CalibrationConfig {
  int multi_starts = 5;           // Latin hypercube initial points
  std::uint64_t rng_seed = 0;
  int max_iterations = 500;       // per start
  double gradient_tol = 1e-10;    // sup norm of the projected gradient
  double step_tol = 1e-12;        // Euclidean norm of the accepted step
  DomainPolicy policy = DomainPolicy::kReject;
  // Pillar times used to materialize theta_star; empty means uniform on
  // (0, 2] with theta_dim - 3 pillars.
  std::vector<double> pillar_times;
};

struct CalibrationResult {
  Eigen::VectorXd theta;  // flattened best parameters, always inside bounds
  // Materialized parameters; absent when the surrogate's theta layout is
  // too short to carry (pillars..., eta, rho, hurst).
  std::optional<RoughBergomiParams> theta_star;
  double final_loss = 0.0;
  double rmse = 0.0;  // recomputed from the fitted surface, not optimizer state
  std::vector<double> loss_trajectory;  // accepted losses of the best start
  int iterations = 0;                   // of the best start
  long surrogate_calls = 0;  // surface-level evaluator calls across all starts
  long pricer_calls = 0;     // always 0 here; a caller mixing in pricing adds its own
  long out_of_box_probes = 0;  // must stay 0 under the reject policy
  double wall_time_seconds = 0.0;
  std::string termination;  // gradient | step | iterations | no-progress
};

// Bound-constrained damped least squares (Levenberg-Marquardt with box
// projection) from multi-start Latin hypercube initials; returns the best
// start. bounds defaults to the surrogate's theta box and must lie inside
// it. Every probed theta is projected into bounds before evaluation.
CalibrationResult calibrate(const VolSurface& surface, const Surrogate& s,
                            const std::optional<ThetaBox>& bounds = std::nullopt,
                            const CalibrationConfig& cfg = {});

}  // namespace chebtt
