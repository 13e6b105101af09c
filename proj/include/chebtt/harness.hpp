#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chebtt/calibration.hpp"
#include "chebtt/completion.hpp"
#include "chebtt/rough_bergomi.hpp"
#include "chebtt/serialization.hpp"

namespace chebtt {

// Everything one pipeline run needs. A single root seed feeds every
// randomized stage through tagged stream derivation (rng.hpp): theta draws
// use (kThetaSampling, surface index), Monte Carlo uses the root seed as
// MCConfig::rng_seed (shared across pricer calls, so the pricer is one fixed
// function of theta; "per-surface" mode derives (kMonteCarlo, 1 + index)
// instead), tensor-train sampling uses (kSampleSelection, draw round), the
// train/test split and completion use the root seed, calibration starts use
// (kCalibration, 0), and benchmark points use (kBenchmark, 0).
struct ExperimentConfig {
  // Parameter domain. Pillar count sets the theta layout (pillars..., eta,
  // rho, hurst); every pillar shares xi_interval.
  std::vector<double> xi_pillar_times{2.0};
  Interval<double> xi_interval{0.01, 0.16};
  Interval<double> eta_interval{0.5, 4.0};
  Interval<double> rho_interval{-0.95, -0.1};
  Interval<double> hurst_interval{0.025, 0.5};

  // Direct tensor axes: one count per theta dimension, then the maturity and
  // strike axes spanning the quote ranges.
  std::vector<Index> theta_counts{5, 5, 3, 4};
  Index maturity_count = 6;
  Index strike_count = 8;
  Interval<double> maturity_interval{0.3, 2.0};
  Interval<double> strike_interval{0.7, 1.3};

  // Quote grid for generated and assessed surfaces.
  std::vector<double> maturities{0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.0};
  std::vector<double> strikes{0.7,  0.75, 0.8,  0.85, 0.9,  0.95, 1.0,
                              1.05, 1.1,  1.15, 1.2,  1.25, 1.3};

  MCConfig mc;  // rng_seed is overwritten by the root seed at run time

  int surfaces = 50;
  std::string surface_source = "pricer";     // or "surrogate"
  std::string surface_seed_mode = "shared";  // or "per-surface"

  // Tensor-train build: uniform points per dimension over the same axes.
  // The sample set is split 80/20 train/test by the completion layer.
  Index tt_points_per_dim = 7;
  std::int64_t tt_samples = 2000;
  CompletionConfig completion;

  struct Calibration {
    int multi_starts = 5;
    int max_iterations = 200;
    double gradient_tol = 1e-10;
    double step_tol = 1e-12;
  } calibration;

  std::int64_t benchmark_evals = 10000;
  int benchmark_pricer_calls = 10;

  std::uint64_t root_seed = 0;

  void validate() const;
  [[nodiscard]] int theta_dim() const { return static_cast<int>(xi_pillar_times.size()) + 3; }
  [[nodiscard]] int tensor_dim() const { return theta_dim() + 2; }
  // Per-theta-axis intervals in flattening order.
  [[nodiscard]] std::vector<Interval<double>> theta_intervals() const;
  [[nodiscard]] ChebyshevGrid<double> direct_grid() const;
  [[nodiscard]] std::vector<Index> tt_dims() const;
  [[nodiscard]] ChebyshevGrid<double> tt_grid() const;
  [[nodiscard]] SurfaceSpec quote_spec() const { return {maturities, strikes}; }
  [[nodiscard]] MCConfig effective_mc() const;  // mc with rng_seed = root_seed
};

// Desk scale: 50 surfaces, 20,000 antithetic paths, conditional estimator,
// 2,000 completion samples. Sized so the whole pipeline runs twice (for the
// determinism check) in well under an hour on one core.
[[nodiscard]] ExperimentConfig desk_config();
// Full scale: 1,000 surfaces, 60,000 paths, 10,000 completion samples.
// A named profile for offline runs, not for the test suite.
[[nodiscard]] ExperimentConfig full_config();

// Serialization is total (every field); parsing starts from the profile
// named by an optional "profile" key ("desk" default, or "full") and
// overrides the keys present. Unknown keys are configuration errors.
[[nodiscard]] Json experiment_config_to_json(const ExperimentConfig& cfg);
[[nodiscard]] ExperimentConfig experiment_config_from_json(const Json& j);

// Canonical artifact names inside an output directory.
namespace artifact {
inline constexpr const char* kSurfacesDir = "surfaces";
inline constexpr const char* kManifest = "surfaces/manifest.json";
inline constexpr const char* kDirectTensor = "direct_tensor.cheb";
inline constexpr const char* kDirectReport = "direct_build_report.json";
inline constexpr const char* kTTTensor = "tt_tensor.chebtt";
inline constexpr const char* kTTReport = "tt_build_report.json";
inline constexpr const char* kAccuracyReport = "accuracy_report.json";
inline constexpr const char* kAccuracyMeanCsv = "accuracy_mean.csv";
inline constexpr const char* kAccuracyMaxCsv = "accuracy_max.csv";
inline constexpr const char* kCalibrationDir = "calibration";
inline constexpr const char* kCalibrationCsv = "calibration/summary.csv";
inline constexpr const char* kCalibrationQuantiles = "calibration/quantiles.json";
inline constexpr const char* kBenchmarkReport = "benchmark_timing.json";
}  // namespace artifact

// Prices one surface: the implied-vol surface when source is the pricer, the
// surrogate's interpolated surface otherwise. Exposed for stubbing in tests.
using SurfacePricer =
    std::function<VolSurface(const RoughBergomiParams&, const SurfaceSpec&, const MCConfig&)>;

struct GenerateResult {
  int written = 0;
  int failed = 0;
  std::filesystem::path manifest_file;
};

// Draws cfg.surfaces thetas uniformly from the domain box, prices each, and
// writes surfaces plus a manifest carrying the resolved config and the
// generating parameters. Pricing failures are recorded in the manifest and
// skipped. source_surrogate must be non-null when cfg.surface_source is
// "surrogate".
GenerateResult generate_surfaces(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir,
                                 const Surrogate* source_surrogate = nullptr);

struct BuildDirectResult {
  long pricer_calls = 0;       // always equals theta_grid_size
  std::size_t theta_grid_size = 0;
  std::size_t value_count = 0;
  double wall_time_seconds = 0.0;
  std::filesystem::path tensor_file;
  std::filesystem::path report_file;
};

// Evaluates the pricer once per theta-subgrid point (each call prices the
// whole maturity x strike node block) and serializes the assembled dense
// tensor. Refuses theta dimensions above 6 with a pointer to build_tt.
// A node whose implied vol cannot be recovered is a numerical failure: the
// tensor must hold a genuine value at every grid point.
BuildDirectResult build_direct(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                               const SurfacePricer& pricer = {});

struct BuildTTResult {
  CompletionReport report;
  std::uint64_t grid_size = 0;  // product of mode sizes, never materialized
  long pricer_calls = 0;
  std::size_t samples_requested = 0;
  std::size_t samples_used = 0;
  long dropped_cells = 0;  // sampled cells whose inversion failed
  double wall_time_seconds = 0.0;
  std::filesystem::path tensor_file;
  std::filesystem::path report_file;
};

// Draws a seeded uniform sample of grid indices, prices them (grouped by
// theta so one pricer call covers every sampled cell of that surface), and
// completes the tensor train by the sample/rank adaptive algorithms. The
// tensor and report are always serialized; report.converged false is the
// caller's signal to exit nonzero.
BuildTTResult build_tt(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       const SurfacePricer& pricer = {});

struct AccuracyReport {
  SurfaceSpec spec;
  Eigen::MatrixXd mean_abs_error;  // absolute implied-vol units
  Eigen::MatrixXd max_abs_error;
  Eigen::MatrixXd cell_counts;  // valid benchmark samples behind each cell
  int surfaces_used = 0;
  int surfaces_excluded = 0;  // manifest theta outside the surrogate box
  long cells_skipped = 0;     // invalid benchmark cells
  double overall_mean_error = 0.0;
  double overall_max_error = 0.0;
};

// Evaluates the surrogate at every manifest theta over the quote grid and
// accumulates per-cell mean/max absolute error against the stored surfaces.
// Writes the JSON report plus mean/max CSV heatmaps to out_dir.
AccuracyReport assess_accuracy(const Surrogate& s, const std::filesystem::path& surfaces_dir,
                               const std::filesystem::path& out_dir);

struct BatchCalibrationSummary {
  int calibrated = 0;
  int failed = 0;
  double rmse_q50 = 0.0;
  double rmse_q90 = 0.0;
  double rmse_q99 = 0.0;
  double rmse_max = 0.0;
  std::vector<double> rmse;  // per calibrated surface, manifest order
  double wall_time_seconds = 0.0;
  std::filesystem::path csv_file;
  std::filesystem::path quantile_file;
};

// Calibrates the surrogate to every surface in the manifest: one result JSON
// per surface, an aggregate CSV (theta*, RMSE, time), and nearest-rank
// 50/90/99/max RMSE quantiles. Per-surface failures are recorded and the
// batch continues.
BatchCalibrationSummary calibrate_batch(const Surrogate& s,
                                        const std::filesystem::path& surfaces_dir,
                                        const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir);

struct BenchmarkReport {
  std::int64_t surrogate_evals = 0;
  double surrogate_mean_seconds = 0.0;
  int pricer_calls = 0;
  double pricer_mean_seconds = 0.0;
  double speedup = 0.0;
  int thread_count = 1;
  double checksum = 0.0;  // sum of surrogate values, defeats dead-code elision
};

// Times surrogate point evaluations (>= 10,000) against full pricer surface
// calls (>= 10) at thetas drawn from the domain box. The report is written to
// benchmark_timing.json; as pure timing it is exempt from byte-determinism.
BenchmarkReport benchmark(const Surrogate& s, const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir,
                          const SurfacePricer& pricer = {});

// Loads a serialized surrogate, dense or tensor-train by magic sniffing.
[[nodiscard]] Surrogate load_surrogate(const std::filesystem::path& file);

}  // namespace chebtt
