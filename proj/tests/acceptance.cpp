// Acceptance gate: exercises the end-to-end claims the toolkit is built
// around, one printed line per criterion, tolerances pinned in code. Exits
// nonzero if any criterion fails. Artifacts land under --artifact-dir
// (default ./acceptance_artifacts) so failed runs can be inspected.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <chebtt/calibration.hpp>
#include <chebtt/chebyshev.hpp>
#include <chebtt/completion.hpp>
#include <chebtt/harness.hpp>
#include <chebtt/rough_bergomi.hpp>
#include <chebtt/tensor_train.hpp>

namespace fs = std::filesystem;
using namespace chebtt;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_passed = 0;
int g_failed = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  (ok ? g_passed : g_failed) += 1;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// --- criterion 1: interpolation convergence -------------------------------

ChebyshevTensor<double> tensor_1d(double (*f)(double), Index count) {
  ChebyshevGrid<double> g({Interval<double>(-1.0, 1.0)}, {count});
  return build_full_tensor(std::move(g), [&](std::span<const double> x) { return f(x[0]); });
}

double sup_error_1d(const ChebyshevTensor<double>& t, double (*f)(double)) {
  double worst = 0.0;
  for (int i = 0; i < 1001; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / 1000.0;
    const std::vector<double> p{x};
    worst = std::max(worst, std::abs(eval_barycentric(t, std::span<const double>(p)) - f(x)));
  }
  return worst;
}

double runge(double x) { return 1.0 / (1.0 + 25.0 * x * x); }
double exp_fn(double x) { return std::exp(x); }

void criterion_1() {
  const double e_exp = sup_error_1d(tensor_1d(&exp_fn, 12), &exp_fn);
  // 50-point Runge gate pinned to the independently recomputed interpolation
  // error level 1.159585e-4 for this node count (dense-sampling oracle, also
  // frozen in the unit tests), with headroom for the sampling grid.
  const double e_runge = sup_error_1d(tensor_1d(&runge, 50), &runge);
  const bool ok = e_exp < 1e-9 && e_runge < 1.25e-4;
  report(1, ok,
         "interpolation sup error over 1001 samples: exp(x) 12 nodes " + fmt(e_exp) +
             " (gate 1e-9), runge 50 nodes " + fmt(e_runge) +
             " (gate 1.25e-4, recomputed oracle 1.159585e-4)");
}

// --- criterion 2: gradients vs central differences ------------------------

double gradient_worst_rel(const ChebyshevTensor<double>& t, std::mt19937_64& eng) {
  const auto& g = t.grid();
  const int d = g.dim();
  double worst = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int pt = 0; pt < 20; ++pt) {
    for (int k = 0; k < d; ++k) {
      const auto iv = g.interval(k);
      std::uniform_real_distribution<double> u(iv.lo + 0.05 * iv.width(),
                                               iv.hi - 0.05 * iv.width());
      x[static_cast<std::size_t>(k)] = u(eng);
    }
    const Eigen::VectorXd grad = eval_gradient(t, std::span<const double>(x));
    Eigen::VectorXd fd(d);
    for (int k = 0; k < d; ++k) {
      const double h = 1e-6 * g.interval(k).width();
      std::vector<double> xp = x, xm = x;
      xp[static_cast<std::size_t>(k)] += h;
      xm[static_cast<std::size_t>(k)] -= h;
      fd[k] = (eval_barycentric(t, std::span<const double>(xp)) -
               eval_barycentric(t, std::span<const double>(xm))) /
              (2.0 * h);
    }
    worst = std::max(worst, (grad - fd).norm() / std::max(1.0, fd.norm()));
  }
  return worst;
}

void criterion_2() {
  std::mt19937_64 eng(20260815);
  double worst = 0.0;

  ChebyshevGrid<double> g1({Interval<double>(-1.5, 2.0)}, {24});
  auto t1 = build_full_tensor(std::move(g1),
                              [](std::span<const double> x) { return std::exp(std::sin(2.0 * x[0])); });
  worst = std::max(worst, gradient_worst_rel(t1, eng));

  ChebyshevGrid<double> g2({Interval<double>(0.0, 2.0), Interval<double>(-3.0, 1.0)}, {14, 12});
  auto t2 = build_full_tensor(std::move(g2), [](std::span<const double> x) {
    return std::sin(3.0 * x[0]) * std::exp(0.5 * x[1]) + x[0] * x[1];
  });
  worst = std::max(worst, gradient_worst_rel(t2, eng));

  std::vector<Interval<double>> box6;
  std::vector<Index> counts6{5, 4, 3, 4, 3, 4};
  for (int k = 0; k < 6; ++k) box6.emplace_back(-1.0 + 0.1 * k, 1.0 + 0.2 * k);
  ChebyshevGrid<double> g6(box6, counts6);
  auto t6 = build_full_tensor(std::move(g6), [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (0.3 + 0.1 * static_cast<double>(k)) * x[k];
    return std::exp(0.25 * s) + std::sin(x[0] + x[5]);
  });
  worst = std::max(worst, gradient_worst_rel(t6, eng));

  report(2, worst < 1e-4,
         "gradient vs central differences, 20 interior points, d in {1,2,6}: worst relative "
         "error " + fmt(worst) + " (gate 1e-4)");
}

// --- criterion 3: tensor-train arithmetic ---------------------------------

void criterion_3() {
  // Rank-1 product example: entry (1,2) must be 2.1 * 9.5 = 19.95 exactly.
  const Eigen::VectorXd v1 = (Eigen::VectorXd(4) << 1.6, 2.1, -3.2, 8.4).finished();
  const Eigen::VectorXd v2 = (Eigen::VectorXd(3) << 7.4, -6.1, 9.5).finished();
  TensorTrain<double> rank1({TTCore<double>(v1, 4), TTCore<double>(v2, 3)});
  const std::vector<Index> i12{1, 2};
  const bool exact = tt_entry(rank1, std::span<const Index>(i12)) == 19.95;

  // Three-core chain against the explicit slice product at every entry.
  std::vector<Eigen::MatrixXd> c1(4, Eigen::MatrixXd(1, 2));
  c1[0] << 1.3, -2.8;
  c1[1] << 9.7, 4.8;
  c1[2] << -2.4, 6.9;
  c1[3] << 8.5, -2.1;
  std::vector<Eigen::MatrixXd> c2(3, Eigen::MatrixXd(2, 3));
  c2[0] << 9.7, -9.5, -7.5, 4.9, -9.2, 3.8;
  c2[1] << 4.8, 8.2, 6.5, -8.9, -2.6, -8.3;
  c2[2] << 4.2, -2.7, -4.9, 1.9, 2.2, 1.3;
  std::vector<Eigen::MatrixXd> c3(2, Eigen::MatrixXd(3, 1));
  c3[0] << -3.7, -2.5, 7.9;
  c3[1] << 2.5, 6.8, -5.4;
  auto stack = [](const std::vector<Eigen::MatrixXd>& slices) {
    Eigen::MatrixXd m(slices[0].rows() * static_cast<Eigen::Index>(slices.size()),
                      slices[0].cols());
    for (std::size_t s = 0; s < slices.size(); ++s)
      m.middleRows(slices[s].rows() * static_cast<Eigen::Index>(s), slices[s].rows()) = slices[s];
    return m;
  };
  TensorTrain<double> t3({TTCore<double>(stack(c1), 4), TTCore<double>(stack(c2), 3),
                          TTCore<double>(stack(c3), 2)});
  double worst3 = 0.0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 2; ++k) {
        const double brute = (c1[static_cast<std::size_t>(i)] * c2[static_cast<std::size_t>(j)] *
                              c3[static_cast<std::size_t>(k)])(0, 0);
        const std::vector<Index> idx{i, j, k};
        const double rel = std::abs(tt_entry(t3, std::span<const Index>(idx)) - brute) /
                           std::max(1.0, std::abs(brute));
        worst3 = std::max(worst3, rel);
      }

  // Inner product against full enumeration on random 4-d trains.
  std::mt19937_64 eng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::vector<Index> dims{4, 3, 5, 2};
  auto random_tt = [&](const std::vector<Index>& ranks) {
    std::vector<TTCore<double>> cores;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      Eigen::MatrixXd m(ranks[i] * dims[i], ranks[i + 1]);
      for (Eigen::Index q = 0; q < m.size(); ++q) m(q) = gauss(eng);
      cores.emplace_back(std::move(m), dims[i]);
    }
    return TensorTrain<double>(std::move(cores));
  };
  const auto a = random_tt({1, 2, 3, 2, 1});
  const auto b = random_tt({1, 3, 2, 2, 1});
  double brute = 0.0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 5; ++k)
        for (Index l = 0; l < 2; ++l) {
          const std::vector<Index> idx{i, j, k, l};
          brute += tt_entry(a, std::span<const Index>(idx)) *
                   tt_entry(b, std::span<const Index>(idx));
        }
  const double ip = tt_inner_product(a, b);
  const double rel_ip = std::abs(ip - brute) / std::max(1.0, std::abs(brute));

  const bool ok = exact && worst3 < 1e-12 && rel_ip < 1e-11;
  report(3, ok,
         std::string("tensor-train arithmetic: rank-1 entry 19.95 ") +
             (exact ? "exact" : "NOT exact") + ", 3-d worked example worst rel " + fmt(worst3) +
             " (gate 1e-12), inner product vs enumeration rel " + fmt(rel_ip) + " (gate 1e-11)");
}

// --- criterion 4: completion recovery -------------------------------------

void criterion_4() {
  const auto t0 = Clock::now();
  const std::vector<Index> dims{7, 7, 7, 7};
  const std::vector<Index> true_ranks{1, 2, 3, 2, 1};
  int recovered = 0;
  double worst_rmse = 0.0;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<TTCore<double>> cores;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      Eigen::MatrixXd m(true_ranks[i] * dims[i], true_ranks[i + 1]);
      for (Eigen::Index q = 0; q < m.size(); ++q) m(q) = gauss(eng);
      cores.emplace_back(std::move(m), dims[i]);
    }
    const TensorTrain<double> truth(std::move(cores));
    auto indices = draw_unique_indices(std::span<const Index>(dims), 720, seed + 7);  // 30%
    std::vector<SampleEntry> entries;
    entries.reserve(indices.size());
    for (auto& idx : indices) {
      const double v = tt_entry(truth, std::span<const Index>(idx));
      entries.push_back({std::move(idx), v});
    }
    SampleSet set(dims, entries, 0.8, seed + 13);
    CompletionConfig cfg;
    cfg.rng_seed = seed + 23;
    cfg.test_rel_tol = 1e-8;
    cfg.max_rank = 5;
    const auto [x, rep] = rank_adaptive(set, cfg);
    worst_rmse = std::max(worst_rmse, rep.test_rmse);
    if (rep.test_rmse < 1e-6) ++recovered;
  }
  const double dt = seconds_since(t0);
  const bool ok = recovered == 3 && dt < 300.0;
  report(4, ok,
         "completion recovery on 7^4, interior ranks <= 3, 30% samples: " +
             std::to_string(recovered) + "/3 seeds below held-out rel RMSE 1e-6 (worst " +
             fmt(worst_rmse) + "), " + fmt(dt) + " s (gate 300 s)");
}

// --- criterion 5: pricer analytic limits ----------------------------------

void criterion_5() {
  // Vanishing vol-of-vol: the variance path degenerates to the constant
  // forward curve and every implied vol must sit on sqrt(xi).
  RoughBergomiParams p;
  p.xi = ForwardVarianceCurve::constant(0.04);
  p.eta = 1e-10;
  p.rho = -0.5;
  p.hurst = 0.3;
  const ExperimentConfig desk = desk_config();
  MCConfig mc;
  mc.paths = 60000;
  mc.rng_seed = 71;
  mc.antithetic = true;
  mc.estimator = Estimator::kTerminalPayoff;
  const VolSurface vs = implied_vol_surface(p, desk.quote_spec(), mc);
  double worst_dev = 0.0;
  bool all_valid = true;
  for (Eigen::Index i = 0; i < vs.quotes.rows(); ++i)
    for (Eigen::Index j = 0; j < vs.quotes.cols(); ++j) {
      if (!vs.valid(i, j)) {
        all_valid = false;
        continue;
      }
      worst_dev = std::max(worst_dev, std::abs(vs.quotes(i, j) - 0.2));
    }

  // Discrete martingale at rough parameters: E[exp(X_T)] = 1 within Monte
  // Carlo error at every maturity (antithetic pairs folded into one sample).
  RoughBergomiParams rough;
  rough.xi = ForwardVarianceCurve::constant(0.05);
  rough.eta = 2.0;
  rough.rho = -0.5;
  rough.hurst = 0.1;
  const std::vector<double> mats{0.3, 1.0, 2.0};
  const Eigen::MatrixXd x = simulate_terminal_log_prices(rough, mats, mc);
  double worst_z = 0.0;
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    const Eigen::ArrayXd s = x.col(m).array().exp();
    const auto pairs = s.size() / 2;
    Eigen::ArrayXd folded(pairs);
    for (Eigen::Index i = 0; i < pairs; ++i) folded[i] = 0.5 * (s[2 * i] + s[2 * i + 1]);
    const double mean = folded.mean();
    const double se = std::sqrt((folded - mean).square().sum() /
                                (static_cast<double>(pairs - 1) * static_cast<double>(pairs)));
    worst_z = std::max(worst_z, std::abs(mean - 1.0) / se);
  }

  const bool ok = all_valid && worst_dev <= 0.005 && worst_z <= 4.0;
  report(5, ok,
         "pricer limits at 60k paths: eta->0 worst |vol - 0.2| = " + fmt(worst_dev) +
             " (gate 0.005, all cells valid: " + (all_valid ? "yes" : "NO") +
             "), martingale worst |E[exp(X)]-1|/SE = " + fmt(worst_z) + " (gate 4)");
}

// --- criteria 6-9: desk-scale pipeline ------------------------------------

struct PipelineRun {
  fs::path dir;
  AccuracyReport accuracy;
  BatchCalibrationSummary calibration;
  BenchmarkReport bench;
};

PipelineRun run_desk_pipeline(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  PipelineRun run;
  run.dir = dir;
  generate_surfaces(cfg, dir);
  build_direct(cfg, dir);
  const Surrogate s = load_surrogate(dir / artifact::kDirectTensor);
  run.accuracy = assess_accuracy(s, dir / artifact::kSurfacesDir, dir);
  run.calibration = calibrate_batch(s, dir / artifact::kSurfacesDir, cfg, dir);
  run.bench = benchmark(s, cfg, dir);
  return run;
}

// Byte comparison of two pipeline runs. Timing siblings (*_timing.json) are
// the documented exemption; the calibration CSV is compared with its final
// time_seconds column stripped.
bool runs_byte_identical(const fs::path& a, const fs::path& b, std::string* why) {
  auto collect = [](const fs::path& root) {
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const std::string rel = fs::relative(e.path(), root).generic_string();
      if (rel.size() > 12 && rel.substr(rel.size() - 12) == "_timing.json") continue;
      files.emplace(rel, e.path());
    }
    return files;
  };
  auto read_all = [](const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  auto strip_time_column = [](const std::string& text) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line)) {
      const auto pos = line.rfind(',');
      out += (pos == std::string::npos) ? line : line.substr(0, pos);
      out += '\n';
    }
    return out;
  };
  const auto fa = collect(a);
  const auto fb = collect(b);
  if (fa.size() != fb.size()) {
    *why = "file counts differ (" + std::to_string(fa.size()) + " vs " +
           std::to_string(fb.size()) + ")";
    return false;
  }
  for (const auto& [rel, pa] : fa) {
    const auto it = fb.find(rel);
    if (it == fb.end()) {
      *why = rel + " missing from second run";
      return false;
    }
    std::string ca = read_all(pa);
    std::string cb = read_all(it->second);
    if (rel == std::string(artifact::kCalibrationCsv)) {
      ca = strip_time_column(ca);
      cb = strip_time_column(cb);
    }
    if (ca != cb) {
      *why = rel + " differs";
      return false;
    }
  }
  *why = std::to_string(fa.size()) + " files compared";
  return true;
}

void criteria_6_to_9(const fs::path& artifact_dir) {
  const ExperimentConfig cfg = desk_config();

  auto t0 = Clock::now();
  PipelineRun run_a = run_desk_pipeline(cfg, artifact_dir / "run_a");
  const double dt_a = seconds_since(t0);

  // 6: per-cell mean absolute error of the direct tensor against 50
  // pricer-generated surfaces.
  double worst_cell = 0.0;
  for (Eigen::Index i = 0; i < run_a.accuracy.mean_abs_error.rows(); ++i)
    for (Eigen::Index j = 0; j < run_a.accuracy.mean_abs_error.cols(); ++j)
      worst_cell = std::max(worst_cell, run_a.accuracy.mean_abs_error(i, j));
  const bool ok6 = run_a.accuracy.surfaces_used == cfg.surfaces && worst_cell < 0.01;
  report(6, ok6,
         "direct tensor (counts 5,5,3,4,6,8; 20k paths) vs " +
             std::to_string(run_a.accuracy.surfaces_used) + " pricer surfaces: worst per-cell "
             "mean abs error " + fmt(worst_cell) + " absolute vol (gate 0.01), overall mean " +
             fmt(run_a.accuracy.overall_mean_error) + ", skipped cells " +
             std::to_string(run_a.accuracy.cells_skipped) + ", pipeline " + fmt(dt_a) + " s");

  // 7: round trips. Surfaces the surrogate itself generated calibrate back
  // to machine-level RMSE; pricer surfaces carry Monte Carlo noise.
  const Surrogate s = load_surrogate(run_a.dir / artifact::kDirectTensor);
  ExperimentConfig cfg_s = cfg;
  cfg_s.surface_source = "surrogate";
  const fs::path dir_s = artifact_dir / "surrogate_round_trip";
  fs::create_directories(dir_s);
  generate_surfaces(cfg_s, dir_s, &s);
  const BatchCalibrationSummary self =
      calibrate_batch(s, dir_s / artifact::kSurfacesDir, cfg_s, dir_s);
  const bool ok7 = self.calibrated == cfg.surfaces && self.rmse_max < 1e-4 &&
                   run_a.calibration.calibrated == cfg.surfaces &&
                   run_a.calibration.rmse_q99 < 0.010 && run_a.calibration.rmse_max < 0.015;
  report(7, ok7,
         "calibration round trip: surrogate-generated max RMSE " + fmt(self.rmse_max) +
             " (gate 1e-4); pricer-generated q99 " + fmt(run_a.calibration.rmse_q99) +
             " (gate 0.01), max " + fmt(run_a.calibration.rmse_max) + " (gate 0.015), q50 " +
             fmt(run_a.calibration.rmse_q50));

  // 8: latency and speedup against the in-repo pricer.
  const bool ok8 =
      run_a.bench.surrogate_mean_seconds < 1e-3 && run_a.bench.speedup > 1000.0;
  report(8, ok8,
         "speed: surrogate eval mean " + fmt(run_a.bench.surrogate_mean_seconds * 1e6) +
             " us (gate < 1000 us), speedup vs 20k-path pricer " + fmt(run_a.bench.speedup) +
             "x (gate > 1000x)");

  // 9: the same pipeline with the same seed is byte-identical outside the
  // timing siblings.
  t0 = Clock::now();
  run_desk_pipeline(cfg, artifact_dir / "run_b");
  const double dt_b = seconds_since(t0);
  std::string why;
  const bool ok9 = runs_byte_identical(artifact_dir / "run_a", artifact_dir / "run_b", &why);
  report(9, ok9,
         "determinism: two desk pipeline runs, seed " + std::to_string(cfg.root_seed) + ": " +
             why + (ok9 ? " byte-identical" : "") + " (second run " + fmt(dt_b) + " s)");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path artifact_dir = "acceptance_artifacts";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--artifact-dir" && i + 1 < argc) {
      artifact_dir = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--artifact-dir <dir>]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(artifact_dir);
  const auto t0 = Clock::now();
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criteria_6_to_9(artifact_dir);
  } catch (const std::exception& e) {
    std::printf("[FAIL] unhandled exception: %s\n", e.what());
    g_failed += 1;
  }
  std::printf("acceptance: %d/%d criteria passed in %.1f s\n", g_passed, g_passed + g_failed,
              seconds_since(t0));
  return g_failed == 0 ? 0 : 1;
}
