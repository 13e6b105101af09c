#include "chebtt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "chebtt/rng.hpp"

namespace chebtt {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string surface_name(int index) {
  std::ostringstream os;
  os << "surface_";
  os.width(4);
  os.fill('0');
  os << index << ".json";
  return os.str();
}

std::string result_name(int index) {
  std::ostringstream os;
  os << "surface_";
  os.width(4);
  os.fill('0');
  os << index << ".result.json";
  return os.str();
}

Json interval_to_json(const Interval<double>& iv) { return Json::array({iv.lo, iv.hi}); }

Interval<double> interval_from_json(const Json& j, const char* key) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string("experiment config: ") + key + " must be a [lo, hi] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<double> nodes_to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

SurfacePricer resolve_pricer(const SurfacePricer& p) {
  if (p) return p;
  return [](const RoughBergomiParams& params, const SurfaceSpec& spec, const MCConfig& mc) {
    return implied_vol_surface(params, spec, mc);
  };
}

Json theta_to_json(const Eigen::VectorXd& theta) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < theta.size(); ++i) a.push_back(theta[i]);
  return a;
}

Eigen::VectorXd theta_from_json(const Json& a) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    theta[i] = a[static_cast<std::size_t>(i)].get<double>();
  }
  return theta;
}

Eigen::VectorXd draw_theta(const ExperimentConfig& cfg, std::uint64_t index) {
  auto eng = make_engine(cfg.root_seed, StreamTag::kThetaSampling, index);
  const auto box = cfg.theta_intervals();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(box.size()));
  for (std::size_t k = 0; k < box.size(); ++k) {
    theta[static_cast<Eigen::Index>(k)] =
        std::uniform_real_distribution<double>(box[k].lo, box[k].hi)(eng);
  }
  return theta;
}

MCConfig mc_for_surface(const ExperimentConfig& cfg, int index) {
  MCConfig mc = cfg.effective_mc();
  if (cfg.surface_seed_mode == "per-surface") {
    mc.rng_seed = derive_stream(cfg.root_seed, StreamTag::kMonteCarlo,
                                1 + static_cast<std::uint64_t>(index));
  }
  return mc;
}

void check_surface_spec(const VolSurface& s, const SurfaceSpec& spec, const std::string& file) {
  if (!(s.spec == spec)) {
    throw BuildError("surface " + file + " does not match the manifest quote grid");
  }
}

long count_invalid(const VolSurface& s) {
  long n = 0;
  for (Eigen::Index i = 0; i < s.valid.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.valid.cols(); ++j) {
      if (!s.valid(i, j)) ++n;
    }
  }
  return n;
}

// Nearest-rank order statistic on a sorted vector; q in (0, 1].
double quantile_nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  if (rank == 0) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

struct ManifestEntry {
  int index = 0;
  std::string file;
  Eigen::VectorXd theta;
};

struct Manifest {
  Json config;
  std::vector<ManifestEntry> entries;
};

Manifest load_manifest(const fs::path& surfaces_dir) {
  const Json j = load_json(surfaces_dir / "manifest.json");
  Manifest m;
  m.config = j.at("config");
  for (const Json& e : j.at("surfaces")) {
    ManifestEntry me;
    me.index = e.at("index").get<int>();
    me.file = e.at("file").get<std::string>();
    me.theta = theta_from_json(e.at("theta"));
    m.entries.push_back(std::move(me));
  }
  return m;
}

SurfaceSpec spec_from_config_json(const Json& config) {
  SurfaceSpec spec{config.at("maturities").get<std::vector<double>>(),
                   config.at("strikes").get<std::vector<double>>()};
  spec.validate();
  return spec;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (xi_pillar_times.empty()) {
    throw ConfigError("experiment config: need at least one forward-variance pillar");
  }
  double prev = 0.0;
  for (double t : xi_pillar_times) {
    if (!std::isfinite(t) || !(t > prev)) {
      throw ConfigError("experiment config: pillar times must be positive and strictly increasing");
    }
    prev = t;
  }
  if (static_cast<int>(theta_counts.size()) != theta_dim()) {
    throw ConfigError("experiment config: theta_counts must have one entry per theta dimension (pillars + 3)");
  }
  for (Index c : theta_counts) {
    if (c < 2) throw ConfigError("experiment config: grid counts must be >= 2");
  }
  if (maturity_count < 2 || strike_count < 2 || tt_points_per_dim < 2) {
    throw ConfigError("experiment config: grid counts must be >= 2");
  }
  const SurfaceSpec spec = quote_spec();
  spec.validate();
  for (double t : maturities) {
    if (!maturity_interval.contains(t)) {
      throw ConfigError("experiment config: quote maturities must lie inside the maturity interval");
    }
  }
  for (double k : strikes) {
    if (!strike_interval.contains(k)) {
      throw ConfigError("experiment config: quote strikes must lie inside the strike interval");
    }
  }
  mc.validate();
  if (surfaces < 0) throw ConfigError("experiment config: surfaces must be >= 0");
  if (surface_source != "pricer" && surface_source != "surrogate") {
    throw ConfigError("experiment config: surface_source must be \"pricer\" or \"surrogate\"");
  }
  if (surface_seed_mode != "shared" && surface_seed_mode != "per-surface") {
    throw ConfigError("experiment config: surface_seed_mode must be \"shared\" or \"per-surface\"");
  }
  if (tt_samples < 5) {
    throw ConfigError("experiment config: tt_samples must be >= 5 for an 80/20 split");
  }
  if (calibration.multi_starts < 1 || calibration.max_iterations < 1) {
    throw ConfigError("experiment config: calibration needs >= 1 start and >= 1 iteration");
  }
  if (!(calibration.gradient_tol > 0.0) || !(calibration.step_tol > 0.0)) {
    throw ConfigError("experiment config: calibration tolerances must be positive");
  }
  if (benchmark_evals < 1 || benchmark_pricer_calls < 1) {
    throw ConfigError("experiment config: benchmark counts must be >= 1");
  }
}

std::vector<Interval<double>> ExperimentConfig::theta_intervals() const {
  std::vector<Interval<double>> box;
  box.reserve(static_cast<std::size_t>(theta_dim()));
  for (std::size_t i = 0; i < xi_pillar_times.size(); ++i) box.push_back(xi_interval);
  box.push_back(eta_interval);
  box.push_back(rho_interval);
  box.push_back(hurst_interval);
  return box;
}

ChebyshevGrid<double> ExperimentConfig::direct_grid() const {
  std::vector<Interval<double>> domain = theta_intervals();
  domain.push_back(maturity_interval);
  domain.push_back(strike_interval);
  std::vector<Index> counts = theta_counts;
  counts.push_back(maturity_count);
  counts.push_back(strike_count);
  return {std::move(domain), std::move(counts)};
}

std::vector<Index> ExperimentConfig::tt_dims() const {
  return std::vector<Index>(static_cast<std::size_t>(tensor_dim()), tt_points_per_dim);
}

ChebyshevGrid<double> ExperimentConfig::tt_grid() const {
  std::vector<Interval<double>> domain = theta_intervals();
  domain.push_back(maturity_interval);
  domain.push_back(strike_interval);
  return {std::move(domain), tt_dims()};
}

MCConfig ExperimentConfig::effective_mc() const {
  MCConfig out = mc;
  out.rng_seed = root_seed;
  return out;
}

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.mc.paths = 20000;
  c.mc.antithetic = true;
  c.mc.estimator = Estimator::kConditionalBS;
  c.completion.max_rank = 8;
  c.completion.test_rel_tol = 5e-3;
  return c;
}

ExperimentConfig full_config() {
  ExperimentConfig c = desk_config();
  c.surfaces = 1000;
  c.mc.paths = 60000;
  c.tt_samples = 10000;
  c.completion.max_rank = 12;
  c.completion.test_rel_tol = 1e-3;
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["xi_pillar_times"] = cfg.xi_pillar_times;
  j["xi_interval"] = interval_to_json(cfg.xi_interval);
  j["eta_interval"] = interval_to_json(cfg.eta_interval);
  j["rho_interval"] = interval_to_json(cfg.rho_interval);
  j["hurst_interval"] = interval_to_json(cfg.hurst_interval);
  j["theta_counts"] = cfg.theta_counts;
  j["maturity_count"] = cfg.maturity_count;
  j["strike_count"] = cfg.strike_count;
  j["maturity_interval"] = interval_to_json(cfg.maturity_interval);
  j["strike_interval"] = interval_to_json(cfg.strike_interval);
  j["maturities"] = cfg.maturities;
  j["strikes"] = cfg.strikes;
  j["mc"] = mc_config_to_json(cfg.mc);
  j["surfaces"] = cfg.surfaces;
  j["surface_source"] = cfg.surface_source;
  j["surface_seed_mode"] = cfg.surface_seed_mode;
  j["tt_points_per_dim"] = cfg.tt_points_per_dim;
  j["tt_samples"] = cfg.tt_samples;
  j["completion"] = Json{{"max_cg_iterations", cfg.completion.max_cg_iterations},
                         {"train_rel_tol", cfg.completion.train_rel_tol},
                         {"test_rel_tol", cfg.completion.test_rel_tol},
                         {"stagnation_epsilon", cfg.completion.stagnation_epsilon},
                         {"max_rank", cfg.completion.max_rank},
                         {"sample_growth_factor", cfg.completion.sample_growth_factor},
                         {"max_sample_rounds", cfg.completion.max_sample_rounds}};
  j["calibration"] = Json{{"multi_starts", cfg.calibration.multi_starts},
                          {"max_iterations", cfg.calibration.max_iterations},
                          {"gradient_tol", cfg.calibration.gradient_tol},
                          {"step_tol", cfg.calibration.step_tol}};
  j["benchmark_evals"] = cfg.benchmark_evals;
  j["benchmark_pricer_calls"] = cfg.benchmark_pricer_calls;
  j["root_seed"] = cfg.root_seed;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  ExperimentConfig cfg = desk_config();
  if (j.contains("profile")) {
    const std::string profile = j.at("profile").get<std::string>();
    if (profile == "full") {
      cfg = full_config();
    } else if (profile != "desk") {
      throw ConfigError("experiment config: unknown profile \"" + profile + "\"");
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "profile") {
      continue;
    } else if (key == "xi_pillar_times") {
      cfg.xi_pillar_times = value.get<std::vector<double>>();
    } else if (key == "xi_interval") {
      cfg.xi_interval = interval_from_json(value, "xi_interval");
    } else if (key == "eta_interval") {
      cfg.eta_interval = interval_from_json(value, "eta_interval");
    } else if (key == "rho_interval") {
      cfg.rho_interval = interval_from_json(value, "rho_interval");
    } else if (key == "hurst_interval") {
      cfg.hurst_interval = interval_from_json(value, "hurst_interval");
    } else if (key == "theta_counts") {
      cfg.theta_counts = value.get<std::vector<Index>>();
    } else if (key == "maturity_count") {
      cfg.maturity_count = value.get<Index>();
    } else if (key == "strike_count") {
      cfg.strike_count = value.get<Index>();
    } else if (key == "maturity_interval") {
      cfg.maturity_interval = interval_from_json(value, "maturity_interval");
    } else if (key == "strike_interval") {
      cfg.strike_interval = interval_from_json(value, "strike_interval");
    } else if (key == "maturities") {
      cfg.maturities = value.get<std::vector<double>>();
    } else if (key == "strikes") {
      cfg.strikes = value.get<std::vector<double>>();
    } else if (key == "mc") {
      cfg.mc = mc_config_from_json(value);
    } else if (key == "surfaces") {
      cfg.surfaces = value.get<int>();
    } else if (key == "surface_source") {
      cfg.surface_source = value.get<std::string>();
    } else if (key == "surface_seed_mode") {
      cfg.surface_seed_mode = value.get<std::string>();
    } else if (key == "tt_points_per_dim") {
      cfg.tt_points_per_dim = value.get<Index>();
    } else if (key == "tt_samples") {
      cfg.tt_samples = value.get<std::int64_t>();
    } else if (key == "completion") {
      for (const auto& [ck, cv] : value.items()) {
        if (ck == "max_cg_iterations") {
          cfg.completion.max_cg_iterations = cv.get<int>();
        } else if (ck == "train_rel_tol") {
          cfg.completion.train_rel_tol = cv.get<double>();
        } else if (ck == "test_rel_tol") {
          cfg.completion.test_rel_tol = cv.get<double>();
        } else if (ck == "stagnation_epsilon") {
          cfg.completion.stagnation_epsilon = cv.get<double>();
        } else if (ck == "max_rank") {
          cfg.completion.max_rank = cv.get<Index>();
        } else if (ck == "sample_growth_factor") {
          cfg.completion.sample_growth_factor = cv.get<double>();
        } else if (ck == "max_sample_rounds") {
          cfg.completion.max_sample_rounds = cv.get<int>();
        } else {
          throw ConfigError("experiment config: unknown completion key \"" + ck + "\"");
        }
      }
    } else if (key == "calibration") {
      for (const auto& [ck, cv] : value.items()) {
        if (ck == "multi_starts") {
          cfg.calibration.multi_starts = cv.get<int>();
        } else if (ck == "max_iterations") {
          cfg.calibration.max_iterations = cv.get<int>();
        } else if (ck == "gradient_tol") {
          cfg.calibration.gradient_tol = cv.get<double>();
        } else if (ck == "step_tol") {
          cfg.calibration.step_tol = cv.get<double>();
        } else {
          throw ConfigError("experiment config: unknown calibration key \"" + ck + "\"");
        }
      }
    } else if (key == "benchmark_evals") {
      cfg.benchmark_evals = value.get<std::int64_t>();
    } else if (key == "benchmark_pricer_calls") {
      cfg.benchmark_pricer_calls = value.get<int>();
    } else if (key == "root_seed") {
      cfg.root_seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("experiment config: unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

GenerateResult generate_surfaces(const ExperimentConfig& cfg, const fs::path& out_dir,
                                 const Surrogate* source_surrogate) {
  cfg.validate();
  if (cfg.surface_source == "surrogate" && source_surrogate == nullptr) {
    throw ConfigError("generate_surfaces: surface_source \"surrogate\" needs a surrogate");
  }
  const auto t0 = Clock::now();
  const SurfaceSpec spec = cfg.quote_spec();
  const fs::path dir = out_dir / artifact::kSurfacesDir;
  fs::create_directories(dir);

  Json manifest;
  manifest["config"] = experiment_config_to_json(cfg);
  Json surfaces = Json::array();
  Json failures = Json::array();
  GenerateResult res;
  for (int i = 0; i < cfg.surfaces; ++i) {
    const Eigen::VectorXd theta = draw_theta(cfg, static_cast<std::uint64_t>(i));
    try {
      VolSurface vs;
      if (cfg.surface_source == "surrogate") {
        vs = surrogate_surface(*source_surrogate,
                               std::span<const double>(theta.data(),
                                                       static_cast<std::size_t>(theta.size())),
                               spec);
      } else {
        const RoughBergomiParams p =
            RoughBergomiParams::from_flat(theta, cfg.xi_pillar_times);
        vs = implied_vol_surface(p, spec, mc_for_surface(cfg, i));
      }
      const std::string name = surface_name(i);
      save_json(dir / name, surface_to_json(vs));
      Json entry;
      entry["index"] = i;
      entry["file"] = name;
      entry["theta"] = theta_to_json(theta);
      entry["invalid_cells"] = count_invalid(vs);
      surfaces.push_back(std::move(entry));
      ++res.written;
    } catch (const BuildError&) {
      throw;  // IO problems are systemic, not per-surface data failures
    } catch (const std::exception& e) {
      Json f;
      f["index"] = i;
      f["theta"] = theta_to_json(theta);
      f["error"] = e.what();
      failures.push_back(std::move(f));
      ++res.failed;
    }
  }
  manifest["surfaces"] = std::move(surfaces);
  manifest["failures"] = std::move(failures);
  manifest["written"] = res.written;
  manifest["failed"] = res.failed;
  res.manifest_file = dir / "manifest.json";
  save_json(res.manifest_file, manifest);
  save_json(dir / "manifest_timing.json",
            Json{{"wall_time_seconds", seconds_since(t0)}, {"thread_count", 1}});
  return res;
}

BuildDirectResult build_direct(const ExperimentConfig& cfg, const fs::path& out_dir,
                               const SurfacePricer& pricer_in) {
  cfg.validate();
  if (cfg.theta_dim() > 6) {
    throw ConfigError(
        "build_direct: theta dimension " + std::to_string(cfg.theta_dim()) +
        " makes the full grid impractical; use build-tt (rank-adaptive completion) instead");
  }
  const SurfacePricer pricer = resolve_pricer(pricer_in);
  const auto t0 = Clock::now();
  const ChebyshevGrid<double> grid = cfg.direct_grid();
  const int td = cfg.theta_dim();
  const SurfaceSpec node_spec{nodes_to_vector(grid.nodes(td)), nodes_to_vector(grid.nodes(td + 1))};
  const MCConfig mc = cfg.effective_mc();

  const std::vector<Index>& theta_counts = cfg.theta_counts;
  const std::size_t theta_total = total_size(theta_counts);
  const auto n_mat = static_cast<Eigen::Index>(node_spec.maturities.size());
  const auto n_k = static_cast<Eigen::Index>(node_spec.strikes.size());
  const std::size_t block = static_cast<std::size_t>(n_mat) * static_cast<std::size_t>(n_k);

  Eigen::VectorXd values(static_cast<Eigen::Index>(grid.total_points()));
  std::vector<Index> multi(static_cast<std::size_t>(td), 0);
  Eigen::VectorXd theta(td);
  BuildDirectResult res;
  res.theta_grid_size = theta_total;
  for (std::size_t flat = 0; flat < theta_total; ++flat) {
    unflatten_index(theta_counts, flat, multi);
    for (int k = 0; k < td; ++k) {
      theta[k] = grid.nodes(k)[multi[static_cast<std::size_t>(k)]];
    }
    const RoughBergomiParams p = RoughBergomiParams::from_flat(theta, cfg.xi_pillar_times);
    const VolSurface vs = pricer(p, node_spec, mc);
    ++res.pricer_calls;
    const std::size_t base = flat * block;
    for (Eigen::Index i = 0; i < n_mat; ++i) {
      for (Eigen::Index j = 0; j < n_k; ++j) {
        if (!vs.valid(i, j)) {
          std::ostringstream os;
          os << "build_direct: implied vol unavailable at grid node (maturity "
             << node_spec.maturities[static_cast<std::size_t>(i)] << ", strike "
             << node_spec.strikes[static_cast<std::size_t>(j)] << ", theta index " << flat
             << "); the tensor needs a value at every node";
          throw SimulationError(os.str());
        }
        values[static_cast<Eigen::Index>(base) + i * n_k + j] = vs.quotes(i, j);
      }
    }
  }

  ChebyshevTensor<double> tensor(grid, std::move(values));
  res.value_count = grid.total_points();
  res.tensor_file = out_dir / artifact::kDirectTensor;
  res.report_file = out_dir / artifact::kDirectReport;
  save_dense_tensor(res.tensor_file, tensor);
  Json report;
  report["pricer_calls"] = res.pricer_calls;
  report["theta_grid_size"] = res.theta_grid_size;
  report["value_count"] = res.value_count;
  report["node_maturities"] = node_spec.maturities;
  report["node_strikes"] = node_spec.strikes;
  report["mc"] = mc_config_to_json(mc);
  report["config"] = experiment_config_to_json(cfg);
  save_json(res.report_file, report);
  res.wall_time_seconds = seconds_since(t0);
  save_json(out_dir / "direct_build_timing.json",
            Json{{"wall_time_seconds", res.wall_time_seconds}, {"thread_count", 1}});
  return res;
}

BuildTTResult build_tt(const ExperimentConfig& cfg, const fs::path& out_dir,
                       const SurfacePricer& pricer_in) {
  cfg.validate();
  const SurfacePricer pricer = resolve_pricer(pricer_in);
  const auto t0 = Clock::now();
  const std::vector<Index> dims = cfg.tt_dims();
  const ChebyshevGrid<double> grid = cfg.tt_grid();
  const int td = cfg.theta_dim();
  const SurfaceSpec node_spec{nodes_to_vector(grid.nodes(td)), nodes_to_vector(grid.nodes(td + 1))};
  const MCConfig mc = cfg.effective_mc();

  BuildTTResult res;
  res.grid_size = 1;
  for (Index n : dims) res.grid_size *= static_cast<std::uint64_t>(n);
  res.samples_requested = static_cast<std::size_t>(cfg.tt_samples);

  // Sampled full indices are priced in theta groups: one pricer call covers
  // every sampled (maturity, strike) cell of that parameter point.
  std::set<std::vector<Index>> used;
  std::uint64_t draw_round = 0;
  Eigen::VectorXd theta(td);
  auto price_indices = [&](const std::vector<std::vector<Index>>& idxs) {
    std::map<std::vector<Index>, std::vector<const std::vector<Index>*>> groups;
    for (const auto& ix : idxs) {
      groups[std::vector<Index>(ix.begin(), ix.begin() + td)].push_back(&ix);
    }
    std::vector<SampleEntry> entries;
    entries.reserve(idxs.size());
    for (const auto& [theta_idx, members] : groups) {
      for (int k = 0; k < td; ++k) theta[k] = grid.nodes(k)[theta_idx[static_cast<std::size_t>(k)]];
      const RoughBergomiParams p = RoughBergomiParams::from_flat(theta, cfg.xi_pillar_times);
      const VolSurface vs = pricer(p, node_spec, mc);
      ++res.pricer_calls;
      for (const std::vector<Index>* ix : members) {
        const Index i = (*ix)[static_cast<std::size_t>(td)];
        const Index j = (*ix)[static_cast<std::size_t>(td) + 1];
        if (!vs.valid(i, j)) {
          ++res.dropped_cells;
          continue;
        }
        entries.push_back({*ix, vs.quotes(i, j)});
      }
    }
    return entries;
  };

  // Draw blocks start at 1 << 32: the completion layer derives its train/test
  // split seeds from the same stream tag at small block numbers.
  const Sampler sampler = [&](std::size_t count) {
    std::vector<std::vector<Index>> fresh;
    const double total = static_cast<double>(res.grid_size);
    for (int attempt = 0; attempt < 64 && fresh.size() < count; ++attempt) {
      const double remaining = total - static_cast<double>(used.size());
      if (remaining <= 0.0) break;
      const std::size_t want =
          std::min(count - fresh.size(), static_cast<std::size_t>(remaining));
      const auto cand = draw_unique_indices(
          dims, want,
          derive_stream(cfg.root_seed, StreamTag::kSampleSelection, (1ULL << 32) + draw_round));
      ++draw_round;
      for (const auto& ix : cand) {
        if (fresh.size() >= count) break;
        if (used.insert(ix).second) fresh.push_back(ix);
      }
    }
    return price_indices(fresh);
  };

  CompletionConfig cc = cfg.completion;
  cc.rng_seed = cfg.root_seed;
  auto [tt, report] = sample_adaptive(dims, sampler, res.samples_requested, cc);
  res.report = std::move(report);
  res.samples_used = res.report.samples_used;
  tt.grid = grid;

  res.tensor_file = out_dir / artifact::kTTTensor;
  res.report_file = out_dir / artifact::kTTReport;
  save_tensor_train(res.tensor_file, tt);
  Json rj = Json::parse(res.report.to_json());
  rj["grid_size"] = res.grid_size;
  rj["dims"] = dims;
  rj["pricer_calls"] = res.pricer_calls;
  rj["samples_requested"] = res.samples_requested;
  rj["dropped_cells"] = res.dropped_cells;
  rj["mc"] = mc_config_to_json(mc);
  rj["config"] = experiment_config_to_json(cfg);
  save_json(res.report_file, rj);
  res.wall_time_seconds = seconds_since(t0);
  save_json(out_dir / "tt_build_timing.json",
            Json{{"wall_time_seconds", res.wall_time_seconds}, {"thread_count", 1}});
  return res;
}

AccuracyReport assess_accuracy(const Surrogate& s, const fs::path& surfaces_dir,
                               const fs::path& out_dir) {
  const Manifest manifest = load_manifest(surfaces_dir);
  const SurfaceSpec spec = spec_from_config_json(manifest.config);
  const SurfaceEvaluator ev(s, spec);
  const Eigen::VectorXd lo = s.theta_lower();
  const Eigen::VectorXd hi = s.theta_upper();

  const auto n_mat = static_cast<Eigen::Index>(spec.maturities.size());
  const auto n_k = static_cast<Eigen::Index>(spec.strikes.size());
  AccuracyReport rep;
  rep.spec = spec;
  rep.mean_abs_error = Eigen::MatrixXd::Zero(n_mat, n_k);
  rep.max_abs_error = Eigen::MatrixXd::Zero(n_mat, n_k);
  rep.cell_counts = Eigen::MatrixXd::Zero(n_mat, n_k);
  Eigen::MatrixXd sum_abs = Eigen::MatrixXd::Zero(n_mat, n_k);

  for (const ManifestEntry& e : manifest.entries) {
    if (e.theta.size() != static_cast<Eigen::Index>(s.theta_dim())) {
      throw BuildError("assess_accuracy: manifest theta arity does not match the surrogate");
    }
    bool inside = true;
    for (Eigen::Index k = 0; k < e.theta.size(); ++k) {
      if (e.theta[k] < lo[k] || e.theta[k] > hi[k]) inside = false;
    }
    if (!inside) {
      ++rep.surfaces_excluded;
      continue;
    }
    const VolSurface bench = surface_from_json(load_json(surfaces_dir / e.file));
    check_surface_spec(bench, spec, e.file);
    const Eigen::MatrixXd vals = ev.values(
        std::span<const double>(e.theta.data(), static_cast<std::size_t>(e.theta.size())));
    for (Eigen::Index i = 0; i < n_mat; ++i) {
      for (Eigen::Index j = 0; j < n_k; ++j) {
        if (!bench.valid(i, j)) {
          ++rep.cells_skipped;
          continue;
        }
        const double err = std::abs(vals(i, j) - bench.quotes(i, j));
        sum_abs(i, j) += err;
        rep.cell_counts(i, j) += 1.0;
        if (err > rep.max_abs_error(i, j)) rep.max_abs_error(i, j) = err;
      }
    }
    ++rep.surfaces_used;
  }

  double total_sum = 0.0;
  double total_count = 0.0;
  for (Eigen::Index i = 0; i < n_mat; ++i) {
    for (Eigen::Index j = 0; j < n_k; ++j) {
      if (rep.cell_counts(i, j) > 0.0) {
        rep.mean_abs_error(i, j) = sum_abs(i, j) / rep.cell_counts(i, j);
      }
      total_sum += sum_abs(i, j);
      total_count += rep.cell_counts(i, j);
      if (rep.max_abs_error(i, j) > rep.overall_max_error) {
        rep.overall_max_error = rep.max_abs_error(i, j);
      }
    }
  }
  rep.overall_mean_error = total_count > 0.0 ? total_sum / total_count : 0.0;

  fs::create_directories(out_dir);
  write_heatmap_csv(out_dir / artifact::kAccuracyMeanCsv, spec, rep.mean_abs_error);
  write_heatmap_csv(out_dir / artifact::kAccuracyMaxCsv, spec, rep.max_abs_error);
  Json j;
  j["spec"] = spec_to_json(spec);
  auto matrix_json = [](const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index jj = 0; jj < m.cols(); ++jj) row.push_back(m(i, jj));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["mean_abs_error"] = matrix_json(rep.mean_abs_error);
  j["max_abs_error"] = matrix_json(rep.max_abs_error);
  j["cell_counts"] = matrix_json(rep.cell_counts);
  j["surfaces_used"] = rep.surfaces_used;
  j["surfaces_excluded"] = rep.surfaces_excluded;
  j["cells_skipped"] = rep.cells_skipped;
  j["overall_mean_error"] = rep.overall_mean_error;
  j["overall_max_error"] = rep.overall_max_error;
  save_json(out_dir / artifact::kAccuracyReport, j);
  return rep;
}

BatchCalibrationSummary calibrate_batch(const Surrogate& s, const fs::path& surfaces_dir,
                                        const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Manifest manifest = load_manifest(surfaces_dir);
  const fs::path dir = out_dir / artifact::kCalibrationDir;
  fs::create_directories(dir);

  CalibrationConfig cc;
  cc.multi_starts = cfg.calibration.multi_starts;
  cc.max_iterations = cfg.calibration.max_iterations;
  cc.gradient_tol = cfg.calibration.gradient_tol;
  cc.step_tol = cfg.calibration.step_tol;
  cc.rng_seed = cfg.root_seed;
  cc.policy = DomainPolicy::kReject;
  cc.pillar_times = cfg.xi_pillar_times;

  BatchCalibrationSummary sum;
  std::ostringstream csv;
  const int td = s.theta_dim();
  csv << "index";
  for (int k = 0; k < td; ++k) csv << ",theta_" << k;
  csv << ",rmse,iterations,termination,time_seconds\n";
  Json failures = Json::array();
  Json per_surface = Json::array();
  std::vector<double> times;
  for (const ManifestEntry& e : manifest.entries) {
    const VolSurface surface = surface_from_json(load_json(surfaces_dir / e.file));
    try {
      const CalibrationResult r = calibrate(surface, s, std::nullopt, cc);
      save_json(dir / result_name(e.index), calibration_to_json(r));
      csv << e.index;
      for (int k = 0; k < td; ++k) csv << "," << format_double(r.theta[k]);
      csv << "," << format_double(r.rmse) << "," << r.iterations << "," << r.termination << ","
          << format_double(r.wall_time_seconds) << "\n";
      sum.rmse.push_back(r.rmse);
      times.push_back(r.wall_time_seconds);
      Json pj;
      pj["index"] = e.index;
      pj["rmse"] = r.rmse;
      per_surface.push_back(std::move(pj));
      ++sum.calibrated;
    } catch (const BuildError&) {
      throw;
    } catch (const std::exception& ex) {
      Json f;
      f["index"] = e.index;
      f["error"] = ex.what();
      failures.push_back(std::move(f));
      ++sum.failed;
    }
  }

  std::vector<double> sorted = sum.rmse;
  std::sort(sorted.begin(), sorted.end());
  sum.rmse_q50 = quantile_nearest_rank(sorted, 0.50);
  sum.rmse_q90 = quantile_nearest_rank(sorted, 0.90);
  sum.rmse_q99 = quantile_nearest_rank(sorted, 0.99);
  sum.rmse_max = sorted.empty() ? 0.0 : sorted.back();

  sum.csv_file = out_dir / artifact::kCalibrationCsv;
  {
    std::ofstream csv_out(sum.csv_file, std::ios::binary);
    if (!csv_out) throw BuildError("calibrate_batch: cannot write " + sum.csv_file.string());
    csv_out << csv.str();
  }
  Json qj;
  qj["calibrated"] = sum.calibrated;
  qj["failed"] = sum.failed;
  qj["rmse_q50"] = sum.rmse_q50;
  qj["rmse_q90"] = sum.rmse_q90;
  qj["rmse_q99"] = sum.rmse_q99;
  qj["rmse_max"] = sum.rmse_max;
  qj["quantile_method"] = "nearest-rank";
  qj["per_surface"] = std::move(per_surface);
  qj["failures"] = std::move(failures);
  sum.quantile_file = out_dir / artifact::kCalibrationQuantiles;
  save_json(sum.quantile_file, qj);
  sum.wall_time_seconds = seconds_since(t0);
  Json tj;
  tj["wall_time_seconds"] = sum.wall_time_seconds;
  tj["per_surface_seconds"] = times;
  tj["thread_count"] = 1;
  save_json(out_dir / "calibration/summary_timing.json", tj);
  return sum;
}

BenchmarkReport benchmark(const Surrogate& s, const ExperimentConfig& cfg, const fs::path& out_dir,
                          const SurfacePricer& pricer_in) {
  cfg.validate();
  const SurfacePricer pricer = resolve_pricer(pricer_in);
  auto eng = make_engine(cfg.root_seed, StreamTag::kBenchmark, 0);
  const ChebyshevGrid<double>& g = s.grid();
  const int d = s.dim();

  BenchmarkReport rep;
  rep.surrogate_evals = std::max<std::int64_t>(cfg.benchmark_evals, 10000);
  rep.pricer_calls = std::max(cfg.benchmark_pricer_calls, 10);

  // Points are drawn up front so the timed loop is evaluation only.
  std::vector<double> points(static_cast<std::size_t>(rep.surrogate_evals) *
                             static_cast<std::size_t>(d));
  for (std::size_t q = 0; q < static_cast<std::size_t>(rep.surrogate_evals); ++q) {
    for (int k = 0; k < d; ++k) {
      const auto& iv = g.interval(k);
      points[q * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
          std::uniform_real_distribution<double>(iv.lo, iv.hi)(eng);
    }
  }
  for (int warm = 0; warm < 16; ++warm) {
    rep.checksum += s.eval(std::span<const double>(points.data(), static_cast<std::size_t>(d)));
  }
  rep.checksum = 0.0;
  const auto t0 = Clock::now();
  for (std::size_t q = 0; q < static_cast<std::size_t>(rep.surrogate_evals); ++q) {
    rep.checksum += s.eval(std::span<const double>(
        points.data() + q * static_cast<std::size_t>(d), static_cast<std::size_t>(d)));
  }
  rep.surrogate_mean_seconds =
      seconds_since(t0) / static_cast<double>(rep.surrogate_evals);

  const SurfaceSpec spec = cfg.quote_spec();
  const MCConfig mc = cfg.effective_mc();
  const auto box = cfg.theta_intervals();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(box.size()));
  const auto t1 = Clock::now();
  for (int c = 0; c < rep.pricer_calls; ++c) {
    for (std::size_t k = 0; k < box.size(); ++k) {
      theta[static_cast<Eigen::Index>(k)] =
          std::uniform_real_distribution<double>(box[k].lo, box[k].hi)(eng);
    }
    const RoughBergomiParams p = RoughBergomiParams::from_flat(theta, cfg.xi_pillar_times);
    (void)pricer(p, spec, mc);
  }
  rep.pricer_mean_seconds = seconds_since(t1) / static_cast<double>(rep.pricer_calls);
  rep.speedup = rep.pricer_mean_seconds / rep.surrogate_mean_seconds;

  fs::create_directories(out_dir);
  Json j;
  j["surrogate_evals"] = rep.surrogate_evals;
  j["surrogate_mean_seconds"] = rep.surrogate_mean_seconds;
  j["pricer_calls"] = rep.pricer_calls;
  j["pricer_mean_seconds"] = rep.pricer_mean_seconds;
  j["speedup"] = rep.speedup;
  j["thread_count"] = rep.thread_count;
  j["checksum"] = rep.checksum;
  save_json(out_dir / artifact::kBenchmarkReport, j);
  return rep;
}

Surrogate load_surrogate(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw BuildError("load_surrogate: cannot open " + file.string());
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() != 8) throw BuildError("load_surrogate: " + file.string() + " is too short");
  const std::string m(magic, 8);
  if (m == "CHEBFULL") return Surrogate(load_dense_tensor(file));
  if (m == "CHEBTTEN") return Surrogate(load_tensor_train(file));
  throw BuildError("load_surrogate: " + file.string() + " has an unknown format magic");
}

}  // namespace chebtt
