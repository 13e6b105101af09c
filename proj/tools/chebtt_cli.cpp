#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <chebtt/harness.hpp>

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_file;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file,
                  "experiment config JSON; desk-scale defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", args.out_dir, "artifact directory")->capture_default_str();
  args.seed_opt = cmd->add_option("--seed", args.seed, "override the config root seed");
}

chebtt::ExperimentConfig resolve_config(const CommonArgs& args) {
  chebtt::ExperimentConfig cfg =
      args.config_file.empty()
          ? chebtt::desk_config()
          : chebtt::experiment_config_from_json(chebtt::load_json(args.config_file));
  if (args.seed_opt != nullptr && args.seed_opt->count() > 0) cfg.root_seed = args.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chebyshev tensor surrogates for rough Bergomi implied vol: build, assess, "
               "calibrate, benchmark"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string surrogate_file;
  std::string surfaces_dir;

  CLI::App* generate = app.add_subcommand(
      "generate-surfaces", "draw model parameters and price benchmark vol surfaces");
  add_common(generate, args);
  generate->add_option("--surrogate", surrogate_file,
                       "surrogate tensor when the config source is \"surrogate\"");

  CLI::App* direct = app.add_subcommand(
      "build-direct", "price every tensor grid node and store the dense interpolant");
  add_common(direct, args);

  CLI::App* tt = app.add_subcommand(
      "build-tt", "sample grid entries and complete a tensor-train interpolant");
  add_common(tt, args);

  CLI::App* assess = app.add_subcommand(
      "assess-accuracy", "compare a surrogate against stored benchmark surfaces");
  add_common(assess, args);
  assess->add_option("--surrogate", surrogate_file, "surrogate tensor file")->required();
  assess->add_option("--surfaces-dir", surfaces_dir,
                     "benchmark surface directory (default <out-dir>/surfaces)");

  CLI::App* batch = app.add_subcommand(
      "calibrate-batch", "calibrate the surrogate to every stored benchmark surface");
  add_common(batch, args);
  batch->add_option("--surrogate", surrogate_file, "surrogate tensor file")->required();
  batch->add_option("--surfaces-dir", surfaces_dir,
                    "benchmark surface directory (default <out-dir>/surfaces)");

  CLI::App* bench = app.add_subcommand(
      "benchmark", "time surrogate evaluations against full pricer calls");
  add_common(bench, args);
  bench->add_option("--surrogate", surrogate_file, "surrogate tensor file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const fs::path out_dir(args.out_dir);
    if (surfaces_dir.empty()) surfaces_dir = (out_dir / "surfaces").string();

    if (generate->parsed()) {
      const chebtt::ExperimentConfig cfg = resolve_config(args);
      std::optional<chebtt::Surrogate> source;
      if (cfg.surface_source == "surrogate") {
        if (surrogate_file.empty()) {
          throw chebtt::ConfigError(
              "generate-surfaces: config source is \"surrogate\" but --surrogate is missing");
        }
        source = chebtt::load_surrogate(surrogate_file);
      }
      const auto res =
          chebtt::generate_surfaces(cfg, out_dir, source ? &*source : nullptr);
      std::cout << "wrote " << res.written << " surfaces (" << res.failed << " failed) -> "
                << res.manifest_file.string() << "\n";
    } else if (direct->parsed()) {
      const auto res = chebtt::build_direct(resolve_config(args), out_dir);
      std::cout << "priced " << res.pricer_calls << " parameter points, stored "
                << res.value_count << " values in " << res.wall_time_seconds << " s -> "
                << res.tensor_file.string() << "\n";
    } else if (tt->parsed()) {
      const auto res = chebtt::build_tt(resolve_config(args), out_dir);
      std::cout << "grid size " << res.grid_size << ", used " << res.samples_used
                << " samples over " << res.pricer_calls << " pricer calls, held-out rel RMSE "
                << res.report.test_rmse << " -> " << res.tensor_file.string() << "\n";
      if (!res.report.converged) {
        std::cerr << "completion did not reach the held-out tolerance (report at "
                  << res.report_file.string() << ")\n";
        return 3;
      }
    } else if (assess->parsed()) {
      const chebtt::Surrogate s = chebtt::load_surrogate(surrogate_file);
      const auto rep = chebtt::assess_accuracy(s, surfaces_dir, out_dir);
      std::cout << "assessed " << rep.surfaces_used << " surfaces (" << rep.surfaces_excluded
                << " outside the domain box): mean abs error " << rep.overall_mean_error
                << ", max " << rep.overall_max_error << " (absolute vol)\n";
    } else if (batch->parsed()) {
      const chebtt::ExperimentConfig cfg = resolve_config(args);
      const chebtt::Surrogate s = chebtt::load_surrogate(surrogate_file);
      const auto sum = chebtt::calibrate_batch(s, surfaces_dir, cfg, out_dir);
      std::cout << "calibrated " << sum.calibrated << " surfaces (" << sum.failed
                << " failed); RMSE quantiles 50/90/99/max: " << sum.rmse_q50 << " "
                << sum.rmse_q90 << " " << sum.rmse_q99 << " " << sum.rmse_max << "\n";
    } else if (bench->parsed()) {
      const chebtt::ExperimentConfig cfg = resolve_config(args);
      const chebtt::Surrogate s = chebtt::load_surrogate(surrogate_file);
      const auto rep = chebtt::benchmark(s, cfg, out_dir);
      std::cout << rep.surrogate_evals << " surrogate evals at "
                << rep.surrogate_mean_seconds * 1e6 << " us each vs " << rep.pricer_calls
                << " pricer calls at " << rep.pricer_mean_seconds << " s each: speedup "
                << rep.speedup << "x\n";
    }
    return 0;
  } catch (const chebtt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
