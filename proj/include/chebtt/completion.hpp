#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chebtt/tensor_train.hpp"

namespace chebtt {

struct SampleEntry {
  std::vector<Index> idx;
  double value = 0.0;
};

// Observed grid entries with a seeded train/test split. Multi-indices must be
// unique and in bounds; the split partitions all entries and depends only on
// the entry count and the seed, never on the values.
class SampleSet {
 public:
  SampleSet(std::vector<Index> dims, std::vector<SampleEntry> entries, double train_fraction,
            std::uint64_t seed);

  [[nodiscard]] const std::vector<Index>& dims() const { return dims_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<SampleEntry>& entries() const { return entries_; }
  // positions into entries()
  [[nodiscard]] std::span<const std::size_t> train_positions() const { return train_; }
  [[nodiscard]] std::span<const std::size_t> test_positions() const { return test_; }

 private:
  std::vector<Index> dims_;
  std::vector<SampleEntry> entries_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> test_;
};

struct CompletionConfig {
  int max_cg_iterations = 250;     // per rank stage
  double train_rel_tol = 1e-8;     // stage stops early below this train RMSE
  double test_rel_tol = 1e-4;      // held-out RMSE defining success
  double stagnation_epsilon = 1e-3;  // min relative test improvement per rank cycle
  Index max_rank = 16;
  double sample_growth_factor = 2.0;
  int max_sample_rounds = 4;
  std::uint64_t rng_seed = 0;
};

struct CompletionReport {
  std::vector<Index> final_ranks;  // r_0..r_d
  double train_rmse = 0.0;         // relative RMSE on the training entries
  double test_rmse = 0.0;          // relative RMSE on the held-out entries
  double train_sq_loss = 0.0;      // raw sum of squared training residuals
  double test_sq_loss = 0.0;
  std::vector<int> iterations_per_stage;
  std::vector<double> train_loss_history;  // accepted-iterate 1/2 sum res^2, last stage
  std::size_t samples_used = 0;
  int sample_rounds = 0;
  bool converged = false;
  double wall_time_seconds = 0.0;

  // Reproducible content only; wall time is reported separately by callers.
  [[nodiscard]] std::string to_json() const;
};

// Minimizes the squared misfit on the training entries over TT tensors of the
// given fixed ranks (r_0..r_d, boundaries 1) by Riemannian conjugate gradient
// on the fixed-rank manifold. Returns the best iterate by training loss.
[[nodiscard]] std::pair<TensorTrain<double>, CompletionReport> complete_fixed_rank(
    const SampleSet& samples, std::span<const Index> ranks, const CompletionConfig& cfg);

// Starts at all-ones ranks and cyclically increments one interior rank at a
// time (warm-started with noise-padded cores) until the held-out RMSE meets
// cfg.test_rel_tol, ranks hit cfg.max_rank, or a full cycle improves the
// held-out RMSE by less than cfg.stagnation_epsilon relative.
[[nodiscard]] std::pair<TensorTrain<double>, CompletionReport> rank_adaptive(
    const SampleSet& samples, const CompletionConfig& cfg);

// Produces up to `count` additional unique observations; returning fewer
// signals exhaustion.
using Sampler = std::function<std::vector<SampleEntry>(std::size_t count)>;

// Runs rank_adaptive on an initial draw; while unsuccessful, grows the sample
// set by cfg.sample_growth_factor (at most cfg.max_sample_rounds times) and
// retries. Returns the best attempt.
[[nodiscard]] std::pair<TensorTrain<double>, CompletionReport> sample_adaptive(
    const std::vector<Index>& dims, const Sampler& sampler, std::size_t initial_count,
    const CompletionConfig& cfg);

// Uniform unique multi-indices, deterministic in the seed.
[[nodiscard]] std::vector<std::vector<Index>> draw_unique_indices(std::span<const Index> dims,
                                                                  std::size_t count,
                                                                  std::uint64_t seed);

}  // namespace chebtt
