#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "advmask/config.hpp"

namespace advmask::cli {

// One verification check: a named statistic against its pinned threshold.
struct CheckResult {
  std::string name;
  bool passed = false;
  double statistic = 0.0;
  double threshold = 0.0;
};

// Sampler verification battery on a random selection-probability vector
// drawn from config.seed: partition function against direct enumeration,
// log-probability chain identity, empirical subset distribution (total
// variation and chi-square), inclusion-probability marginals, forced-move
// exactness, and relaxed-path replay consistency.
std::vector<CheckResult> run_subset_checks(const RunConfig& config);

// Summary of saved-run and corpus comparisons; flags mark which sections ran.
struct AnalyzeResult {
  bool has_metrics = false;
  double metrics_density_mean = 0.0;
  double baseline_density_mean = 0.0;
  double density_gap = 0.0;  // metrics minus baseline
  double metrics_final_loss = 0.0;
  double baseline_final_loss = 0.0;

  bool has_corpus = false;
  double overlap_percent = 0.0;
  double target_shift_mean = 0.0;  // mean density ratio over target tokens
};

AnalyzeResult analyze_runs(const RunConfig& config);

// Subcommand bodies. Each returns a process exit code (0 on success) and
// throws ConfigError / DataError / NumericError for the caller to map.
int cmd_gen_data(const RunConfig& config);
int cmd_domain_tune(const RunConfig& config);
int cmd_finetune(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_analyze(const RunConfig& config);
int cmd_sample_subsets(const RunConfig& config);

}  // namespace advmask::cli
