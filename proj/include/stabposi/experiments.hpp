#pragma once

// Synthetic Monte Carlo harness: generate (X, beta, y), run a selector, build
// the stability-corrected intervals and score coverage, width, FDR and risk.

#include "stabposi/linmodel.hpp"
#include "stabposi/rng.hpp"
#include "stabposi/selectors.hpp"
#include "stabposi/stability.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stabposi {

enum class SelectorKind { Fixed, Screen, ForwardStepwise, Lasso };

std::string to_string(SelectorKind kind);
/// "fixed", "screen", "fs", "lasso"; throws InvalidArgument otherwise.
SelectorKind parse_selector_kind(const std::string& name);

struct SelectorSpec {
  SelectorKind kind = SelectorKind::Screen;
  int k = 3;                               // screen / fs
  std::vector<std::size_t> fixed_model;    // fixed
  std::optional<double> c1;                // lasso; wins when both are set
  std::optional<double> lambda;            // lasso; resolved to c1, used in the risk
  std::optional<int> steps;                // lasso; default rule when absent
  std::optional<double> noise_scale_override;
};

struct ExperimentConfig {
  int n = 1000;
  int d = 500;
  double signal = 5.0;
  double active_fraction = 0.8;
  double sigma = 1.0;
  double alpha = 0.1;
  SelectorSpec selector;
  std::vector<double> eta_grid;  // per-step eta; empty means default_eta_grid()
  int trials = 500;
  std::uint64_t master_seed = 0;
  bool regenerate_X_per_trial = true;
  bool estimate_sigma = false;
  AlphaWeights weights;
  bool coupled = true;  // same trial streams for every eta

  void validate() const;
};

/// 0.5, 1.0, ..., 10.0
std::vector<double> default_eta_grid();

struct SyntheticData {
  DesignMatrix x;
  Vector beta;
  Vector mu;
  Vector y;
};

/// Streams for one trial: child 0 draws X, child 1 the noise, child 2 the
/// selection. `eta_index` only matters when cfg.coupled is false.
RngStream trial_stream(const ExperimentConfig& cfg, int trial_index, std::size_t eta_index = 0);

/// X_ij ~ N(0, 1) / sqrt(n), beta_j = signal on the first
/// floor(active_fraction * d) coordinates, y = X beta + sigma xi.
SyntheticData gen_synthetic(const ExperimentConfig& cfg, int trial_index,
                            std::size_t eta_index = 0);

/// Fills selector.c1 from selector.lambda on a pilot draw that no trial uses.
/// Returns cfg unchanged when c1 is already set or the selector is not LASSO.
ExperimentConfig resolve_config(const ExperimentConfig& cfg);

/// Smallest per-step eta for which the better of the two certified budgets of
/// a k-step selector reaches `total`.
double eta_step_for_total(int k, double delta, double total);

struct TrialRecord {
  int trial = 0;
  double eta = 0.0;
  ModelSet model;
  bool covered = true;
  Vector widths;
  double fdr = 0.0;
  std::optional<double> risk;
  double K = 0.0;
  StabilityBudget budget_used;
  bool flagged = false;  // rank-deficient selection; excluded from summaries
  std::string flag_reason;
};

/// Runs one trial of the configured selector with per-step `eta`.
/// RankDeficient during the fit flags the record instead of throwing.
TrialRecord run_trial(const ExperimentConfig& cfg, double eta, int trial_index,
                      std::size_t eta_index = 0);

/// Exact selection on the first ceil(fraction n) rows, classical intervals on
/// the rest.
TrialRecord data_split_baseline(const ExperimentConfig& cfg, double split_fraction,
                                int trial_index);

struct ExperimentSummary {
  double eta = 0.0;
  int trials = 0;   // records used
  int flagged = 0;  // records excluded
  int empty_models = 0;
  double empirical_coverage = 0.0;
  double width_max = 0.0;
  std::map<double, double> width_quantiles;  // 0.80, 0.85, 0.90, 1.00
  double mean_fdr = 0.0;
  std::optional<double> mean_risk;
  double mean_K = 0.0;
  double mean_model_size = 0.0;
};

/// Nearest-rank quantile: the ceil(q N)-th smallest value.
double nearest_rank_quantile(std::vector<double> values, double q);

/// Throws EmptyInput on no records, or when every record is flagged.
ExperimentSummary aggregate(const std::vector<TrialRecord>& records);

/// All trials for one eta on `workers` threads; results are in trial order.
std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, double eta,
                                    std::size_t eta_index = 0, int workers = 1);

struct SweepPoint {
  double eta = 0.0;
  std::vector<TrialRecord> records;
  ExperimentSummary summary;
};

/// One point per eta. cfg is resolved first (lambda -> c1).
std::vector<SweepPoint> eta_sweep(const ExperimentConfig& cfg,
                                  const std::vector<double>& eta_grid, int workers = 1);

}  // namespace stabposi
