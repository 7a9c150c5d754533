#pragma once

// Stability-budget bookkeeping and the confidence-interval corrections built on
// it: composition rules, corrected significance levels, Bonferroni PoSI
// constants (z or t), and the Orlicz-norm multiplier.
//
// A selection procedure that is (eta, tau, nu)-stable admits simultaneous
// intervals beta_hat_j +- K sigma_j with miscoverage at most delta + tau + nu,
// where K is the classical constant at the corrected level
// delta (1 - nu) e^{-eta}.

#include "stabposi/linmodel.hpp"
#include "stabposi/orlicz.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace stabposi {

/// (eta, tau, nu): log-ratio bound, additive indistinguishability slack, and
/// probability of an atypical input pair.
struct StabilityBudget {
  double eta = 0.0;
  double tau = 0.0;
  double nu = 0.0;

  /// Throws InvalidArgument unless eta >= 0, tau in [0,1], nu in [0,1).
  void validate() const;
  double slack() const { return tau + nu; }

  friend bool operator==(const StabilityBudget&, const StabilityBudget&) = default;
};

/// Split of the total miscoverage alpha = delta + tau + nu.
struct LevelAllocation {
  double delta = 0.0;
  double tau = 0.0;
  double nu = 0.0;

  double alpha() const { return delta + tau + nu; }
  /// The delta handed to stable selectors: they certify (., delta_s, delta_s)
  /// and (., 0, delta_s), so delta_s must fit in both tau and nu.
  double selection_delta() const { return tau < nu ? tau : nu; }
};

struct AlphaWeights {
  double delta = 1.0 / 3.0;
  double tau = 1.0 / 3.0;
  double nu = 1.0 / 3.0;
};

struct EtaTau {
  double eta = 0.0;
  double tau = 0.0;
};

/// k-fold adaptive composition, simple form: (k eta, k tau).
EtaTau compose_adaptive_simple(double eta_step, double tau_step, int k);

/// k-fold adaptive composition, advanced form: k eta^2 / 2 + sqrt(2 k log(1/delta)) eta.
/// The caller adds delta (plus k tau_step) to the slack.
double compose_adaptive_advanced(double eta_step, int k, double delta);

/// Componentwise sum of independent selections run on the same data; tau and
/// nu are clamped to 1.
StabilityBudget compose_nonadaptive(std::span<const StabilityBudget> budgets);

/// log(sum_{k=1}^s C(d, k)) + log(1/tau): the eta certified for any selection
/// returning at most s of d features, evaluated in log space.
double sparse_selection_eta(std::uint64_t d, std::uint64_t s, double tau);

/// delta (1 - nu) e^{-eta}.
double corrected_level(double delta, const StabilityBudget& budget);
/// log of corrected_level; finite even when the level underflows.
double log_corrected_level(double delta, const StabilityBudget& budget);

/// Known sigma uses normal quantiles; an estimated sigma with r degrees of
/// freedom uses Student t_r quantiles.
struct VarianceMode {
  enum class Kind { KnownSigma, EstimatedSigma };
  Kind kind = Kind::KnownSigma;
  int dof = 0;

  static VarianceMode known() { return {}; }
  static VarianceMode estimated(int dof);
};

/// Bonferroni PoSI constant: the (1 - level / (2 |M|)) quantile with
/// level = corrected_level(delta, budget).
double posi_constant(std::size_t model_size, double delta, const StabilityBudget& budget,
                     VarianceMode mode = VarianceMode::known());

struct PosiChoice {
  double K = 0.0;
  StabilityBudget chosen;
  std::size_t index = 0;
};

/// Smallest constant over certified budgets. Every candidate must carry the same
/// total slack tau + nu (throws MixedSlack otherwise); ties keep the first.
PosiChoice best_posi_constant(std::size_t model_size, double delta,
                              std::span<const StabilityBudget> candidates,
                              VarianceMode mode = VarianceMode::known());

/// Pads nu of each candidate so that all share the largest slack tau + nu among
/// them. Raising nu only weakens a certificate, so the result remains valid.
std::vector<StabilityBudget> align_slack(std::span<const StabilityBudget> candidates);

struct PosiForAlpha {
  double K = 0.0;
  double delta = 0.0;  // quantile budget alpha - slack
  StabilityBudget chosen;
  std::size_t index = 0;
};

/// Aligns the candidates' slack, spends the rest of alpha on the quantile
/// budget, and returns the smallest constant. Throws DegenerateLevel when the
/// slack already exhausts alpha.
PosiForAlpha posi_for_alpha(std::size_t model_size, double alpha,
                            std::span<const StabilityBudget> candidates,
                            VarianceMode mode = VarianceMode::known());

/// Equal thirds by default; weights must be positive and sum to 1.
LevelAllocation alpha_split(double alpha, std::optional<AlphaWeights> weights = std::nullopt);

/// Per-coefficient intervals estimate_j +- K stderr_j.
struct IntervalSet {
  ModelSet model;
  Vector estimates;
  Vector stderrs;
  double K = 0.0;
  Vector lower;
  Vector upper;

  std::size_t size() const { return model.size(); }
  Vector widths() const { return upper - lower; }
  bool covers(std::size_t pos, double value) const {
    return lower[static_cast<Eigen::Index>(pos)] <= value &&
           value <= upper[static_cast<Eigen::Index>(pos)];
  }
};

IntervalSet build_intervals(const FitResult& fit, double K);

/// psi^{-1}(|M| e^eta / (delta (1 - nu))) G. Multiply by
/// sqrt(((X_M^T X_M)^{-1})_jj) for the half-width of coefficient j.
double orlicz_constant(const OrliczFunction& psi, double G, std::size_t model_size, double delta,
                       const StabilityBudget& budget);
/// Registry lookup by name; throws UnregisteredOrlicz.
double orlicz_constant(const std::string& psi_name, double G, std::size_t model_size,
                       double delta, const StabilityBudget& budget,
                       const OrliczRegistry& registry = OrliczRegistry::builtin());

}  // namespace stabposi
