#pragma once

// Exact and stability-randomized model selectors: constrained LASSO by
// Frank-Wolfe, marginal screening, and forward stepwise. Each stable selector
// adds Laplace noise to the scores it compares, calibrated so that every step
// is eta_step-indistinguishable on typical input pairs, and certifies the
// k-fold composed budgets.
//
// Tie rule everywhere: the lowest index wins (for LASSO, vertices are ordered
// +C1 e_0, -C1 e_0, +C1 e_1, ...).

#include "stabposi/linmodel.hpp"
#include "stabposi/noise.hpp"
#include "stabposi/rng.hpp"
#include "stabposi/stability.hpp"

#include <optional>
#include <vector>

namespace stabposi {

/// One greedy step: which candidate won and how its score compared.
struct StepRecord {
  int step = 0;
  std::size_t index = 0;
  int sign = 1;                   // LASSO vertex sign; +1 otherwise
  double clean_score = 0.0;       // noiseless score of the chosen candidate
  double noisy_score = 0.0;       // score that won the comparison
  double best_clean_score = 0.0;  // best noiseless score among the candidates
};

struct SelectionResult {
  ModelSet model;
  std::vector<std::size_t> order;  // selection order (screening / stepwise)
  std::optional<Vector> theta;     // LASSO only
  std::vector<StepRecord> trace;
  /// {(k eta^2/2 + sqrt(2k log(1/delta)) eta, delta, delta), (k eta, 0, delta)}
  std::vector<StabilityBudget> budgets;
  double noise_scale = 0.0;
  int steps = 0;
};

/// The two composed certificates shared by all three stable selectors.
std::vector<StabilityBudget> certify_budgets(int k, double eta_step, double delta);

// ---------------------------------------------------------------- LASSO

/// (1/n) ||y - X theta||^2, the loss minimized by the Frank-Wolfe selectors.
double lasso_loss(const DesignMatrix& x, const Vector& y, const Vector& theta);

/// Noiseless Frank-Wolfe on {||theta||_1 <= c1} with step 2/(t+1), t = 1..steps.
Vector lasso_exact_fw(const DesignMatrix& x, const Vector& y, double c1, int steps);

/// Step count ceil(n ||X||_inf^2 C1 eta / (s ||X||_{2,inf})), where s is sigma
/// (or G for an Orlicz policy), clamped to [1, cap].
int default_lasso_steps(const DesignMatrix& x, double c1, const NoisePolicy& policy,
                        int cap = 10000);

struct LassoConfig {
  double c1 = 1.0;
  int steps = 1;
  NoisePolicy policy;
  /// Test hook: replaces the calibrated Laplace scale (0 disables noise).
  std::optional<double> noise_scale_override;
};

SelectionResult stable_lasso(const DesignMatrix& x, const Vector& y, const LassoConfig& cfg,
                             const RngStream& rng);

/// Indices with |theta_j| > threshold.
ModelSet support(const Vector& theta, double threshold = 1e-12);

struct PenalizedLassoFit {
  Vector theta;
  double duality_gap = 0.0;
  int sweeps = 0;
};

/// Cyclic coordinate descent for (1/2)||y - X theta||^2 + lambda ||theta||_1.
/// Stops once the duality gap is <= tol * max(1, ||y||^2 / 2).
PenalizedLassoFit lasso_penalized_cd(const DesignMatrix& x, const Vector& y, double lambda,
                                     double tol = 1e-8, int max_sweeps = 100000,
                                     const Vector* warm_start = nullptr);

/// ||theta_hat_lambda||_1 of the penalized solution.
double lambda_to_c1(const DesignMatrix& x, const Vector& y, double lambda, double tol = 1e-8);

// ------------------------------------------------------ marginal screening

/// c = X^T y / n.
Vector marginal_correlations(const DesignMatrix& x, const Vector& y);

/// Top-k |c_i| in selection order.
std::vector<std::size_t> screening_exact_order(const DesignMatrix& x, const Vector& y, int k);
ModelSet screening_exact(const DesignMatrix& x, const Vector& y, int k);

struct GreedyConfig {
  int k = 1;
  NoisePolicy policy;
  std::optional<double> noise_scale_override;
};

SelectionResult stable_screening(const DesignMatrix& x, const Vector& y, const GreedyConfig& cfg,
                                 const RngStream& rng);

// -------------------------------------------------------- forward stepwise

enum class StepwiseCriterion {
  /// argmax |X_j^T P^perp y| / ||P^perp X_j|| (incremental Gram-Schmidt).
  NormalizedCorrelation,
  /// argmin ||y - P_{M u j} y||^2 (fresh QR refit per candidate).
  ErrorDecrease,
};

/// Candidates with ||P^perp X_j|| <= 1e-10 ||X_j|| are never selected.
std::vector<std::size_t> fs_exact_order(const DesignMatrix& x, const Vector& y, int k,
                                        StepwiseCriterion criterion =
                                            StepwiseCriterion::NormalizedCorrelation);
ModelSet fs_exact(const DesignMatrix& x, const Vector& y, int k,
                  StepwiseCriterion criterion = StepwiseCriterion::NormalizedCorrelation);

SelectionResult stable_fs(const DesignMatrix& x, const Vector& y, const GreedyConfig& cfg,
                          const RngStream& rng);

}  // namespace stabposi
