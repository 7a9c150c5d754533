#include "stabposi/stability.hpp"

#include "stabposi/errors.hpp"
#include "stabposi/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stabposi {

namespace {

void check_delta(double delta, const char* who) {
  require(delta > 0.0 && delta < 1.0, std::string(who) + " needs 0 < delta < 1");
}

}  // namespace

void StabilityBudget::validate() const {
  require(eta >= 0.0 && !std::isnan(eta), "stability budget needs eta >= 0");
  require(tau >= 0.0 && tau <= 1.0, "stability budget needs 0 <= tau <= 1");
  require(nu >= 0.0 && nu < 1.0, "stability budget needs 0 <= nu < 1");
}

VarianceMode VarianceMode::estimated(int dof) {
  require(dof >= 1, "estimated-sigma mode needs dof >= 1");
  return {Kind::EstimatedSigma, dof};
}

EtaTau compose_adaptive_simple(double eta_step, double tau_step, int k) {
  require(k >= 1, "composition needs k >= 1");
  require(eta_step >= 0.0, "composition needs eta_step >= 0");
  require(tau_step >= 0.0 && tau_step <= 1.0, "composition needs tau_step in [0,1]");
  return {k * eta_step, k * tau_step};
}

double compose_adaptive_advanced(double eta_step, int k, double delta) {
  require(k >= 1, "composition needs k >= 1");
  require(eta_step >= 0.0, "composition needs eta_step >= 0");
  check_delta(delta, "advanced composition");
  return 0.5 * k * eta_step * eta_step + std::sqrt(2.0 * k * std::log(1.0 / delta)) * eta_step;
}

StabilityBudget compose_nonadaptive(std::span<const StabilityBudget> budgets) {
  if (budgets.empty()) throw EmptyInput("non-adaptive composition of an empty list");
  StabilityBudget total;
  for (const auto& b : budgets) {
    b.validate();
    total.eta += b.eta;
    total.tau += b.tau;
    total.nu += b.nu;
  }
  total.tau = std::min(total.tau, 1.0);
  total.nu = std::min(total.nu, 1.0);
  return total;
}

double sparse_selection_eta(std::uint64_t d, std::uint64_t s, double tau) {
  require(s >= 1 && s <= d, "sparse_selection_eta needs 1 <= s <= d");
  require(tau > 0.0 && tau <= 1.0, "sparse_selection_eta needs 0 < tau <= 1");
  // log C(d, k) by the recurrence C(d,k) = C(d,k-1) (d-k+1)/k, then log-sum-exp.
  std::vector<double> log_binom(s);
  double acc = 0.0;
  for (std::uint64_t k = 1; k <= s; ++k) {
    acc += std::log(static_cast<double>(d - k + 1)) - std::log(static_cast<double>(k));
    log_binom[k - 1] = acc;
  }
  const double top = *std::max_element(log_binom.begin(), log_binom.end());
  double sum = 0.0;
  for (double lb : log_binom) sum += std::exp(lb - top);
  return top + std::log(sum) - std::log(tau);
}

double log_corrected_level(double delta, const StabilityBudget& budget) {
  check_delta(delta, "corrected level");
  budget.validate();
  return std::log(delta) + std::log1p(-budget.nu) - budget.eta;
}

double corrected_level(double delta, const StabilityBudget& budget) {
  check_delta(delta, "corrected level");
  budget.validate();
  return delta * (1.0 - budget.nu) * std::exp(-budget.eta);
}

double posi_constant(std::size_t model_size, double delta, const StabilityBudget& budget,
                     VarianceMode mode) {
  if (model_size == 0) throw DegenerateLevel("PoSI constant needs a nonempty model");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DegenerateLevel("PoSI constant needs 0 < delta < 1, got " + std::to_string(delta));
  }
  const double log_tail =
      log_corrected_level(delta, budget) - std::log(2.0 * static_cast<double>(model_size));
  if (mode.kind == VarianceMode::Kind::KnownSigma) return normal_upper_quantile_log(log_tail);
  return t_upper_quantile_log(log_tail, mode.dof);
}

PosiChoice best_posi_constant(std::size_t model_size, double delta,
                              std::span<const StabilityBudget> candidates, VarianceMode mode) {
  if (candidates.empty()) throw EmptyInput("no candidate stability budgets");
  const double slack = candidates.front().slack();
  for (const auto& c : candidates) {
    if (std::fabs(c.slack() - slack) > 1e-12) {
      throw MixedSlack("candidate budgets carry different total slack tau + nu (" +
                       std::to_string(slack) + " vs " + std::to_string(c.slack()) + ")");
    }
  }
  PosiChoice best;
  best.K = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double K = posi_constant(model_size, delta, candidates[i], mode);
    if (K < best.K) best = {K, candidates[i], i};
  }
  return best;
}

std::vector<StabilityBudget> align_slack(std::span<const StabilityBudget> candidates) {
  double slack = 0.0;
  for (const auto& c : candidates) {
    c.validate();
    slack = std::max(slack, c.slack());
  }
  std::vector<StabilityBudget> out(candidates.begin(), candidates.end());
  for (auto& c : out) c.nu = slack - c.tau;
  for (auto& c : out) {
    if (!(c.nu < 1.0)) throw DegenerateLevel("aligned slack leaves nu >= 1");
  }
  return out;
}

PosiForAlpha posi_for_alpha(std::size_t model_size, double alpha,
                            std::span<const StabilityBudget> candidates, VarianceMode mode) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  const auto aligned = align_slack(candidates);
  const double slack = aligned.empty() ? 0.0 : aligned.front().slack();
  const double delta = alpha - slack;
  if (!(delta > 0.0)) {
    throw DegenerateLevel("stability slack " + std::to_string(slack) + " exhausts alpha = " +
                          std::to_string(alpha));
  }
  const auto best = best_posi_constant(model_size, delta, aligned, mode);
  return {best.K, delta, best.chosen, best.index};
}

LevelAllocation alpha_split(double alpha, std::optional<AlphaWeights> weights) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  if (!weights) return {alpha / 3.0, alpha / 3.0, alpha / 3.0};
  const auto& w = *weights;
  if (!(w.delta > 0.0 && w.tau > 0.0 && w.nu > 0.0)) {
    throw BadWeights("alpha weights must be positive");
  }
  if (std::fabs(w.delta + w.tau + w.nu - 1.0) > 1e-9) {
    throw BadWeights("alpha weights must sum to 1");
  }
  return {alpha * w.delta, alpha * w.tau, alpha * w.nu};
}

IntervalSet build_intervals(const FitResult& fit, double K) {
  require(K >= 0.0, "PoSI constant must be nonnegative");
  if (fit.coefficients.size() != static_cast<Eigen::Index>(fit.model.size()) ||
      fit.stderrs.size() != fit.coefficients.size()) {
    throw DimensionMismatch("fit result vectors do not match the model size");
  }
  IntervalSet out;
  out.model = fit.model;
  out.estimates = fit.coefficients;
  out.stderrs = fit.stderrs;
  out.K = K;
  out.lower = fit.coefficients - K * fit.stderrs;
  out.upper = fit.coefficients + K * fit.stderrs;
  return out;
}

double orlicz_constant(const OrliczFunction& psi, double G, std::size_t model_size, double delta,
                       const StabilityBudget& budget) {
  require(G > 0.0, "Orlicz bound G must be positive");
  require(model_size >= 1, "Orlicz constant needs a nonempty model");
  // log(|M| e^eta / (delta (1 - nu))) = log|M| - log corrected level
  const double log_arg =
      std::log(static_cast<double>(model_size)) - log_corrected_level(delta, budget);
  return psi.inverse_from_log(log_arg) * G;
}

double orlicz_constant(const std::string& psi_name, double G, std::size_t model_size,
                       double delta, const StabilityBudget& budget,
                       const OrliczRegistry& registry) {
  return orlicz_constant(registry.get(psi_name), G, model_size, delta, budget);
}

}  // namespace stabposi
