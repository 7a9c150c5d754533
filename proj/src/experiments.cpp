#include "stabposi/experiments.hpp"

#include "stabposi/errors.hpp"
#include "stabposi/noise.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

namespace stabposi {

namespace {

constexpr std::uint64_t kSharedDesignPath = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kPilotPath = kSharedDesignPath - 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix draw_design(int n, int d, RngStream rng) {
  Matrix x(n, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = scale * rng.standard_normal();
  }
  return x;
}

SyntheticData make_data(const ExperimentConfig& cfg, Matrix x, RngStream noise_rng) {
  Vector beta = Vector::Zero(cfg.d);
  const auto active = static_cast<int>(std::floor(cfg.active_fraction * cfg.d + 1e-9));
  beta.head(active).setConstant(cfg.signal);
  DesignMatrix design(std::move(x));
  Vector mu = design.entries() * beta;
  Vector y(cfg.n);
  for (int i = 0; i < cfg.n; ++i) y[i] = mu[i] + cfg.sigma * noise_rng.standard_normal();
  return {std::move(design), std::move(beta), std::move(mu), std::move(y)};
}

struct Selection {
  ModelSet model;
  std::vector<StabilityBudget> budgets;
  std::optional<Vector> theta;
};

Selection select(const ExperimentConfig& cfg, const DesignMatrix& x, const Vector& y, double eta,
                 double delta_s, const RngStream& rng) {
  const SelectorSpec& spec = cfg.selector;
  if (spec.kind == SelectorKind::Fixed) {
    ModelSet model(spec.fixed_model);
    model.check_within(x.d());
    return {std::move(model), {StabilityBudget{}}, std::nullopt};
  }
  const NoisePolicy policy = subgaussian_policy(cfg.sigma, delta_s, eta);
  SelectionResult res;
  if (spec.kind == SelectorKind::Lasso) {
    require(spec.c1.has_value(), "LASSO selector needs c1 (resolve lambda first)");
    LassoConfig lc;
    lc.c1 = *spec.c1;
    lc.policy = policy;
    lc.steps = spec.steps ? *spec.steps : default_lasso_steps(x, lc.c1, policy);
    lc.noise_scale_override = spec.noise_scale_override;
    res = stable_lasso(x, y, lc, rng);
  } else {
    GreedyConfig gc{spec.k, policy, spec.noise_scale_override};
    res = spec.kind == SelectorKind::Screen ? stable_screening(x, y, gc, rng)
                                            : stable_fs(x, y, gc, rng);
  }
  return {std::move(res.model), std::move(res.budgets), std::move(res.theta)};
}

Selection select_exact(const ExperimentConfig& cfg, const DesignMatrix& x, const Vector& y) {
  const SelectorSpec& spec = cfg.selector;
  Selection out;
  out.budgets = {StabilityBudget{}};
  switch (spec.kind) {
    case SelectorKind::Fixed:
      out.model = ModelSet(spec.fixed_model);
      out.model.check_within(x.d());
      break;
    case SelectorKind::Screen:
      out.model = screening_exact(x, y, spec.k);
      break;
    case SelectorKind::ForwardStepwise:
      out.model = fs_exact(x, y, spec.k);
      break;
    case SelectorKind::Lasso:
      if (spec.lambda) {
        out.theta = lasso_penalized_cd(x, y, *spec.lambda).theta;
      } else {
        require(spec.c1.has_value(), "LASSO selector needs c1 or lambda");
        out.theta = lasso_exact_fw(x, y, *spec.c1, spec.steps.value_or(200));
      }
      out.model = support(*out.theta);
      break;
  }
  return out;
}

double false_discovery(const ModelSet& model, const Vector& beta) {
  std::size_t nulls = 0;
  for (std::size_t j : model) {
    if (beta[static_cast<Eigen::Index>(j)] == 0.0) ++nulls;
  }
  return static_cast<double>(nulls) / static_cast<double>(std::max<std::size_t>(model.size(), 1));
}

// Intervals, targets and coverage on a fixed design; fills K, widths, covered.
void score_intervals(TrialRecord& rec, const ExperimentConfig& cfg, const DesignMatrix& x,
                     const Vector& y, const Vector& mu,
                     const std::vector<StabilityBudget>& budgets) {
  if (rec.model.empty()) {
    rec.covered = true;
    rec.K = kNaN;
    rec.budget_used = budgets.front();
    return;
  }
  try {
    double sigma = cfg.sigma;
    VarianceMode mode = VarianceMode::known();
    if (cfg.estimate_sigma) {
      const SigmaEstimate est = sigma_hat_full_model(x, y);
      sigma = est.sigma_hat;
      mode = VarianceMode::estimated(est.dof);
    }
    const PosiForAlpha pf = posi_for_alpha(rec.model.size(), cfg.alpha, budgets, mode);
    const IntervalSet ci = build_intervals(fit_model(x, rec.model, y, sigma), pf.K);
    const Vector target = target_coefficients(x, rec.model, mu);
    rec.K = pf.K;
    rec.budget_used = pf.chosen;
    rec.widths = ci.widths();
    rec.covered = true;
    for (std::size_t p = 0; p < ci.size(); ++p) {
      if (!ci.covers(p, target[static_cast<Eigen::Index>(p)])) rec.covered = false;
    }
  } catch (const RankDeficient& e) {
    rec.flagged = true;
    rec.flag_reason = e.what();
    rec.covered = false;
    rec.K = kNaN;
    rec.widths.resize(0);
  }
}

}  // namespace

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::Fixed: return "fixed";
    case SelectorKind::Screen: return "screen";
    case SelectorKind::ForwardStepwise: return "fs";
    case SelectorKind::Lasso: return "lasso";
  }
  return "?";
}

SelectorKind parse_selector_kind(const std::string& name) {
  if (name == "fixed") return SelectorKind::Fixed;
  if (name == "screen") return SelectorKind::Screen;
  if (name == "fs") return SelectorKind::ForwardStepwise;
  if (name == "lasso") return SelectorKind::Lasso;
  throw InvalidArgument("unknown selector '" + name + "' (expected fixed|screen|fs|lasso)");
}

void ExperimentConfig::validate() const {
  require(n >= 1 && d >= 1, "experiment needs n, d >= 1");
  require(trials >= 1, "experiment needs trials >= 1");
  require(alpha > 0.0 && alpha < 1.0, "experiment needs alpha in (0, 1)");
  require(active_fraction >= 0.0 && active_fraction <= 1.0,
          "experiment needs active_fraction in [0, 1]");
  require(sigma > 0.0 && std::isfinite(sigma), "experiment needs sigma > 0");
  require(std::isfinite(signal), "experiment needs a finite signal");
  for (double eta : eta_grid) require(eta > 0.0 && std::isfinite(eta), "eta grid must be positive");
  if (estimate_sigma && n <= d) throw InsufficientSamples("estimated sigma needs n > d");
  alpha_split(alpha, weights);
  switch (selector.kind) {
    case SelectorKind::Fixed:
      require(!selector.fixed_model.empty(), "fixed selector needs a nonempty model");
      ModelSet(selector.fixed_model).check_within(d);
      break;
    case SelectorKind::Screen:
    case SelectorKind::ForwardStepwise:
      require(selector.k >= 1 && selector.k <= d, "selector needs 1 <= k <= d");
      break;
    case SelectorKind::Lasso:
      require(selector.c1.has_value() || selector.lambda.has_value(),
              "LASSO selector needs c1 or lambda");
      if (selector.c1) require(*selector.c1 > 0.0, "LASSO selector needs c1 > 0");
      if (selector.lambda) require(*selector.lambda > 0.0, "LASSO selector needs lambda > 0");
      if (selector.steps) require(*selector.steps >= 1, "LASSO selector needs steps >= 1");
      break;
  }
}

std::vector<double> default_eta_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.5 * i);
  return grid;
}

RngStream trial_stream(const ExperimentConfig& cfg, int trial_index, std::size_t eta_index) {
  const std::uint64_t root = cfg.coupled ? 0 : 1 + static_cast<std::uint64_t>(eta_index);
  return RngStream(cfg.master_seed, {root, static_cast<std::uint64_t>(trial_index)});
}

SyntheticData gen_synthetic(const ExperimentConfig& cfg, int trial_index, std::size_t eta_index) {
  const RngStream stream = trial_stream(cfg, trial_index, eta_index);
  const RngStream design_rng = cfg.regenerate_X_per_trial
                                   ? stream.child(0)
                                   : RngStream(cfg.master_seed, {kSharedDesignPath});
  return make_data(cfg, draw_design(cfg.n, cfg.d, design_rng), stream.child(1));
}

ExperimentConfig resolve_config(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentConfig out = cfg;
  if (cfg.selector.kind != SelectorKind::Lasso || cfg.selector.c1) return out;
  const RngStream pilot(cfg.master_seed, {kPilotPath});
  const SyntheticData data = make_data(cfg, draw_design(cfg.n, cfg.d, pilot.child(0)), pilot.child(1));
  const double c1 = lambda_to_c1(data.x, data.y, *cfg.selector.lambda);
  if (!(c1 > 0.0)) throw InvalidArgument("lambda is at least ||X^T y||_inf on the pilot draw; C1 = 0");
  out.selector.c1 = c1;
  return out;
}

double eta_step_for_total(int k, double delta, double total) {
  require(k >= 1, "eta_step_for_total needs k >= 1");
  require(delta > 0.0 && delta < 1.0, "eta_step_for_total needs delta in (0, 1)");
  require(total >= 0.0, "eta_step_for_total needs total >= 0");
  const double kk = static_cast<double>(k);
  const double b = std::sqrt(2.0 * kk * std::log(1.0 / delta));
  // Positive root of (k/2) x^2 + b x - total, written without cancellation.
  const double advanced = 2.0 * total / (b + std::sqrt(b * b + 2.0 * kk * total));
  return std::max(advanced, total / kk);
}

TrialRecord run_trial(const ExperimentConfig& cfg, double eta, int trial_index,
                      std::size_t eta_index) {
  const SyntheticData data = gen_synthetic(cfg, trial_index, eta_index);
  const double delta_s = alpha_split(cfg.alpha, cfg.weights).selection_delta();
  const RngStream sel_rng = trial_stream(cfg, trial_index, eta_index).child(2);

  TrialRecord rec;
  rec.trial = trial_index;
  rec.eta = eta;
  const Selection sel = select(cfg, data.x, data.y, eta, delta_s, sel_rng);
  rec.model = sel.model;
  rec.fdr = false_discovery(rec.model, data.beta);
  if (sel.theta) {
    const double lambda = cfg.selector.lambda.value_or(0.0);
    const double n = static_cast<double>(data.x.n());
    rec.risk = 0.5 / n * (data.y - data.x.entries() * *sel.theta).squaredNorm() +
               lambda / n * sel.theta->lpNorm<1>();
  }
  score_intervals(rec, cfg, data.x, data.y, data.mu, sel.budgets);
  return rec;
}

TrialRecord data_split_baseline(const ExperimentConfig& cfg, double split_fraction,
                                int trial_index) {
  require(split_fraction > 0.0 && split_fraction < 1.0, "split fraction must be in (0, 1)");
  const SyntheticData data = gen_synthetic(cfg, trial_index);
  const auto n = data.x.n();
  const auto m = static_cast<Eigen::Index>(std::ceil(split_fraction * static_cast<double>(n)));
  require(m >= 1 && m < n, "both halves of the split need at least one row");

  std::vector<Eigen::Index> sel_rows(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> inf_rows(static_cast<std::size_t>(n - m));
  for (Eigen::Index i = 0; i < m; ++i) sel_rows[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = m; i < n; ++i) inf_rows[static_cast<std::size_t>(i - m)] = i;
  {
    std::set<Eigen::Index> seen(sel_rows.begin(), sel_rows.end());
    for (Eigen::Index i : inf_rows) {
      if (!seen.insert(i).second) throw InvalidArgument("selection and inference rows overlap");
    }
  }

  auto pick = [](const Vector& v, const std::vector<Eigen::Index>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
  };
  const DesignMatrix x_sel = data.x.select_rows(sel_rows);
  const DesignMatrix x_inf = data.x.select_rows(inf_rows);

  TrialRecord rec;
  rec.trial = trial_index;
  const Selection sel = select_exact(cfg, x_sel, pick(data.y, sel_rows));
  rec.model = sel.model;
  rec.fdr = false_discovery(rec.model, data.beta);
  score_intervals(rec, cfg, x_inf, pick(data.y, inf_rows), pick(data.mu, inf_rows), sel.budgets);
  return rec;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInput("quantile of an empty sample");
  require(q > 0.0 && q <= 1.0, "quantile level must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q * static_cast<double>(values.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::max(rank, 1.0)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

ExperimentSummary aggregate(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw EmptyInput("aggregate needs at least one record");
  ExperimentSummary s;
  s.eta = records.front().eta;
  std::vector<double> pooled;
  double covered = 0.0, fdr = 0.0, risk = 0.0, k_sum = 0.0, size_sum = 0.0;
  int risk_count = 0, k_count = 0;
  for (const TrialRecord& r : records) {
    if (r.flagged) {
      ++s.flagged;
      continue;
    }
    ++s.trials;
    if (r.model.empty()) ++s.empty_models;
    if (r.covered) covered += 1.0;
    fdr += r.fdr;
    size_sum += static_cast<double>(r.model.size());
    if (r.risk) {
      risk += *r.risk;
      ++risk_count;
    }
    if (!r.model.empty()) {
      k_sum += r.K;
      ++k_count;
    }
    for (Eigen::Index j = 0; j < r.widths.size(); ++j) pooled.push_back(r.widths[j]);
  }
  if (s.trials == 0) throw EmptyInput("every record is flagged");
  const double t = s.trials;
  s.empirical_coverage = covered / t;
  s.mean_fdr = fdr / t;
  s.mean_model_size = size_sum / t;
  s.mean_K = k_count > 0 ? k_sum / k_count : kNaN;
  if (risk_count > 0) s.mean_risk = risk / risk_count;
  for (double q : {0.80, 0.85, 0.90, 1.00}) {
    s.width_quantiles[q] = pooled.empty() ? kNaN : nearest_rank_quantile(pooled, q);
  }
  s.width_max = s.width_quantiles[1.00];
  return s;
}

std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, double eta,
                                    std::size_t eta_index, int workers) {
  cfg.validate();
  const int count = std::max(1, std::min(workers, cfg.trials));
  std::vector<TrialRecord> out(static_cast<std::size_t>(cfg.trials));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.trials));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < cfg.trials; t = next++) {
      try {
        out[static_cast<std::size_t>(t)] = run_trial(cfg, eta, t, eta_index);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  if (count == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<SweepPoint> eta_sweep(const ExperimentConfig& cfg, const std::vector<double>& eta_grid,
                                  int workers) {
  require(!eta_grid.empty(), "eta sweep needs a nonempty grid");
  for (double eta : eta_grid) require(eta > 0.0 && std::isfinite(eta), "eta grid must be positive");
  const ExperimentConfig resolved = resolve_config(cfg);
  std::vector<SweepPoint> out;
  out.reserve(eta_grid.size());
  for (std::size_t i = 0; i < eta_grid.size(); ++i) {
    SweepPoint p;
    p.eta = eta_grid[i];
    p.records = run_trials(resolved, p.eta, i, workers);
    p.summary = aggregate(p.records);
    p.summary.eta = p.eta;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace stabposi
