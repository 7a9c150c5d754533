#include "stabposi/selectors.hpp"

#include "stabposi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace stabposi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCollinearTol = 1e-10;

void check_response(const DesignMatrix& x, const Vector& y) {
  if (y.size() != x.n()) {
    throw DimensionMismatch("response has length " + std::to_string(y.size()) +
                            ", expected n = " + std::to_string(x.n()));
  }
}

void check_k(const DesignMatrix& x, int k) {
  require(k >= 1 && k <= x.d(), "selector needs 1 <= k <= d");
}

struct FrankWolfeRun {
  Vector theta;
  std::vector<StepRecord> trace;
};

// Frank-Wolfe over the vertices +-c1 e_i with optional Laplace noise on the
// linearized scores. scale == 0 draws nothing, which makes the noiseless and
// zero-noise paths the same arithmetic.
FrankWolfeRun frank_wolfe(const DesignMatrix& x, const Vector& y, double c1, int steps,
                          double scale, const RngStream* rng) {
  check_response(x, y);
  require(c1 > 0.0, "LASSO needs C1 > 0");
  require(steps >= 1, "LASSO needs at least one step");
  const Eigen::Index n = x.n();
  const Eigen::Index d = x.d();
  const double factor = -2.0 / static_cast<double>(n) * c1;

  FrankWolfeRun run;
  run.theta = Vector::Zero(d);
  run.trace.reserve(static_cast<std::size_t>(steps));
  Vector fitted = Vector::Zero(n);
  Vector grad(d);

  for (int t = 1; t <= steps; ++t) {
    grad.noalias() = x.entries().transpose() * (y - fitted);
    std::optional<RngStream> step_rng;
    if (scale > 0.0) step_rng = rng->child(static_cast<std::uint64_t>(t));

    StepRecord rec;
    rec.step = t;
    double best = kInf;
    double best_clean = kInf;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (int sign : {1, -1}) {
        const double clean = factor * sign * grad[i];
        double noisy = clean;
        if (step_rng) noisy += laplace_sample(scale, *step_rng);
        if (noisy < best) {
          best = noisy;
          rec.index = static_cast<std::size_t>(i);
          rec.sign = sign;
          rec.clean_score = clean;
          rec.noisy_score = noisy;
        }
        best_clean = std::min(best_clean, clean);
      }
    }
    rec.best_clean_score = best_clean;

    const double step = 2.0 / (t + 1.0);
    const double vertex = rec.sign * c1;
    const auto i = static_cast<Eigen::Index>(rec.index);
    run.theta *= (1.0 - step);
    run.theta[i] += step * vertex;
    fitted *= (1.0 - step);
    fitted.noalias() += (step * vertex) * x.col(i);
    run.trace.push_back(rec);
  }
  return run;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double penalized_duality_gap(const DesignMatrix& x, const Vector& y, const Vector& theta,
                             const Vector& residual, double lambda) {
  const double primal = 0.5 * residual.squaredNorm() + lambda * theta.lpNorm<1>();
  const double corr = (x.entries().transpose() * residual).lpNorm<Eigen::Infinity>();
  const double s = corr > lambda ? lambda / corr : 1.0;
  const Vector u = s * residual;
  const double dual = 0.5 * y.squaredNorm() - 0.5 * (y - u).squaredNorm();
  return primal - dual;
}

// Residual X_j components orthogonal to the selected span, kept incrementally.
struct StepwiseState {
  IncrementalProjector projector;
  Matrix z;  // n x d, column j = P^perp X_j
  Vector r;  // P^perp y
  std::vector<bool> selected;

  StepwiseState(const DesignMatrix& x, const Vector& y)
      : projector(x.n()), z(x.entries()), r(y), selected(static_cast<std::size_t>(x.d()), false) {}

  bool eligible(const DesignMatrix& x, Eigen::Index j, double znorm) const {
    return !selected[static_cast<std::size_t>(j)] && znorm > kCollinearTol * x.col_norms()[j];
  }

  void add(const DesignMatrix& x, std::size_t i) {
    selected[i] = true;
    if (!projector.append(x.col(static_cast<Eigen::Index>(i)), kCollinearTol)) {
      throw AllCandidatesCollinear("selected column is collinear with the current model");
    }
    const auto q = projector.basis().col(projector.basis().cols() - 1);
    z.noalias() -= q * (q.transpose() * z);
    r -= q * q.dot(r);
  }
};

}  // namespace

std::vector<StabilityBudget> certify_budgets(int k, double eta_step, double delta) {
  require(k >= 1, "certify_budgets needs k >= 1");
  require(eta_step >= 0.0, "certify_budgets needs eta_step >= 0");
  require(delta > 0.0 && delta < 1.0, "certify_budgets needs 0 < delta < 1");
  const double advanced = compose_adaptive_advanced(eta_step, k, delta);
  const auto simple = compose_adaptive_simple(eta_step, 0.0, k);
  return {{advanced, delta, delta}, {simple.eta, 0.0, delta}};
}

double lasso_loss(const DesignMatrix& x, const Vector& y, const Vector& theta) {
  check_response(x, y);
  if (theta.size() != x.d()) throw DimensionMismatch("theta has the wrong length");
  return (y - x.entries() * theta).squaredNorm() / static_cast<double>(x.n());
}

Vector lasso_exact_fw(const DesignMatrix& x, const Vector& y, double c1, int steps) {
  return frank_wolfe(x, y, c1, steps, 0.0, nullptr).theta;
}

int default_lasso_steps(const DesignMatrix& x, double c1, const NoisePolicy& policy, int cap) {
  policy.validate();
  require(c1 > 0.0, "default_lasso_steps needs C1 > 0");
  const double spread = policy.is_subgaussian() ? std::get<Subgaussian>(policy.family).sigma
                                                : std::get<OrliczTail>(policy.family).G;
  const double raw = static_cast<double>(x.n()) * x.linf_norm() * x.linf_norm() * c1 *
                     policy.eta_step / (spread * x.l2inf_norm());
  const double k = std::ceil(raw);
  if (!(k >= 1.0)) return 1;
  return k > cap ? cap : static_cast<int>(k);
}

SelectionResult stable_lasso(const DesignMatrix& x, const Vector& y, const LassoConfig& cfg,
                             const RngStream& rng) {
  cfg.policy.validate();
  const double scale = cfg.noise_scale_override ? *cfg.noise_scale_override
                                                : scale_lasso(x.d(), cfg.c1, x, cfg.policy);
  require(scale >= 0.0, "noise scale must be nonnegative");
  auto run = frank_wolfe(x, y, cfg.c1, cfg.steps, scale, &rng);

  SelectionResult out;
  out.model = support(run.theta);
  out.order = out.model.indices();
  out.theta = std::move(run.theta);
  out.trace = std::move(run.trace);
  out.budgets = certify_budgets(cfg.steps, cfg.policy.eta_step, cfg.policy.delta);
  out.noise_scale = scale;
  out.steps = cfg.steps;
  return out;
}

ModelSet support(const Vector& theta, double threshold) {
  require(threshold >= 0.0, "support threshold must be nonnegative");
  std::vector<std::size_t> idx;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (std::fabs(theta[j]) > threshold) idx.push_back(static_cast<std::size_t>(j));
  }
  return ModelSet(std::move(idx));
}

PenalizedLassoFit lasso_penalized_cd(const DesignMatrix& x, const Vector& y, double lambda,
                                     double tol, int max_sweeps, const Vector* warm_start) {
  check_response(x, y);
  require(lambda > 0.0, "penalized LASSO needs lambda > 0");
  require(tol > 0.0, "penalized LASSO needs tol > 0");
  const Eigen::Index d = x.d();
  PenalizedLassoFit fit;
  fit.theta = warm_start ? *warm_start : Vector::Zero(d);
  if (fit.theta.size() != d) throw DimensionMismatch("warm start has the wrong length");
  Vector residual = y - x.entries() * fit.theta;
  const double target = tol * std::max(1.0, 0.5 * y.squaredNorm());
  const Vector sq = x.col_norms().cwiseAbs2();

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (sq[j] == 0.0) continue;
      const double old = fit.theta[j];
      const double z = x.col(j).dot(residual) + sq[j] * old;
      const double next = soft_threshold(z, lambda) / sq[j];
      if (next != old) {
        residual.noalias() -= (next - old) * x.col(j);
        fit.theta[j] = next;
      }
    }
    fit.sweeps = sweep;
    // Refresh the residual now and then to stop drift from the rank-1 updates.
    if (sweep % 64 == 0) residual = y - x.entries() * fit.theta;
    fit.duality_gap = penalized_duality_gap(x, y, fit.theta, residual, lambda);
    if (fit.duality_gap <= target) return fit;
  }
  throw NonConvergence("coordinate descent did not reach duality gap " + std::to_string(target) +
                       " within " + std::to_string(max_sweeps) + " sweeps");
}

double lambda_to_c1(const DesignMatrix& x, const Vector& y, double lambda, double tol) {
  check_response(x, y);
  require(lambda > 0.0, "lambda_to_c1 needs lambda > 0");
  const double max_corr = (x.entries().transpose() * y).lpNorm<Eigen::Infinity>();
  if (lambda >= max_corr) return 0.0;
  return lasso_penalized_cd(x, y, lambda, tol).theta.lpNorm<1>();
}

Vector marginal_correlations(const DesignMatrix& x, const Vector& y) {
  check_response(x, y);
  return x.entries().transpose() * y / static_cast<double>(x.n());
}

std::vector<std::size_t> screening_exact_order(const DesignMatrix& x, const Vector& y, int k) {
  check_k(x, k);
  const Vector c = marginal_correlations(x, y).cwiseAbs();
  std::vector<std::size_t> idx(static_cast<std::size_t>(x.d()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return c[static_cast<Eigen::Index>(a)] > c[static_cast<Eigen::Index>(b)];
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

ModelSet screening_exact(const DesignMatrix& x, const Vector& y, int k) {
  return ModelSet(screening_exact_order(x, y, k));
}

SelectionResult stable_screening(const DesignMatrix& x, const Vector& y, const GreedyConfig& cfg,
                                 const RngStream& rng) {
  check_k(x, cfg.k);
  cfg.policy.validate();
  const double scale =
      cfg.noise_scale_override ? *cfg.noise_scale_override : scale_screening(x.d(), x, cfg.policy);
  require(scale >= 0.0, "noise scale must be nonnegative");
  const Vector c = marginal_correlations(x, y);

  SelectionResult out;
  std::vector<bool> taken(static_cast<std::size_t>(x.d()), false);
  for (int t = 1; t <= cfg.k; ++t) {
    RngStream step_rng = rng.child(static_cast<std::uint64_t>(t));
    StepRecord rec;
    rec.step = t;
    double best = -kInf;
    double best_clean = -kInf;
    for (Eigen::Index i = 0; i < x.d(); ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double noise = scale > 0.0 ? laplace_sample(scale, step_rng) : 0.0;
      const double noisy = std::fabs(c[i] + noise);
      if (noisy > best) {
        best = noisy;
        rec.index = static_cast<std::size_t>(i);
        rec.noisy_score = noisy;
        rec.clean_score = std::fabs(c[i]);
      }
      best_clean = std::max(best_clean, std::fabs(c[i]));
    }
    rec.best_clean_score = best_clean;
    taken[rec.index] = true;
    out.order.push_back(rec.index);
    out.trace.push_back(rec);
  }
  out.model = ModelSet(out.order);
  out.budgets = certify_budgets(cfg.k, cfg.policy.eta_step, cfg.policy.delta);
  out.noise_scale = scale;
  out.steps = cfg.k;
  return out;
}

std::vector<std::size_t> fs_exact_order(const DesignMatrix& x, const Vector& y, int k,
                                        StepwiseCriterion criterion) {
  check_response(x, y);
  check_k(x, k);
  std::vector<std::size_t> order;

  if (criterion == StepwiseCriterion::NormalizedCorrelation) {
    StepwiseState state(x, y);
    for (int t = 1; t <= k; ++t) {
      const Vector znorm = state.z.colwise().norm().transpose();
      double best = -kInf;
      std::optional<std::size_t> chosen;
      for (Eigen::Index j = 0; j < x.d(); ++j) {
        if (!state.eligible(x, j, znorm[j])) continue;
        const double score = std::fabs(state.z.col(j).dot(state.r)) / znorm[j];
        if (score > best) {
          best = score;
          chosen = static_cast<std::size_t>(j);
        }
      }
      if (!chosen) throw AllCandidatesCollinear("every remaining candidate is collinear");
      state.add(x, *chosen);
      order.push_back(*chosen);
    }
    return order;
  }

  ModelSet model;
  for (int t = 1; t <= k; ++t) {
    SubmodelQR current(x, model);
    double best = kInf;
    std::optional<std::size_t> chosen;
    for (Eigen::Index j = 0; j < x.d(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (model.contains(ju)) continue;
      const double rnorm = current.residual(x.col(j)).norm();
      if (!(rnorm > kCollinearTol * x.col_norms()[j])) continue;
      double rss;
      try {
        rss = SubmodelQR(x, model.with(ju)).residual(y).squaredNorm();
      } catch (const RankDeficient&) {
        continue;
      }
      if (rss < best) {
        best = rss;
        chosen = ju;
      }
    }
    if (!chosen) throw AllCandidatesCollinear("every remaining candidate is collinear");
    model = model.with(*chosen);
    order.push_back(*chosen);
  }
  return order;
}

ModelSet fs_exact(const DesignMatrix& x, const Vector& y, int k, StepwiseCriterion criterion) {
  return ModelSet(fs_exact_order(x, y, k, criterion));
}

SelectionResult stable_fs(const DesignMatrix& x, const Vector& y, const GreedyConfig& cfg,
                          const RngStream& rng) {
  check_response(x, y);
  check_k(x, cfg.k);
  cfg.policy.validate();
  const double scale = cfg.noise_scale_override
                           ? *cfg.noise_scale_override
                           : scale_forward_stepwise(x.d(), cfg.k, cfg.policy);
  require(scale >= 0.0, "noise scale must be nonnegative");

  SelectionResult out;
  StepwiseState state(x, y);
  for (int t = 1; t <= cfg.k; ++t) {
    RngStream step_rng = rng.child(static_cast<std::uint64_t>(t));
    const Vector znorm = state.z.colwise().norm().transpose();
    StepRecord rec;
    rec.step = t;
    double best = -kInf;
    double best_clean = -kInf;
    bool any = false;
    for (Eigen::Index j = 0; j < x.d(); ++j) {
      // Collinear candidates are dropped before any noise is drawn.
      if (!state.eligible(x, j, znorm[j])) continue;
      any = true;
      const double score = state.z.col(j).dot(state.r) / znorm[j];
      const double noise = scale > 0.0 ? laplace_sample(scale, step_rng) : 0.0;
      const double noisy = std::fabs(score + noise);
      if (noisy > best) {
        best = noisy;
        rec.index = static_cast<std::size_t>(j);
        rec.noisy_score = noisy;
        rec.clean_score = std::fabs(score);
      }
      best_clean = std::max(best_clean, std::fabs(score));
    }
    if (!any) throw AllCandidatesCollinear("every remaining candidate is collinear");
    rec.best_clean_score = best_clean;
    state.add(x, rec.index);
    out.order.push_back(rec.index);
    out.trace.push_back(rec);
  }
  out.model = ModelSet(out.order);
  out.budgets = certify_budgets(cfg.k, cfg.policy.eta_step, cfg.policy.delta);
  out.noise_scale = scale;
  out.steps = cfg.k;
  return out;
}

}  // namespace stabposi
