#include "stabposi/noise.hpp"

#include "stabposi/errors.hpp"
#include "stabposi/quantiles.hpp"

#include <cmath>
#include <numbers>

namespace stabposi {

double laplace_from_uniform(double b, double u) {
  require(b > 0.0, "Laplace scale must be positive");
  require(u > -0.5 && u < 0.5, "Laplace inverse CDF needs u in (-1/2, 1/2)");
  if (u == 0.0) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return -b * sign * std::log1p(-2.0 * std::fabs(u));
}

double laplace_sample(double b, RngStream& rng) { return laplace_from_uniform(b, rng.uniform_centered()); }

void NoisePolicy::validate() const {
  require(delta > 0.0 && delta < 1.0, "noise policy needs 0 < delta < 1");
  require(eta_step > 0.0 && std::isfinite(eta_step), "noise policy needs eta_step > 0");
  if (const auto* sg = std::get_if<Subgaussian>(&family)) {
    require(sg->sigma > 0.0, "subgaussian policy needs sigma > 0");
  } else {
    require(std::get<OrliczTail>(family).G > 0.0, "Orlicz policy needs G > 0");
  }
}

NoisePolicy subgaussian_policy(double sigma, double delta, double eta_step) {
  NoisePolicy p{Subgaussian{sigma}, delta, eta_step};
  p.validate();
  return p;
}

NoisePolicy orlicz_policy(OrliczFunction psi, double G, double delta, double eta_step) {
  NoisePolicy p{OrliczTail{std::move(psi), G}, delta, eta_step};
  p.validate();
  return p;
}

namespace {

// Tail width of the typical set: the subgaussian branch takes
// sqrt(log(count / delta)) given log(count); the Orlicz branch ignores count.
struct TailFactor {
  double coefficient;  // 8/4/4 subgaussian, 4/2/2 Orlicz
  double width;        // sqrt(log(...)) sigma, or psi^{-1}(1/delta) G
};

TailFactor tail_factor(const NoisePolicy& policy, double log_count, double sg_coef,
                       double orlicz_coef) {
  policy.validate();
  if (const auto* sg = std::get_if<Subgaussian>(&policy.family)) {
    const double arg = log_count - std::log(policy.delta);
    require(arg > 0.0, "noise scale needs log(count/delta) > 0");
    return {sg_coef, std::sqrt(arg) * sg->sigma};
  }
  const auto& orl = std::get<OrliczTail>(policy.family);
  return {orlicz_coef, orl.psi.inverse_from_log(-std::log(policy.delta)) * orl.G};
}

}  // namespace

double scale_lasso(std::int64_t d, double c1, const DesignMatrix& x, const NoisePolicy& policy) {
  require(d >= 1, "scale_lasso needs d >= 1");
  require(c1 > 0.0, "scale_lasso needs C1 > 0");
  const auto tf = tail_factor(policy, std::log(4.0 * static_cast<double>(d)), 8.0, 4.0);
  return tf.coefficient * tf.width * c1 * x.l2inf_norm() /
         (static_cast<double>(x.n()) * policy.eta_step);
}

double scale_screening(std::int64_t d, const DesignMatrix& x, const NoisePolicy& policy) {
  require(d >= 1, "scale_screening needs d >= 1");
  const auto tf = tail_factor(policy, std::log(2.0 * static_cast<double>(d)), 4.0, 2.0);
  return tf.coefficient * tf.width * x.l2inf_norm() /
         (static_cast<double>(x.n()) * policy.eta_step);
}

double scale_forward_stepwise(std::int64_t d, std::int64_t k, const NoisePolicy& policy) {
  require(k >= 1 && k <= d, "scale_forward_stepwise needs 1 <= k <= d");
  const double log_df = descending_factorial(d, k).log;
  const auto tf = tail_factor(policy, std::numbers::ln2 + log_df, 4.0, 2.0);
  return tf.coefficient * tf.width / policy.eta_step;
}

DescendingFactorial descending_factorial(std::int64_t d, std::int64_t k) {
  require(k >= 0 && k <= d, "descending factorial needs 0 <= k <= d");
  DescendingFactorial out;
  out.exact = 1;
  for (std::int64_t i = 0; i < k; ++i) {
    out.exact *= static_cast<std::uint64_t>(d - i);
    out.log += std::log(static_cast<double>(d - i));
  }
  return out;
}

double stable_linear_functional_scale(const Vector& w, double sigma, double eta, double nu) {
  require(eta > 0.0, "stable linear functional needs eta > 0");
  require(nu > 0.0 && nu < 1.0, "stable linear functional needs 0 < nu < 1");
  require(sigma > 0.0, "stable linear functional needs sigma > 0");
  return normal_quantile(1.0 - nu / 2.0) * std::numbers::sqrt2 * sigma * w.norm() / eta;
}

StableLinearOutput stable_linear_functional(const Vector& w, const Vector& y, double sigma,
                                            double eta, double nu, RngStream& rng) {
  if (w.size() != y.size()) throw DimensionMismatch("w and y must have the same length");
  StableLinearOutput out;
  out.scale = stable_linear_functional_scale(w, sigma, eta, nu);
  out.budget = {eta, 0.0, nu};
  // A zero weight vector gives a zero scale; the draw is still consumed.
  const double u = rng.uniform_centered();
  out.value = w.dot(y) + (out.scale > 0.0 ? laplace_from_uniform(out.scale, u) : 0.0);
  return out;
}

}  // namespace stabposi
