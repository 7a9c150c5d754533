#pragma once

// Laplace noise and the per-algorithm noise scales that make each selection
// step eta-indistinguishable on typical input pairs.

#include "stabposi/linmodel.hpp"
#include "stabposi/orlicz.hpp"
#include "stabposi/rng.hpp"
#include "stabposi/stability.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <variant>

namespace stabposi {

/// -b sign(u) log(1 - 2|u|) for u in (-1/2, 1/2): the inverse Laplace CDF.
double laplace_from_uniform(double b, double u);

/// One zero-mean Laplace(b) draw, consuming exactly one uniform.
double laplace_sample(double b, RngStream& rng);

/// y - mu is sigma-subgaussian along every unit direction.
struct Subgaussian {
  double sigma = 1.0;
};

/// ||y - mu||_psi <= G for a registered Orlicz function psi.
struct OrliczTail {
  OrliczFunction psi;
  double G = 1.0;
};

/// Tail assumption on the noise plus the per-step stability target.
struct NoisePolicy {
  std::variant<Subgaussian, OrliczTail> family = Subgaussian{};
  double delta = 0.05;
  double eta_step = 1.0;

  void validate() const;
  bool is_subgaussian() const { return std::holds_alternative<Subgaussian>(family); }
};

NoisePolicy subgaussian_policy(double sigma, double delta, double eta_step);
NoisePolicy orlicz_policy(OrliczFunction psi, double G, double delta, double eta_step);

/// Stable LASSO: 8 sqrt(log(4d/delta)) C1 ||X||_{2,inf} sigma / (n eta), or
/// 4 psi^{-1}(1/delta) C1 ||X||_{2,inf} G / (n eta).
double scale_lasso(std::int64_t d, double c1, const DesignMatrix& x, const NoisePolicy& policy);

/// Stable marginal screening: 4 sqrt(log(2d/delta)) ||X||_{2,inf} sigma / (n eta),
/// or 2 psi^{-1}(1/delta) ||X||_{2,inf} G / (n eta).
double scale_screening(std::int64_t d, const DesignMatrix& x, const NoisePolicy& policy);

/// Stable forward stepwise: 4 sqrt(log(2 (d)_k / delta)) sigma / eta, or
/// 2 psi^{-1}(1/delta) G / eta. Independent of n.
double scale_forward_stepwise(std::int64_t d, std::int64_t k, const NoisePolicy& policy);

struct DescendingFactorial {
  boost::multiprecision::cpp_int exact;
  double log = 0.0;  // sum_{i<k} log(d - i)
};

/// (d)_k = d (d-1) ... (d-k+1).
DescendingFactorial descending_factorial(std::int64_t d, std::int64_t k);

struct StableLinearOutput {
  double value = 0.0;
  double scale = 0.0;
  StabilityBudget budget;
};

/// Laplace scale Phi^{-1}(1 - nu/2) sqrt(2) sigma ||w||_2 / eta.
double stable_linear_functional_scale(const Vector& w, double sigma, double eta, double nu);

/// w^T y + Laplace noise; certified (eta, 0, nu) under y ~ N(mu, sigma^2 I).
StableLinearOutput stable_linear_functional(const Vector& w, const Vector& y, double sigma,
                                            double eta, double nu, RngStream& rng);

}  // namespace stabposi
