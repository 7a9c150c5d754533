#pragma once

// Normal and Student-t quantiles, including log-space upper-tail variants for
// levels far below the smallest positive double (large stability budgets push
// the corrected level to e^{-eta} with eta in the thousands).

namespace stabposi {

/// Phi^{-1}(p) for 0 < p < 1. Rational approximation plus one Halley step.
double normal_quantile(double p);

/// log P(Z > x) for standard normal Z, accurate in the far tail.
double normal_log_survival(double x);

/// The x with P(Z > x) = exp(log_p), for log_p <= log(1/2).
double normal_upper_quantile_log(double log_p);

/// log P(T_r > t) for Student t with r degrees of freedom.
double t_log_survival(double t, int dof);

/// t_{r, p}: inverse of the Student-t CDF with r >= 1 degrees of freedom.
double t_quantile(double p, int dof);

/// The t with P(T_r > t) = exp(log_p), for log_p <= log(1/2). May be +inf when
/// the quantile overflows a double (tiny dof and astronomically small levels).
double t_upper_quantile_log(double log_p, int dof);

/// log of the regularized incomplete beta function I_x(a, b).
double log_incomplete_beta(double a, double b, double x);

}  // namespace stabposi
