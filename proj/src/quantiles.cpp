#include "stabposi/quantiles.hpp"

#include "stabposi/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace stabposi {

namespace {

constexpr double kLogHalf = -std::numbers::ln2;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Acklam's rational approximation to the normal quantile, |rel err| < 1.15e-9.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  constexpr double hi = 1.0 - lo;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= hi) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NonConvergence("incomplete beta continued fraction did not converge");
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// log(1 - e^v) for v < 0.
double log1m_exp(double v) {
  return v > -std::numbers::ln2 ? std::log(-std::expm1(v)) : std::log1p(-std::exp(v));
}

double log_t_pdf(double t, int dof) {
  const double r = dof;
  return std::lgamma(0.5 * (r + 1.0)) - std::lgamma(0.5 * r) -
         0.5 * std::log(r * std::numbers::pi) - 0.5 * (r + 1.0) * std::log1p(t * t / r);
}

}  // namespace

double normal_log_survival(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  // Asymptotic expansion of Mills' ratio.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
  return log_normal_pdf(x) - std::log(x) + std::log(series);
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile needs 0 < p < 1");
  if (p == 0.5) return 0.0;
  double x = acklam(p);
  // One Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double normal_upper_quantile_log(double log_p) {
  require(log_p <= kLogHalf + 1e-15 && !std::isnan(log_p),
          "normal_upper_quantile_log needs log_p <= log(1/2)");
  if (log_p == -std::numeric_limits<double>::infinity()) {
    return std::numeric_limits<double>::infinity();
  }
  if (log_p > -600.0) {
    const double p = std::exp(log_p);
    return -normal_quantile(p);
  }
  const double big = -log_p;
  double x = std::sqrt(2.0 * big - std::log(4.0 * std::numbers::pi * big));
  for (int it = 0; it < 100; ++it) {
    const double f = normal_log_survival(x) - log_p;
    const double hazard = std::exp(log_normal_pdf(x) - normal_log_survival(x));
    const double step = f / hazard;
    x += step;
    if (std::fabs(step) <= 1e-15 * x) break;
  }
  return x;
}

double log_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, "incomplete beta needs 0 <= x <= 1");
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (x == 1.0) return 0.0;
  const bool direct = x < (a + 1.0) / (a + b + 2.0);
  if (direct) {
    const double front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b) - std::log(a);
    return front + std::log(beta_continued_fraction(a, b, x));
  }
  const double front = b * std::log1p(-x) + a * std::log(x) - log_beta(a, b) - std::log(b);
  const double other = front + std::log(beta_continued_fraction(b, a, 1.0 - x));
  return log1m_exp(other);
}

double t_log_survival(double t, int dof) {
  require(dof >= 1, "t distribution needs dof >= 1");
  const double r = dof;
  if (t == 0.0) return kLogHalf;
  // P(T > |t|) = I_{r/(r+t^2)}(r/2, 1/2) / 2; computed stably for large t.
  const double at = std::fabs(t);
  const double x = at > 1e150 ? 0.0 : r / (r + at * at);
  double upper;
  if (x == 0.0) {
    // Leading-order tail when t^2 overflows: I_x ~ x^{r/2} / ((r/2) B(r/2, 1/2)).
    upper = kLogHalf + 0.5 * r * (std::log(r) - 2.0 * std::log(at)) - std::log(0.5 * r) -
            log_beta(0.5 * r, 0.5);
  } else {
    upper = kLogHalf + log_incomplete_beta(0.5 * r, 0.5, x);
  }
  if (t > 0) return upper;
  return log1m_exp(upper);
}

double t_upper_quantile_log(double log_p, int dof) {
  require(dof >= 1, "t distribution needs dof >= 1");
  require(log_p <= kLogHalf + 1e-15 && !std::isnan(log_p),
          "t_upper_quantile_log needs log_p <= log(1/2)");
  if (log_p >= kLogHalf) return 0.0;
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (log_p == -inf) return inf;

  // Bracket: survival is decreasing in t.
  double lo = 0.0;
  double hi = std::max(1.0, normal_upper_quantile_log(log_p));
  while (t_log_survival(hi, dof) > log_p) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi) || hi > 1e300) return inf;
  }
  // Safeguarded Newton on g(t) = log S(t) - log_p, g'(t) = -pdf/S.
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    const double ls = t_log_survival(t, dof);
    const double g = ls - log_p;
    if (g > 0) {
      lo = t;
    } else {
      hi = t;
    }
    const double slope = -std::exp(log_t_pdf(t, dof) - ls);
    double next = t - g / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - t) <= 1e-15 * std::max(1.0, t) || hi - lo <= 1e-15 * hi) {
      return next;
    }
    t = next;
  }
  return t;
}

double t_quantile(double p, int dof) {
  require(p > 0.0 && p < 1.0, "t_quantile needs 0 < p < 1");
  require(dof >= 1, "t_quantile needs dof >= 1");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return t_upper_quantile_log(std::log1p(-p), dof);
  return -t_upper_quantile_log(std::log(p), dof);
}

}  // namespace stabposi
