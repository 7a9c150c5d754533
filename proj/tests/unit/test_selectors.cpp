#include <doctest.h>

#include "helpers.hpp"
#include "lasso_oracle.hpp"
#include "stabposi/errors.hpp"
#include "stabposi/selectors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

using namespace stabposi;

namespace {

double lap_pdf(double x, double b) { return std::exp(-std::abs(x) / b) / (2 * b); }
double lap_cdf(double x, double b) {
  return x < 0 ? 0.5 * std::exp(x / b) : 1 - 0.5 * std::exp(-x / b);
}

// Piecewise Gauss-Kronrod between the kinks of the integrand.
template <typename F>
double integrate(F f, std::vector<double> knots) {
  std::sort(knots.begin(), knots.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i + 1] > knots[i]) {
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, knots[i],
                                                                            knots[i + 1], 15, 1e-13);
    }
  }
  return total;
}

// P(argmin_v s_v + Lap(b) = v).
std::vector<double> noisy_argmin_law(const std::vector<double>& s, double b) {
  std::vector<double> knots{*std::min_element(s.begin(), s.end()) - 60 * b,
                            *std::max_element(s.begin(), s.end()) + 60 * b};
  knots.insert(knots.end(), s.begin(), s.end());
  std::vector<double> p;
  for (std::size_t v = 0; v < s.size(); ++v) {
    p.push_back(integrate(
        [&](double x) {
          double r = lap_pdf(x - s[v], b);
          for (std::size_t u = 0; u < s.size(); ++u)
            if (u != v) r *= 1 - lap_cdf(x - s[u], b);
          return r;
        },
        knots));
  }
  return p;
}

// P(argmax_i |c_i + Lap(b)| = i).
std::vector<double> noisy_abs_argmax_law(const std::vector<double>& c, double b) {
  double top = 0;
  std::vector<double> knots{0.0};
  for (double v : c) {
    top = std::max(top, std::abs(v));
    knots.push_back(std::abs(v));
  }
  knots.push_back(top + 60 * b);
  std::vector<double> p;
  for (std::size_t i = 0; i < c.size(); ++i) {
    p.push_back(integrate(
        [&](double x) {
          double r = lap_pdf(x - c[i], b) + lap_pdf(-x - c[i], b);
          for (std::size_t j = 0; j < c.size(); ++j)
            if (j != i) r *= lap_cdf(x - c[j], b) - lap_cdf(-x - c[j], b);
          return r;
        },
        knots));
  }
  return p;
}

NoisePolicy policy(double eta = 1.0, double delta = 0.05) {
  return subgaussian_policy(1.0, delta, eta);
}

}  // namespace

TEST_CASE("certified budgets") {
  auto b = certify_budgets(10, 0.1, 0.05);
  REQUIRE(b.size() == 2);
  CHECK(std::abs(b[0].eta - 0.82404551204098987) < 1e-12);
  CHECK(b[0].tau == 0.05);
  CHECK(b[0].nu == 0.05);
  CHECK(b[1].eta == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b[1].tau == 0.0);
  CHECK(b[1].nu == 0.05);
  b = certify_budgets(5, 0.2, 0.05);
  CHECK(std::abs(b[0].eta - 1.1946656610223947) < 1e-12);
  CHECK(b[1].eta == doctest::Approx(1.0).epsilon(1e-15));
  b = certify_budgets(1, 0.4, 0.01);
  CHECK(b[0].eta == doctest::Approx(0.08 + std::sqrt(2 * std::log(100.0)) * 0.4).epsilon(1e-15));
  CHECK(b[1].eta == 0.4);
  b = certify_budgets(3, 0.0, 0.1);
  CHECK(b[0] == StabilityBudget{0, 0.1, 0.1});
  CHECK(b[1] == StabilityBudget{0, 0, 0.1});
}

TEST_CASE("frank-wolfe on tiny problems") {
  SUBCASE("zero response") {
    std::mt19937_64 gen(1);
    DesignMatrix x(testutil::gaussian_matrix(10, 4, gen));
    const Vector y = Vector::Zero(10);
    for (int k : {1, 5, 40}) {
      const Vector th = lasso_exact_fw(x, y, 1.0, k);
      CHECK(lasso_loss(x, y, th) <= 8 * std::pow(x.linf_norm(), 2) / (k + 2));
    }
  }
  SUBCASE("scalar boundary optimum") {
    DesignMatrix x(Matrix::Ones(1, 1));
    Vector y(1);
    y << 3;
    CHECK(lasso_exact_fw(x, y, 1.0, 1)[0] == 1.0);
    CHECK(lasso_exact_fw(x, y, 1.0, 25)[0] == 1.0);
  }
  SUBCASE("orthonormal design approaches the OLS solution") {
    DesignMatrix x(Matrix::Identity(3, 3));
    Vector y(3);
    y << 1, -2, 0.5;
    const double c1 = 4.0;  // OLS is feasible
    for (int k : {10, 100, 1000}) {
      const Vector th = lasso_exact_fw(x, y, c1, k);
      const double gap = lasso_loss(x, y, th) - lasso_loss(x, y, y);
      CHECK(gap >= -1e-15);
      CHECK(gap <= 8 * c1 * c1 / (k + 2));
      CHECK(th.lpNorm<1>() <= c1 * (1 + 1e-12));
    }
    CHECK((lasso_exact_fw(x, y, c1, 4000) - y).norm() < 0.1);
  }
}

TEST_CASE("frank-wolfe gap against the penalized reference") {
  std::mt19937_64 gen(77);
  DesignMatrix x(testutil::gaussian_matrix(50, 20, gen));
  const Vector y = testutil::gaussian_vector(50, gen, 2.0);
  const double best = testutil::constrained_lasso_min_loss(x, y, 1.0);
  const double bound_c = 8 * x.linf_norm() * x.linf_norm();
  for (int k : {1, 2, 10, 50, 200}) {
    const double gap = lasso_loss(x, y, lasso_exact_fw(x, y, 1.0, k)) - best;
    CAPTURE(k);
    CHECK(gap >= -1e-9);
    CHECK(gap <= bound_c / (k + 2));
  }
}

TEST_CASE("penalized lasso and lambda translation") {
  DesignMatrix one(Matrix::Ones(1, 1));
  Vector y(1);
  y << 3;
  CHECK(lambda_to_c1(one, y, 1.0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(lambda_to_c1(one, y, 3.0) == 0.0);
  CHECK(lambda_to_c1(one, y, 10.0) == 0.0);

  std::mt19937_64 gen(4);
  const Matrix sq = testutil::gaussian_matrix(6, 6, gen);
  DesignMatrix x(sq);
  const Vector v = testutil::gaussian_vector(6, gen);
  const double ols_l1 = sq.colPivHouseholderQr().solve(v).lpNorm<1>();
  CHECK(lambda_to_c1(x, v, 1e-9, 1e-14) == doctest::Approx(ols_l1).epsilon(1e-5));

  // Orthonormal design: soft thresholding in closed form.
  DesignMatrix eye(Matrix::Identity(4, 4));
  Vector z(4);
  z << 3, -0.5, 1.2, -2;
  const auto fit = lasso_penalized_cd(eye, z, 1.0);
  Vector expect(4);
  expect << 2, 0, 0.2, -1;
  CHECK((fit.theta - expect).norm() < 1e-12);
  CHECK(fit.duality_gap <= 1e-8 * std::max(1.0, 0.5 * z.squaredNorm()));
  CHECK_THROWS_AS(lasso_penalized_cd(x, v, 1e-3, 1e-16, 2), NonConvergence);
}

TEST_CASE("support") {
  CHECK(support(Vector::Zero(3)).empty());
  Vector th(3);
  th << 0.5, 0, -0.2;
  CHECK(support(th, 0.3) == ModelSet{0});
  CHECK(support(th) == ModelSet{0, 2});
  // FW nonzeros are at least Delta_k * C1, so the threshold choice is immaterial.
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 10; ++rep) {
    DesignMatrix x(testutil::gaussian_matrix(30, 12, gen));
    const Vector y = testutil::gaussian_vector(30, gen);
    const Vector f = lasso_exact_fw(x, y, 2.0, 30);
    CHECK(support(f, 0.0) == support(f, 1e-12));
  }
}

TEST_CASE("exact marginal screening") {
  DesignMatrix eye(Matrix::Identity(3, 3));
  Vector y(3);
  y << 3, 1, 2;
  CHECK(screening_exact(eye, y, 2) == ModelSet{0, 2});
  CHECK(screening_exact_order(eye, y, 3) == std::vector<std::size_t>{0, 2, 1});
  Matrix dup(3, 3);
  dup << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  Vector y2(3);
  y2 << 1, 0.5, 0;
  CHECK(screening_exact_order(DesignMatrix(dup), y2, 1) == std::vector<std::size_t>{0});
  CHECK(screening_exact_order(DesignMatrix(dup), y2, 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(screening_exact(eye, y, 4), InvalidArgument);
}

TEST_CASE("exact forward stepwise") {
  DesignMatrix eye2(Matrix::Identity(2, 2));
  Vector y(2);
  y << 2, 1;
  CHECK(fs_exact_order(eye2, y, 2) == std::vector<std::size_t>{0, 1});

  std::mt19937_64 gen(13);
  const Matrix q = testutil::gaussian_matrix(30, 8, gen).householderQr().householderQ() *
                   Matrix::Identity(30, 8);
  DesignMatrix orth(q);
  const Vector v = testutil::gaussian_vector(30, gen);
  CHECK(fs_exact_order(orth, v, 8) == screening_exact_order(orth, v, 8));

  Matrix dup = testutil::gaussian_matrix(20, 4, gen);
  dup.col(3) = dup.col(1);
  const Vector w = dup.col(1) * 3 + testutil::gaussian_vector(20, gen, 0.1);
  const auto order = fs_exact_order(DesignMatrix(dup), w, 3);
  CHECK(std::count_if(order.begin(), order.end(), [](auto j) { return j == 1 || j == 3; }) == 1);
  CHECK(order[0] == 1);  // tie between the copies goes to the lower index

  Matrix same(5, 2);
  same.col(0) << 1, 2, 3, 4, 5;
  same.col(1) = same.col(0);
  CHECK_THROWS_AS(fs_exact(DesignMatrix(same), Vector::Ones(5), 2), AllCandidatesCollinear);
}

TEST_CASE("forward stepwise criteria agree") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 25; ++rep) {
    DesignMatrix x(testutil::gaussian_matrix(40, 12, gen));
    const Vector y = testutil::gaussian_vector(40, gen);
    CHECK(fs_exact_order(x, y, 6, StepwiseCriterion::NormalizedCorrelation) ==
          fs_exact_order(x, y, 6, StepwiseCriterion::ErrorDecrease));
  }
}

TEST_CASE("zero-noise limits match the exact selectors") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    DesignMatrix x(testutil::gaussian_matrix(25, 10, gen));
    const Vector y = testutil::gaussian_vector(25, gen);
    const RngStream rng(rep);
    LassoConfig lc{1.5, 30, policy(), 0.0};
    const auto l = stable_lasso(x, y, lc, rng);
    CHECK(*l.theta == lasso_exact_fw(x, y, 1.5, 30));
    GreedyConfig gc{4, policy(), 0.0};
    CHECK(stable_screening(x, y, gc, rng).order == screening_exact_order(x, y, 4));
    CHECK(stable_fs(x, y, gc, rng).order == fs_exact_order(x, y, 4));
  }
  // Huge eta (calibrated scale ~ 0) also reproduces exact screening.
  DesignMatrix x(testutil::gaussian_matrix(25, 10, gen));
  const Vector y = testutil::gaussian_vector(25, gen);
  GreedyConfig big{3, policy(1e12), std::nullopt};
  CHECK(stable_screening(x, y, big, RngStream(1)).order == screening_exact_order(x, y, 3));
}

TEST_CASE("stable selectors are deterministic and record their budgets") {
  std::mt19937_64 gen(41);
  DesignMatrix x(testutil::gaussian_matrix(30, 8, gen));
  const Vector y = testutil::gaussian_vector(30, gen);
  const RngStream rng(123, {4, 5});
  GreedyConfig gc{3, policy(0.5, 0.02), std::nullopt};
  const auto a = stable_fs(x, y, gc, rng);
  const auto b = stable_fs(x, y, gc, rng);
  CHECK(a.order == b.order);
  CHECK(a.trace.size() == 3);
  CHECK(a.trace[1].noisy_score == b.trace[1].noisy_score);
  CHECK(a.budgets == certify_budgets(3, 0.5, 0.02));
  CHECK(a.noise_scale == scale_forward_stepwise(8, 3, gc.policy));
  const auto s = stable_screening(x, y, gc, rng);
  CHECK(s.noise_scale == scale_screening(8, x, gc.policy));
  for (const auto& r : s.trace) CHECK(r.clean_score <= r.best_clean_score);
  LassoConfig lc{1.0, 12, policy(), std::nullopt};
  const auto l1 = stable_lasso(x, y, lc, rng);
  const auto l2 = stable_lasso(x, y, lc, rng);
  CHECK(*l1.theta == *l2.theta);
  CHECK(l1.theta->lpNorm<1>() <= 1.0 + 1e-12);
  CHECK(l1.budgets == certify_budgets(12, 1.0, 0.05));
}

TEST_CASE("stable lasso one-step selection law") {
  // X = I_2, n = 2: vertex scores -(2/n) s (X^T y)_i C1 = (-1, 1, -0.5, 0.5).
  DesignMatrix x(Matrix::Identity(2, 2));
  Vector y(2);
  y << 1, 0.5;
  const double b = 0.5;
  const auto law = noisy_argmin_law({-1, 1, -0.5, 0.5}, b);
  CHECK(law[0] + law[1] + law[2] + law[3] == doctest::Approx(1.0).epsilon(1e-9));
  const int trials = 100000;
  std::vector<int> hits(4, 0);
  LassoConfig lc{1.0, 1, policy(), b};
  for (int s = 0; s < trials; ++s) {
    const auto r = stable_lasso(x, y, lc, RngStream(s));
    ++hits[2 * r.trace[0].index + (r.trace[0].sign > 0 ? 0 : 1)];
  }
  for (int v = 0; v < 4; ++v) {
    CAPTURE(v);
    CHECK(std::abs(hits[v] / double(trials) - law[v]) <= 3 * testutil::mc_sigma(law[v], trials));
  }
}

TEST_CASE("stable screening one-step selection law") {
  // X = I_3, n = 3: c = y / 3.
  DesignMatrix x(Matrix::Identity(3, 3));
  const std::vector<double> c{0.3, 0.2, -0.25};
  Vector y(3);
  y << 3 * c[0], 3 * c[1], 3 * c[2];
  const double b = 0.2;
  const auto law = noisy_abs_argmax_law(c, b);
  CHECK(law[0] + law[1] + law[2] == doctest::Approx(1.0).epsilon(1e-9));
  const int trials = 100000;
  std::vector<int> hits(3, 0);
  GreedyConfig gc{1, policy(), b};
  for (int s = 0; s < trials; ++s) ++hits[stable_screening(x, y, gc, RngStream(s)).order[0]];
  for (int i = 0; i < 3; ++i) {
    CAPTURE(i);
    CHECK(std::abs(hits[i] / double(trials) - law[i]) <= 3 * testutil::mc_sigma(law[i], trials));
  }
}

TEST_CASE("default lasso steps") {
  DesignMatrix x(Matrix::Identity(4, 4) * 0.5);
  // n ||X||_inf^2 C1 eta / (sigma ||X||_{2,inf}) = 4 * 0.25 * 2 * 3 / 0.5 = 12
  CHECK(default_lasso_steps(x, 2.0, policy(3.0)) == 12);
  CHECK(default_lasso_steps(x, 2.0, policy(1e9), 500) == 500);
  CHECK(default_lasso_steps(x, 2.0, policy(1e-9)) == 1);
}
