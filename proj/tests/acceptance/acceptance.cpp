// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "helpers.hpp"
#include "lasso_oracle.hpp"

#include "stabposi/cli.hpp"
#include "stabposi/experiments.hpp"
#include "stabposi/noise.hpp"
#include "stabposi/selectors.hpp"
#include "stabposi/stability.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace stabposi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  fmt::print("criterion {:2d} {} [{:.1f}s] {}: {}\n", id, out.pass ? "PASS" : "FAIL", secs, name,
             out.detail);
  std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig base_config(SelectorKind kind, int n, int d, int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.trials = trials;
  cfg.master_seed = seed;
  cfg.alpha = 0.1;
  cfg.selector.kind = kind;
  return cfg;
}

double miscoverage(const std::vector<TrialRecord>& recs) {
  int used = 0, missed = 0;
  for (const auto& r : recs) {
    if (r.flagged) continue;
    ++used;
    if (!r.covered) ++missed;
  }
  return used ? static_cast<double>(missed) / used : 1.0;
}

// ------------------------------------------------------------------ 1
Outcome classical_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = base_config(SelectorKind::Fixed, 200, 10, 10000, 101);
  cfg.selector.fixed_model = {0, 4, 9};
  const auto recs = run_trials(cfg, 0.0);
  const double miss = miscoverage(recs);
  const double hi = 0.1 + 3 * std::sqrt(0.09 / 1e4);
  const double secs = elapsed_since(t0);
  return {miss <= hi && miss >= 0.02 && secs < 30.0,
          fmt::format("miscoverage {:.4f} in [0.02, {:.4f}], K {:.4f}", miss, hi, recs[0].K)};
}

// ------------------------------------------------------------------ 2
Outcome stable_coverage() {
  const auto t0 = std::chrono::steady_clock::now();
  const double bound = 0.1 + 3 * std::sqrt(0.09 / 2000);
  const double delta_s = alpha_split(0.1).selection_delta();
  bool ok = true;
  std::string detail;
  for (SelectorKind kind : {SelectorKind::Screen, SelectorKind::ForwardStepwise, SelectorKind::Lasso}) {
    ExperimentConfig cfg = base_config(kind, 100, 20, 2000, 202);
    cfg.selector.k = 3;
    int steps = 3;
    if (kind == SelectorKind::Lasso) {
      cfg.selector.c1 = 2.0;
      cfg.selector.steps = 10;
      steps = 10;
    }
    const double eta = eta_step_for_total(steps, delta_s, 1.0);
    const auto recs = run_trials(cfg, eta);
    const double miss = miscoverage(recs);
    const double total = posi_for_alpha(3, 0.1, certify_budgets(steps, eta, delta_s)).chosen.eta;
    ok = ok && miss <= bound && std::abs(total - 1.0) < 1e-9;
    detail += fmt::format("{} miscoverage {:.4f} (eta_step {:.4f}, total {:.3f}); ", to_string(kind),
                          miss, eta, total);
  }
  const double secs = elapsed_since(t0);
  ok = ok && secs < 180.0;
  return {ok, detail + fmt::format("bound {:.4f}", bound)};
}

// ------------------------------------------------------------------ 3
Outcome indistinguishability() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int n = 20, d = 4, seeds = 100000;
  const double eta = 0.5, delta = 0.05, sigma = 1.0;
  std::mt19937_64 gen(303);
  const DesignMatrix x(testutil::gaussian_matrix(n, d, gen) / std::sqrt(double(n)));
  Vector beta(d);
  beta << 40.0, 0.0, 0.0, 0.0;  // a clear leader puts the others in the Laplace tails
  const Vector y = x.entries() * beta + testutil::gaussian_vector(n, gen, sigma);

  // Shift the correlations by just under the sensitivity of the typical set,
  // pulling the leader down and the others up.
  const double sens = 2.0 * std::sqrt(std::log(2.0 * d / delta)) * sigma * x.l2inf_norm() / n;
  const Vector c = marginal_correlations(x, y);
  Eigen::Index lead = 0;
  c.cwiseAbs().maxCoeff(&lead);
  Vector shift(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double s = c[i] >= 0 ? 1.0 : -1.0;
    shift[i] = (i == lead ? -s : s) * 0.999 * sens * n;
  }
  const Matrix& xm = x.entries();
  const Vector v = xm * (xm.transpose() * xm).ldlt().solve(shift);
  const Vector y2 = y + v;
  const Vector dc = (marginal_correlations(x, y2) - c).cwiseAbs();
  if (dc.maxCoeff() > sens) return {false, "constructed pair leaves the typical set"};

  GreedyConfig gc{1, subgaussian_policy(sigma, delta, eta), std::nullopt};
  std::array<std::array<double, d>, 2> freq{};
  for (int which = 0; which < 2; ++which) {
    const Vector& yy = which == 0 ? y : y2;
    for (int s = 0; s < seeds; ++s) {
      const auto res = stable_screening(x, yy, gc, RngStream(303, {std::uint64_t(which), std::uint64_t(s)}));
      freq[which][res.order.front()] += 1.0 / seeds;
    }
  }
  bool ok = true;
  double worst = 0.0;
  double worst_allowed = 0.0;
  for (int i = 0; i < d; ++i) {
    const double p = freq[0][i], q = freq[1][i];
    if (p == 0.0 || q == 0.0) return {false, fmt::format("index {} never selected", i)};
    const double mc = std::sqrt((1 - p) / (p * seeds) + (1 - q) / (q * seeds));
    const double allowed = std::exp(eta) * (1 + 4 * mc);
    const double ratio = std::max(p / q, q / p);
    if (ratio / allowed > worst / std::max(worst_allowed, 1e-300)) {
      worst = ratio;
      worst_allowed = allowed;
    }
    ok = ok && ratio <= allowed;
  }
  const double secs = elapsed_since(t0);
  return {ok && secs < 30.0,
          fmt::format("worst ratio {:.4f} vs allowed {:.4f} (e^eta {:.4f})", worst, worst_allowed,
                      std::exp(eta))};
}

// ------------------------------------------------------------------ 4
Outcome composition() {
  // 0.5 * 10 * 0.1^2 + sqrt(2 * 10 * ln 20) * 0.1
  const double oracle = 0.82404551204098987;
  const double adv = compose_adaptive_advanced(0.1, 10, 0.05);
  const EtaTau simple = compose_adaptive_simple(0.1, 0.01, 10);
  const std::vector<StabilityBudget> parts{{0.1, 0.01, 0.02}, {0.2, 0.03, 0.04}, {0.3, 0.05, 0.06}};
  const StabilityBudget sum = compose_nonadaptive(parts);
  const bool ok = std::abs(adv - oracle) <= 1e-4 && simple.eta == 10 * 0.1 &&
                  simple.tau == 10 * 0.01 && sum.eta == 0.1 + 0.2 + 0.3 &&
                  sum.tau == 0.01 + 0.03 + 0.05 && sum.nu == 0.02 + 0.04 + 0.06;
  return {ok, fmt::format("advanced {:.6f}, simple ({}, {}), non-adaptive ({}, {}, {})", adv,
                          simple.eta, simple.tau, sum.eta, sum.tau, sum.nu)};
}

// ------------------------------------------------------------------ 5
double big_int_oracle(unsigned d, unsigned s, double tau) {
  using boost::multiprecision::cpp_int;
  cpp_int total = 0, binom = 1;
  for (unsigned i = 1; i <= s; ++i) {
    binom = binom * (d - i + 1) / i;
    total += binom;
  }
  return std::log(total.convert_to<double>()) - std::log(tau);
}

Outcome scheffe_rate() {
  const double small = sparse_selection_eta(10, 3, 0.05);
  const double big = sparse_selection_eta(500, 10, 0.05);
  const double big_oracle = big_int_oracle(500, 10, 0.05);
  const bool ok = std::abs(small - std::log(3500.0)) <= 1e-9 &&
                  std::abs(small - big_int_oracle(10, 3, 0.05)) <= 1e-9 && std::isfinite(big) &&
                  std::abs(big - big_oracle) <= 1e-9 * big_oracle;
  return {ok, fmt::format("(10,3,0.05) -> {:.12f}, log 3500 = {:.12f}; (500,10,0.05) -> {:.10f} vs {:.10f}",
                          small, std::log(3500.0), big, big_oracle)};
}

// ------------------------------------------------------------------ 6
Outcome frank_wolfe() {
  const double c1 = 1.0;
  std::mt19937_64 gen(606);
  double worst = -1e300;
  bool ok = true;
  for (int inst = 0; inst < 50; ++inst) {
    const DesignMatrix x(testutil::gaussian_matrix(50, 20, gen));
    const Vector y = testutil::gaussian_vector(50, gen, 2.0);
    const double best = testutil::constrained_lasso_min_loss(x, y, c1);
    const double bc = 8 * x.linf_norm() * x.linf_norm() * c1 * c1;
    for (int k = 1; k <= 200; ++k) {
      const double gap = lasso_loss(x, y, lasso_exact_fw(x, y, c1, k)) - best;
      const double ratio = gap / (bc / (k + 2));
      worst = std::max(worst, ratio);
      ok = ok && gap >= -1e-9 && ratio <= 1.0;
    }
  }
  return {ok, fmt::format("max gap / bound over 50 x 200 iterates {:.4f}", worst)};
}

// ------------------------------------------------------------------ 7
Outcome utility() {
  constexpr int trials = 500, k = 3;
  const double delta = 0.1, delta_p = 0.1, eta = 1.0, sigma = 1.0;
  ExperimentConfig cfg = base_config(SelectorKind::Screen, 100, 20, trials, 707);
  const double d = cfg.d;
  const GreedyConfig gc{k, subgaussian_policy(sigma, delta, eta), std::nullopt};
  const double log_fact = descending_factorial(cfg.d, k).log;
  const double fs_bound =
      8 * std::sqrt(std::log(2.0) + log_fact - std::log(delta)) * std::log(d / delta_p) * sigma / eta;
  int screen_ok = 0, fs_ok = 0;
  for (int t = 0; t < trials; ++t) {
    const SyntheticData data = gen_synthetic(cfg, t);
    const RngStream rng = trial_stream(cfg, t).child(2);

    const Vector c = marginal_correlations(data.x, data.y).cwiseAbs();
    std::vector<double> sorted(c.data(), c.data() + c.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto scr = stable_screening(data.x, data.y, gc, rng);
    double gap = -1e300;
    for (int j = 0; j < k; ++j) {
      gap = std::max(gap, sorted[j] - c[static_cast<Eigen::Index>(scr.order[j])]);
    }
    const double bound = 8 * std::sqrt(std::log(2 * d / delta)) * std::log(d * k / delta_p) *
                         sigma * data.x.l2inf_norm() / (cfg.n * eta);
    if (gap <= bound) ++screen_ok;

    const auto fwd = stable_fs(data.x, data.y, gc, rng);
    const StepRecord& step2 = fwd.trace.at(1);
    if (step2.best_clean_score - step2.clean_score <= fs_bound) ++fs_ok;
  }
  const double need = 1 - delta_p;
  const bool ok = screen_ok >= need * trials && fs_ok >= need * trials;
  return {ok, fmt::format("screening bound held in {}/{} trials, stepwise step 2 in {}/{} (need {:.0f}%)",
                          screen_ok, trials, fs_ok, trials, 100 * need)};
}

// ------------------------------------------------------------------ 8
Outcome zero_noise() {
  std::mt19937_64 gen(808);
  int matched = 0;
  constexpr int instances = 100;
  const NoisePolicy policy = subgaussian_policy(1.0, 0.05, 1.0);
  for (int inst = 0; inst < instances; ++inst) {
    Matrix m = testutil::gaussian_matrix(50, 20, gen);
    if (inst % 5 == 0) m.col(13) = m.col(4);  // exact ties
    const DesignMatrix x(m);
    const Vector y = testutil::gaussian_vector(50, gen, 1.0);
    const RngStream rng(808, {std::uint64_t(inst)});

    const GreedyConfig gc{4, policy, 0.0};
    const auto scr = stable_screening(x, y, gc, rng);
    const auto fwd = stable_fs(x, y, gc, rng);
    LassoConfig lc;
    lc.c1 = 1.5;
    lc.steps = 60;
    lc.policy = policy;
    lc.noise_scale_override = 0.0;
    const auto las = stable_lasso(x, y, lc, rng);
    const Vector exact_theta = lasso_exact_fw(x, y, lc.c1, lc.steps);

    const bool same = scr.order == screening_exact_order(x, y, 4) &&
                      scr.model == screening_exact(x, y, 4) &&
                      fwd.order == fs_exact_order(x, y, 4) && fwd.model == fs_exact(x, y, 4) &&
                      (*las.theta - exact_theta).cwiseAbs().maxCoeff() <= 1e-12 &&
                      las.model == support(exact_theta);
    if (same) ++matched;
  }
  return {matched == instances, fmt::format("{}/{} instances identical (20 with tied columns)",
                                            matched, instances)};
}

// ------------------------------------------------------------------ 9
Outcome trends() {
  const std::vector<double> grid{0.5, 2.0, 5.0, 10.0};
  bool ok = true;
  std::string detail;
  for (SelectorKind kind : {SelectorKind::Screen, SelectorKind::ForwardStepwise, SelectorKind::Lasso}) {
    ExperimentConfig cfg = base_config(kind, 200, 50, 300, 909);
    cfg.active_fraction = 0.2;
    cfg.selector.k = 5;
    if (kind == SelectorKind::Lasso) {
      cfg.selector.lambda = 3.0;
      cfg.selector.steps = 50;
    }
    const auto sweep = eta_sweep(cfg, grid);
    bool k_up = true;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      k_up = k_up && sweep[i].summary.mean_K > sweep[i - 1].summary.mean_K;
    }
    const auto& lo = sweep.front().summary;
    const auto& hi = sweep.back().summary;
    ok = ok && k_up;
    detail += fmt::format("{}: K {:.3f}->{:.3f}", to_string(kind), lo.mean_K, hi.mean_K);
    if (kind == SelectorKind::Lasso) {
      ok = ok && *hi.mean_risk <= *lo.mean_risk;
      detail += fmt::format(", risk {:.4f}->{:.4f}; ", *lo.mean_risk, *hi.mean_risk);
    } else {
      ok = ok && hi.mean_fdr <= lo.mean_fdr;
      detail += fmt::format(", FDR {:.3f}->{:.3f}; ", lo.mean_fdr, hi.mean_fdr);
    }
  }
  return {ok, detail};
}

// ------------------------------------------------------------------ 10
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("stabposi_acceptance_{}", getpid());
  fs::create_directories(root);
  const std::vector<std::string> configs{
      R"({"n": 100, "d": 20, "trials": 60, "master_seed": 1010, "eta_grid": [0.5, 2, 10],
          "selector": {"method": "screen", "k": 3}})",
      R"({"n": 100, "d": 20, "trials": 40, "master_seed": 1011, "eta_grid": [1, 5],
          "selector": {"method": "lasso", "lambda": 2.0, "steps": 20}})"};
  bool ok = true;
  std::string detail;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const fs::path cfg_path = root / fmt::format("config{}.json", c);
    std::ofstream(cfg_path) << configs[c];
    std::array<fs::path, 2> dirs{root / fmt::format("c{}_w1", c), root / fmt::format("c{}_w8", c)};
    const std::array<const char*, 2> workers{"1", "8"};
    for (int w = 0; w < 2; ++w) {
      std::ostringstream out, err;
      const int code = run_cli({"posi", "experiment", "--config", cfg_path.string(), "--out",
                                dirs[w].string(), "--workers", workers[w]},
                               out, err);
      if (code != 0) {
        fs::remove_all(root);
        return {false, "experiment exited with " + std::to_string(code) + ": " + err.str()};
      }
    }
    for (const char* name : {"records.csv", "summary.csv", "plot_data.csv"}) {
      const std::string a = slurp(dirs[0] / name), b = slurp(dirs[1] / name);
      const bool same = !a.empty() && a == b;
      ok = ok && same;
      detail += fmt::format("{}{}/{} {}", detail.empty() ? "" : ", ", c, name, same ? "identical" : "DIFFER");
    }
  }
  fs::remove_all(root);
  return {ok, detail};
}

}  // namespace

int main() {
  run(1, "classical coverage, fixed model", classical_recovery);
  run(2, "coverage under stable selection", stable_coverage);
  run(3, "indistinguishability ratio", indistinguishability);
  run(4, "composition arithmetic", composition);
  run(5, "sparse selection eta", scheffe_rate);
  run(6, "frank-wolfe convergence", frank_wolfe);
  run(7, "screening and stepwise utility", utility);
  run(8, "zero-noise limits", zero_noise);
  run(9, "trends over eta", trends);
  run(10, "determinism across workers", determinism);
  fmt::print("{} of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
