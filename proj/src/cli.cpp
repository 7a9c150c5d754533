#include "stabposi/cli.hpp"

#include "stabposi/csv_io.hpp"
#include "stabposi/errors.hpp"
#include "stabposi/noise.hpp"
#include "stabposi/orlicz.hpp"
#include "stabposi/selectors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace stabposi {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string join_indices(const ModelSet& m) {
  std::string s;
  for (std::size_t j : m) s += (s.empty() ? "" : " ") + std::to_string(j);
  return s;
}

std::string join_values(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_number(v[i]);
  return s;
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json manifest_base(const std::string& command, const std::vector<std::string>& args) {
  json m;
  m["command"] = command;
  m["argv"] = args;
  m["version"] = kVersion;
  m["csv_schema_version"] = kCsvSchemaVersion;
  return m;
}

void finish_manifest(json& m, const std::string& path,
                     std::chrono::steady_clock::time_point start) {
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  m["wall_clock_seconds"] = wall.count();
  write_text(path, m.dump(2) + "\n");
}

// --sigma known:<s> | estimate | orlicz:<name>:<G>
struct SigmaSpec {
  enum class Kind { Known, Estimate, Orlicz } kind = Kind::Known;
  double sigma = 1.0;
  std::string psi;
  double G = 1.0;
};

SigmaSpec parse_sigma_spec(const std::string& text) {
  SigmaSpec s;
  if (text == "estimate") {
    s.kind = SigmaSpec::Kind::Estimate;
    return s;
  }
  if (text.rfind("known:", 0) == 0) {
    s.sigma = parse_number(text.substr(6), "--sigma");
    if (!(s.sigma > 0.0)) throw UsageError("--sigma known:<s> needs s > 0");
    return s;
  }
  if (text.rfind("orlicz:", 0) == 0) {
    const auto rest = text.substr(7);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw UsageError("--sigma orlicz:<name>:<G>");
    s.kind = SigmaSpec::Kind::Orlicz;
    s.psi = rest.substr(0, colon);
    s.G = parse_number(rest.substr(colon + 1), "--sigma");
    if (!(s.G > 0.0)) throw UsageError("--sigma orlicz:<name>:<G> needs G > 0");
    OrliczRegistry::builtin().get(s.psi);
    return s;
  }
  throw UsageError("--sigma must be known:<s>, estimate or orlicz:<name>:<G>");
}

AlphaWeights parse_weights(const std::string& text) {
  const auto parts = split_csv_line(text);
  if (parts.size() != 3) throw UsageError("--weights needs three comma-separated values");
  return {parse_number(parts[0], "--weights"), parse_number(parts[1], "--weights"),
          parse_number(parts[2], "--weights")};
}

DesignMatrix load_design(const std::string& path) { return DesignMatrix(read_matrix_csv_file(path)); }

Vector load_response(const std::string& path, const DesignMatrix& x) {
  Vector y = read_vector_csv_file(path);
  if (y.size() != x.n()) {
    throw DimensionMismatch("y has " + std::to_string(y.size()) + " entries but X has " +
                            std::to_string(x.n()) + " rows");
  }
  return y;
}

// ------------------------------------------------------------------ select

struct SelectArgs {
  std::string x, y, method, sigma = "known:1", out;
  double eta = 1.0, delta = 0.05, c1 = 0.0, lambda = 0.0;
  int k = 0, steps = 0;
  std::uint64_t seed = 0;
  bool has_k = false, has_c1 = false, has_lambda = false, has_steps = false;
};

int cmd_select(const SelectArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  if (!(a.eta > 0.0)) throw UsageError("--eta must be positive");
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw UsageError("--delta must be in (0, 1)");
  const SigmaSpec sig = parse_sigma_spec(a.sigma);
  if (sig.kind == SigmaSpec::Kind::Estimate) {
    throw UsageError("select calibrates noise from a known sigma or an Orlicz bound");
  }
  if (a.method != "lasso" && a.method != "screen" && a.method != "fs") {
    throw UsageError("--method must be lasso, screen or fs");
  }
  if (a.method != "lasso" && !a.has_k) throw UsageError("--k is required for " + a.method);
  if (a.method == "lasso" && a.has_c1 == a.has_lambda) {
    throw UsageError("lasso needs exactly one of --c1 and --lambda");
  }

  const DesignMatrix x = load_design(a.x);
  const Vector y = load_response(a.y, x);
  const NoisePolicy policy =
      sig.kind == SigmaSpec::Kind::Known
          ? subgaussian_policy(sig.sigma, a.delta, a.eta)
          : orlicz_policy(OrliczRegistry::builtin().get(sig.psi), sig.G, a.delta, a.eta);
  const RngStream rng(a.seed);

  json manifest = manifest_base("select", argv);
  manifest["master_seed"] = a.seed;
  json cfg = {{"x", a.x},         {"y", a.y},         {"method", a.method}, {"eta", a.eta},
              {"delta", a.delta}, {"sigma", a.sigma}, {"seed", a.seed}};

  SelectionResult res;
  if (a.method == "lasso") {
    LassoConfig lc;
    lc.policy = policy;
    if (a.has_lambda) {
      lc.c1 = lambda_to_c1(x, y, a.lambda);
      cfg["lambda"] = a.lambda;
      if (!(lc.c1 > 0.0)) throw UsageError("--lambda is at least ||X^T y||_inf, so C1 = 0");
    } else {
      lc.c1 = a.c1;
    }
    cfg["c1"] = lc.c1;
    lc.steps = a.has_steps ? a.steps : default_lasso_steps(x, lc.c1, policy);
    cfg["steps"] = lc.steps;
    res = stable_lasso(x, y, lc, rng);
  } else {
    cfg["k"] = a.k;
    GreedyConfig gc{a.k, policy, std::nullopt};
    res = a.method == "screen" ? stable_screening(x, y, gc, rng) : stable_fs(x, y, gc, rng);
  }
  cfg["noise_scale"] = res.noise_scale;
  manifest["config"] = cfg;

  std::ostringstream csv;
  csv << "kind,step,index,value,eta,tau,nu\n";
  if (res.theta) {
    for (std::size_t j : res.model) csv << "model,0," << j << ",,,,\n";
    for (Eigen::Index j = 0; j < res.theta->size(); ++j) {
      csv << "theta,," << j << "," << format_number((*res.theta)[j]) << ",,,\n";
    }
  } else {
    for (std::size_t p = 0; p < res.order.size(); ++p) {
      csv << "model," << p + 1 << "," << res.order[p] << ",,,,\n";
    }
  }
  for (std::size_t b = 0; b < res.budgets.size(); ++b) {
    const auto& bu = res.budgets[b];
    csv << "budget," << b + 1 << ",,," << format_number(bu.eta) << "," << format_number(bu.tau)
        << "," << format_number(bu.nu) << "\n";
  }
  for (const StepRecord& r : res.trace) {
    csv << "trace," << r.step << "," << r.index << "," << format_number(r.noisy_score) << ",,,\n";
    csv << "trace_clean," << r.step << "," << r.index << "," << format_number(r.clean_score)
        << ",,,\n";
    csv << "trace_best," << r.step << ",," << format_number(r.best_clean_score) << ",,,\n";
  }

  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    manifest["outputs"] = {a.out};
    finish_manifest(manifest, a.out + ".manifest.json", start);
  }
  return exit_code::kOk;
}

// ---------------------------------------------------------------------- ci

struct CiArgs {
  std::string selection, x, y, sigma = "known:1", weights, out;
  double alpha = 0.1;
};

struct ParsedSelection {
  ModelSet model;
  std::vector<StabilityBudget> budgets;
};

ParsedSelection read_selection(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::size_t> model;
  ParsedSelection sel;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_csv_line(line);
    if (f.size() != 7) {
      if (line.empty()) continue;
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 fields");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (f[0] == "model") {
      model.push_back(static_cast<std::size_t>(parse_number(f[2], ctx)));
    } else if (f[0] == "budget") {
      StabilityBudget b{parse_number(f[4], ctx), parse_number(f[5], ctx), parse_number(f[6], ctx)};
      b.validate();
      sel.budgets.push_back(b);
    }
  }
  if (sel.budgets.empty()) throw ParseError(path + ": no budget rows");
  try {
    sel.model = ModelSet(std::move(model));
  } catch (const InvalidArgument& e) {
    throw ParseError(path + ": " + e.what());
  }
  return sel;
}

int cmd_ci(const CiArgs& a, const std::vector<std::string>& argv, std::ostream& out,
           std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must be in (0, 1)");
  const SigmaSpec sig = parse_sigma_spec(a.sigma);
  const std::optional<AlphaWeights> weights =
      a.weights.empty() ? std::nullopt : std::optional(parse_weights(a.weights));
  const LevelAllocation alloc = alpha_split(a.alpha, weights);

  const ParsedSelection sel = read_selection(a.selection);
  const DesignMatrix x = load_design(a.x);
  const Vector y = load_response(a.y, x);
  for (std::size_t j : sel.model) {
    if (static_cast<Eigen::Index>(j) >= x.d()) {
      throw DimensionMismatch("selected index " + std::to_string(j) + " is outside X's " +
                              std::to_string(x.d()) + " columns");
    }
  }
  double slack = 0.0;
  for (const auto& b : sel.budgets) slack = std::max(slack, b.slack());
  if (slack > alloc.tau + alloc.nu + 1e-12) {
    err << "warning: certified slack " << format_number(slack) << " exceeds tau + nu = "
        << format_number(alloc.tau + alloc.nu) << " of the alpha split\n";
  }

  std::ostringstream csv;
  csv << "index,estimate,stderr,K,lower,upper\n";
  json cfg = {{"selection", a.selection}, {"x", a.x},         {"y", a.y},
              {"alpha", a.alpha},         {"sigma", a.sigma}, {"weights", a.weights}};
  if (!sel.model.empty()) {
    Vector estimate, stderrs;
    double K = 0.0;
    StabilityBudget chosen;
    if (sig.kind == SigmaSpec::Kind::Orlicz) {
      const SubmodelQR qr(x, sel.model);
      estimate = qr.solve(y);
      stderrs = qr.gram_inverse_diag_sqrt();
      const auto aligned = align_slack(sel.budgets);
      const double delta_q = a.alpha - aligned.front().slack();
      if (!(delta_q > 0.0)) throw DegenerateLevel("certified slack exhausts alpha");
      K = std::numeric_limits<double>::infinity();
      for (const auto& b : aligned) {
        const double c = orlicz_constant(sig.psi, sig.G, sel.model.size(), delta_q, b);
        if (c < K) {
          K = c;
          chosen = b;
        }
      }
    } else {
      double sigma = sig.sigma;
      VarianceMode mode = VarianceMode::known();
      if (sig.kind == SigmaSpec::Kind::Estimate) {
        const SigmaEstimate est = sigma_hat_full_model(x, y);
        sigma = est.sigma_hat;
        mode = VarianceMode::estimated(est.dof);
        cfg["sigma_hat"] = est.sigma_hat;
        cfg["dof"] = est.dof;
      }
      const PosiForAlpha pf = posi_for_alpha(sel.model.size(), a.alpha, sel.budgets, mode);
      const FitResult fit = fit_model(x, sel.model, y, sigma);
      estimate = fit.coefficients;
      stderrs = fit.stderrs;
      K = pf.K;
      chosen = pf.chosen;
    }
    for (std::size_t p = 0; p < sel.model.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(p);
      csv << sel.model[p] << "," << format_number(estimate[i]) << "," << format_number(stderrs[i])
          << "," << format_number(K) << "," << format_number(estimate[i] - K * stderrs[i]) << ","
          << format_number(estimate[i] + K * stderrs[i]) << "\n";
    }
    cfg["K"] = K;
    cfg["chosen_budget"] = {chosen.eta, chosen.tau, chosen.nu};
  }

  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    json manifest = manifest_base("ci", argv);
    manifest["config"] = cfg;
    manifest["outputs"] = {a.out};
    finish_manifest(manifest, a.out + ".manifest.json", start);
  }
  return exit_code::kOk;
}

// -------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string config, out;
  int workers = 0;
};

int default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

int cmd_experiment(const ExperimentArgs& a, const std::vector<std::string>& argv,
                   std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const int workers = a.workers >= 1 ? a.workers : default_workers();
  std::string text = read_text(a.config);
  // A manifest from a previous run is accepted in place of a config.
  try {
    const json j = json::parse(text);
    if (j.is_object() && j.contains("command") && j.contains("config")) text = j["config"].dump();
  } catch (const json::exception& e) {
    throw ParseError(a.config + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg = parse_experiment_config(text);
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(a.config + ": " + e.what());
  } catch (const BadWeights& e) {
    throw ParseError(a.config + ": " + e.what());
  }
  const ExperimentConfig resolved = resolve_config(cfg);
  const auto grid = resolved.eta_grid.empty() ? default_eta_grid() : resolved.eta_grid;
  const auto sweep = eta_sweep(resolved, grid, workers);

  fs::create_directories(a.out);
  write_experiment_csvs(a.out, sweep);

  json manifest = manifest_base("experiment", argv);
  manifest["master_seed"] = resolved.master_seed;
  manifest["config"] = json::parse(experiment_config_to_json(resolved));
  manifest["workers"] = workers;
  manifest["outputs"] = {(fs::path(a.out) / "records.csv").string(),
                         (fs::path(a.out) / "summary.csv").string(),
                         (fs::path(a.out) / "plot_data.csv").string()};
  finish_manifest(manifest, (fs::path(a.out) / "manifest.json").string(), start);
  out << "wrote " << sweep.size() << " eta points x " << resolved.trials << " trials to "
      << a.out << "\n";
  return exit_code::kOk;
}

// ------------------------------------------------------------------ budget

struct BudgetArgs {
  int k = 0;
  double eta_step = 0.0, delta = 0.05;
  std::vector<double> sparse;
};

int cmd_budget(const BudgetArgs& a, std::ostream& out) {
  if (a.k < 1) throw UsageError("--k must be >= 1");
  if (!(a.eta_step >= 0.0)) throw UsageError("--eta-step must be >= 0");
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw UsageError("--delta must be in (0, 1)");
  const auto budgets = certify_budgets(a.k, a.eta_step, a.delta);
  out << "budget,eta,tau,nu\n";
  const char* names[] = {"advanced", "simple"};
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    out << names[i] << "," << format_number(budgets[i].eta) << ","
        << format_number(budgets[i].tau) << "," << format_number(budgets[i].nu) << "\n";
  }
  if (!a.sparse.empty()) {
    const double d = a.sparse[0], s = a.sparse[1], tau = a.sparse[2];
    if (d < 1 || s < 1 || s > d || d != std::floor(d) || s != std::floor(s)) {
      throw UsageError("--sparse needs integers 1 <= s <= d");
    }
    if (!(tau > 0.0 && tau < 1.0)) throw UsageError("--sparse needs tau in (0, 1)");
    const double eta = sparse_selection_eta(static_cast<std::uint64_t>(d),
                                            static_cast<std::uint64_t>(s), tau);
    out << "sparse," << format_number(eta) << "," << format_number(tau) << ",0\n";
  }
  return exit_code::kOk;
}

// ------------------------------------------------------------------ replay

int run_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  if (!m.contains("argv") || !m["argv"].is_array()) throw ParseError(manifest_path + ": no argv");
  const auto args = m["argv"].get<std::vector<std::string>>();
  if (args.size() >= 2 && args[1] == "replay") throw ParseError("a replay manifest cannot replay");
  return run_cli(args, out, err);
}

int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const BadWeights& e) {
    err << "invalid weights: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const UnregisteredOrlicz& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const DegenerateLevel& e) {
    err << "degenerate level: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const DimensionMismatch& e) {
    err << "dimension mismatch: " << e.what() << "\n";
    return exit_code::kDimension;
  } catch (const RankDeficient& e) {
    err << "rank deficient: " << e.what() << "\n";
    return exit_code::kRank;
  } catch (const AllCandidatesCollinear& e) {
    err << "rank deficient: " << e.what() << "\n";
    return exit_code::kRank;
  } catch (const InsufficientSamples& e) {
    err << "insufficient samples: " << e.what() << "\n";
    return exit_code::kSamples;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kFailure;
  }
}

// ------------------------------------------------------------- config json

const std::set<std::string> kConfigKeys = {
    "n",      "d",         "signal",      "active_fraction",        "sigma",
    "alpha",  "trials",    "master_seed", "regenerate_X_per_trial", "sigma_mode",
    "weights", "coupled",  "eta_grid",    "selector"};
const std::set<std::string> kSelectorKeys = {"method", "k",     "model",
                                             "c1",     "lambda", "steps"};

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ParseError(where + key + " must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ParseError(where + key + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned()) {
        throw ParseError(where + key + " must be nonnegative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ParseError(where + key + " must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ParseError(where + key + " must be a string");
  }
  return v.get<T>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ParseError(where + "unknown key '" + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  check_keys(j, kConfigKeys, "config: ");
  for (const char* key : {"n", "d", "trials", "master_seed", "selector"}) {
    if (!j.contains(key)) throw ParseError(std::string("config: missing required key '") + key + "'");
  }
  const std::string w = "config: ";
  ExperimentConfig cfg;
  cfg.n = get_field<int>(j, "n", w);
  cfg.d = get_field<int>(j, "d", w);
  cfg.trials = get_field<int>(j, "trials", w);
  cfg.master_seed = get_field<std::uint64_t>(j, "master_seed", w);
  if (j.contains("signal")) cfg.signal = get_field<double>(j, "signal", w);
  if (j.contains("active_fraction")) cfg.active_fraction = get_field<double>(j, "active_fraction", w);
  if (j.contains("sigma")) cfg.sigma = get_field<double>(j, "sigma", w);
  if (j.contains("alpha")) cfg.alpha = get_field<double>(j, "alpha", w);
  if (j.contains("regenerate_X_per_trial")) {
    cfg.regenerate_X_per_trial = get_field<bool>(j, "regenerate_X_per_trial", w);
  }
  if (j.contains("coupled")) cfg.coupled = get_field<bool>(j, "coupled", w);
  if (j.contains("sigma_mode")) {
    const auto mode = get_field<std::string>(j, "sigma_mode", w);
    if (mode != "known" && mode != "estimate") throw ParseError(w + "sigma_mode must be known|estimate");
    cfg.estimate_sigma = mode == "estimate";
  }
  if (j.contains("weights")) {
    const json& ws = j["weights"];
    if (!ws.is_array() || ws.size() != 3 || !ws[0].is_number() || !ws[1].is_number() ||
        !ws[2].is_number()) {
      throw ParseError(w + "weights must be an array of three numbers");
    }
    cfg.weights = {ws[0].get<double>(), ws[1].get<double>(), ws[2].get<double>()};
  }
  if (j.contains("eta_grid")) {
    const json& g = j["eta_grid"];
    if (!g.is_array() || g.empty()) throw ParseError(w + "eta_grid must be a nonempty array");
    for (const json& v : g) {
      if (!v.is_number()) throw ParseError(w + "eta_grid entries must be numbers");
      cfg.eta_grid.push_back(v.get<double>());
    }
  }

  const json& s = j["selector"];
  const std::string ws = "config.selector: ";
  check_keys(s, kSelectorKeys, ws);
  if (!s.contains("method")) throw ParseError(ws + "missing required key 'method'");
  try {
    cfg.selector.kind = parse_selector_kind(get_field<std::string>(s, "method", ws));
  } catch (const InvalidArgument& e) {
    throw ParseError(ws + e.what());
  }
  if (s.contains("k")) cfg.selector.k = get_field<int>(s, "k", ws);
  if (s.contains("c1")) cfg.selector.c1 = get_field<double>(s, "c1", ws);
  if (s.contains("lambda")) cfg.selector.lambda = get_field<double>(s, "lambda", ws);
  if (s.contains("steps")) cfg.selector.steps = get_field<int>(s, "steps", ws);
  if (s.contains("model")) {
    const json& m = s["model"];
    if (!m.is_array()) throw ParseError(ws + "model must be an array of indices");
    for (const json& v : m) {
      if (!v.is_number_unsigned()) throw ParseError(ws + "model entries must be nonnegative integers");
      cfg.selector.fixed_model.push_back(v.get<std::size_t>());
    }
  }
  if ((cfg.selector.kind == SelectorKind::Screen ||
       cfg.selector.kind == SelectorKind::ForwardStepwise) &&
      !s.contains("k")) {
    throw ParseError(ws + "k is required for " + to_string(cfg.selector.kind));
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const BadWeights& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  j["signal"] = cfg.signal;
  j["active_fraction"] = cfg.active_fraction;
  j["sigma"] = cfg.sigma;
  j["alpha"] = cfg.alpha;
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["regenerate_X_per_trial"] = cfg.regenerate_X_per_trial;
  j["sigma_mode"] = cfg.estimate_sigma ? "estimate" : "known";
  j["weights"] = {cfg.weights.delta, cfg.weights.tau, cfg.weights.nu};
  j["coupled"] = cfg.coupled;
  j["eta_grid"] = cfg.eta_grid.empty() ? default_eta_grid() : cfg.eta_grid;
  json s;
  s["method"] = to_string(cfg.selector.kind);
  switch (cfg.selector.kind) {
    case SelectorKind::Fixed:
      s["model"] = cfg.selector.fixed_model;
      break;
    case SelectorKind::Screen:
    case SelectorKind::ForwardStepwise:
      s["k"] = cfg.selector.k;
      break;
    case SelectorKind::Lasso:
      if (cfg.selector.c1) s["c1"] = *cfg.selector.c1;
      if (cfg.selector.lambda) s["lambda"] = *cfg.selector.lambda;
      if (cfg.selector.steps) s["steps"] = *cfg.selector.steps;
      break;
  }
  j["selector"] = s;
  return j.dump(2);
}

void write_experiment_csvs(const std::string& dir, const std::vector<SweepPoint>& sweep) {
  std::ostringstream records, summary, plot;
  records << "eta,trial,flagged,model_size,covered,fdr,risk,K,budget_eta,budget_tau,budget_nu,"
             "width_max,model,widths\n";
  summary << "eta,trials,flagged,empty_models,coverage,width_max,width_q80,width_q85,width_q90,"
             "width_q100,mean_fdr,mean_risk,mean_K,mean_model_size\n";
  plot << "eta,width_max,width_q90,fdr,risk\n";
  for (const SweepPoint& p : sweep) {
    for (const TrialRecord& r : p.records) {
      const double wmax = r.widths.size() > 0 ? r.widths.maxCoeff()
                                              : std::numeric_limits<double>::quiet_NaN();
      records << format_number(p.eta) << "," << r.trial << "," << (r.flagged ? 1 : 0) << ","
              << r.model.size() << "," << (r.covered ? 1 : 0) << "," << format_number(r.fdr)
              << "," << opt_number(r.risk) << "," << format_number(r.K) << ","
              << format_number(r.budget_used.eta) << "," << format_number(r.budget_used.tau)
              << "," << format_number(r.budget_used.nu) << "," << format_number(wmax) << ","
              << join_indices(r.model) << "," << join_values(r.widths) << "\n";
    }
    const ExperimentSummary& s = p.summary;
    summary << format_number(p.eta) << "," << s.trials << "," << s.flagged << "," << s.empty_models
            << "," << format_number(s.empirical_coverage) << "," << format_number(s.width_max);
    for (double q : {0.80, 0.85, 0.90, 1.00}) summary << "," << format_number(s.width_quantiles.at(q));
    summary << "," << format_number(s.mean_fdr) << "," << opt_number(s.mean_risk) << ","
            << format_number(s.mean_K) << "," << format_number(s.mean_model_size) << "\n";
    plot << format_number(p.eta) << "," << format_number(s.width_max) << ","
         << format_number(s.width_quantiles.at(0.90)) << "," << format_number(s.mean_fdr) << ","
         << opt_number(s.mean_risk) << "\n";
  }
  write_text((fs::path(dir) / "records.csv").string(), records.str());
  write_text((fs::path(dir) / "summary.csv").string(), summary.str());
  write_text((fs::path(dir) / "plot_data.csv").string(), plot.str());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability-corrected post-selection confidence intervals", "posi"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SelectArgs sa;
  auto* sel = app.add_subcommand("select", "Run a stable selector on CSV data");
  sel->add_option("--x", sa.x, "design matrix CSV (n x d)")->required();
  sel->add_option("--y", sa.y, "response CSV (n values)")->required();
  sel->add_option("--method", sa.method, "lasso | screen | fs")->required();
  sel->add_option("--eta", sa.eta, "per-step eta");
  sel->add_option("--delta", sa.delta, "typical-set failure probability");
  auto* k_opt = sel->add_option("--k", sa.k, "features to select (screen, fs)");
  auto* c1_opt = sel->add_option("--c1", sa.c1, "l1 radius (lasso)");
  auto* lambda_opt = sel->add_option("--lambda", sa.lambda, "penalty translated to C1 (lasso)");
  auto* steps_opt = sel->add_option("--steps", sa.steps, "Frank-Wolfe steps (lasso)");
  sel->add_option("--sigma", sa.sigma, "known:<s> or orlicz:<name>:<G>");
  sel->add_option("--seed", sa.seed, "master seed");
  sel->add_option("--out", sa.out, "output CSV (stdout when absent)");

  CiArgs ca;
  auto* ci = app.add_subcommand("ci", "Stability-corrected intervals for a selection");
  ci->add_option("--selection", ca.selection, "CSV written by `posi select`")->required();
  ci->add_option("--x", ca.x)->required();
  ci->add_option("--y", ca.y)->required();
  ci->add_option("--alpha", ca.alpha, "total miscoverage");
  ci->add_option("--sigma", ca.sigma, "known:<s> | estimate | orlicz:<name>:<G>");
  ci->add_option("--weights", ca.weights, "delta,tau,nu weights of the alpha split");
  ci->add_option("--out", ca.out, "output CSV (stdout when absent)");

  ExperimentArgs ea;
  auto* ex = app.add_subcommand("experiment", "Monte Carlo sweep over an eta grid");
  ex->add_option("--config", ea.config, "JSON config (or a previous manifest)")->required();
  ex->add_option("--out", ea.out, "output directory")->required();
  ex->add_option("--workers", ea.workers, std::string("worker threads (default $") + kWorkersEnv +
                                              " or 1)");

  BudgetArgs ba;
  auto* bu = app.add_subcommand("budget", "Composed stability budgets");
  bu->add_option("--k", ba.k, "number of adaptive steps")->required();
  bu->add_option("--eta-step", ba.eta_step, "per-step eta")->required();
  bu->add_option("--delta", ba.delta, "advanced-composition delta");
  bu->add_option("--sparse", ba.sparse, "d s tau: universal eta for |M| <= s")->expected(3);

  std::string replay_path;
  auto* rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rp->add_option("--manifest", replay_path)->required();

  std::vector<std::string> storage(args.begin(), args.end());
  if (storage.empty()) storage.emplace_back("posi");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return exit_code::kOk;
    }
    err << "usage error: " << e.what() << "\n";
    return exit_code::kUsage;
  }
  sa.has_k = k_opt->count() > 0;
  sa.has_c1 = c1_opt->count() > 0;
  sa.has_lambda = lambda_opt->count() > 0;
  sa.has_steps = steps_opt->count() > 0;

  if (sel->parsed()) return guarded([&] { return cmd_select(sa, args, out); }, err);
  if (ci->parsed()) return guarded([&] { return cmd_ci(ca, args, out, err); }, err);
  if (ex->parsed()) return guarded([&] { return cmd_experiment(ea, args, out); }, err);
  if (bu->parsed()) return guarded([&] { return cmd_budget(ba, out); }, err);
  if (rp->parsed()) return guarded([&] { return run_replay(replay_path, out, err); }, err);
  err << "usage error: no subcommand\n";
  return exit_code::kUsage;
}

}  // namespace stabposi
