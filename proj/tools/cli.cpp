#include "cli.hpp"

#include <exception>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <random>

#include "CLI11.hpp"
#include "ahb/certify.hpp"
#include "ahb/summary.hpp"
#include "ahb/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ahb::cli {

json to_json(const X0Spec& x0) {
  if (x0.kind == X0Spec::Kind::zeros) return "zeros";
  return json{{"seeded_random", {{"seed", x0.seed}, {"norm", x0.norm}}}};
}

namespace {

X0Spec parse_x0(const json& j) {
  X0Spec x0;
  if (j.is_string() && j.get<std::string>() == "zeros") return x0;
  if (!j.is_object() || !j.contains("seeded_random"))
    throw InvalidSpec("x0: expected \"zeros\" or {\"seeded_random\": {\"seed\": int, \"norm\": number}}");
  const json& r = j.at("seeded_random");
  if (!r.is_object()) throw InvalidSpec("x0.seeded_random: expected an object");
  x0.kind = X0Spec::Kind::seeded_random;
  if (r.contains("seed")) {
    if (!r.at("seed").is_number_integer()) throw InvalidSpec("x0.seeded_random.seed: expected an integer");
    x0.seed = r.at("seed").get<std::uint64_t>();
  }
  if (r.contains("norm")) {
    if (!r.at("norm").is_number()) throw InvalidSpec("x0.seeded_random.norm: expected a number");
    x0.norm = r.at("norm").get<double>();
  }
  if (!(x0.norm >= 0.0) || !std::isfinite(x0.norm)) throw InvalidSpec("x0.seeded_random.norm: must be >= 0");
  return x0;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  if (!j.is_object()) throw InvalidSpec("config: expected a JSON object");
  ExperimentConfig cfg;
  if (j.contains("problem")) {
    cfg.problem = j.at("problem").get<ProblemSpec>();
    cfg.has_problem = true;
  }
  if (j.contains("runs")) {
    const json& runs = j.at("runs");
    if (!runs.is_array()) throw InvalidSpec("runs: expected an array");
    if (runs.empty()) throw InvalidSpec("runs: must not be empty");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const json& r = runs[i];
      const std::string where = "runs[" + std::to_string(i) + "]";
      if (!r.is_object()) throw InvalidSpec(where + ": expected an object");
      if (r.contains("problem")) {
        const auto p = r.at("problem").get<ProblemSpec>();
        if (!cfg.has_problem) {
          cfg.problem = p;
          cfg.has_problem = true;
        } else if (!(p == cfg.problem)) {
          throw InvalidSpec(where + ".problem: differs from the shared problem");
        }
      }
      SolverConfig sc = r.get<SolverConfig>();
      try {
        sc.validate();
      } catch (const InvalidSpec& e) {
        throw InvalidSpec(where + "." + e.what());
      }
      cfg.runs.push_back(sc);
    }
  }
  if (j.contains("x0")) cfg.x0 = parse_x0(j.at("x0"));
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) throw InvalidSpec("out_dir: expected a string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  return cfg;
}

Vector make_x0(const X0Spec& spec, Eigen::Index dim) {
  if (spec.kind == X0Spec::Kind::zeros) return Vector::Zero(dim);
  std::mt19937_64 rng(spec.seed);
  Vector x = detail::standard_normal(rng, dim);
  return x * (spec.norm / x.norm());
}

std::vector<SolverConfig> default_comparison_runs() {
  std::vector<SolverConfig> runs;
  for (Method m : {Method::ahb, Method::alrhb, Method::nesterov, Method::gd}) {
    SolverConfig c;  // defaults carry the comparison parameters
    c.method = m;
    runs.push_back(c);
  }
  return runs;
}

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidSpec("config '" + path + "': " + e.what());
  }
}

// Flag values are read as JSON when they parse, else as strings, so a flag
// behaves exactly like the config key it mirrors.
json scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

double to_extended(const std::string& text, const char* name) {
  if (auto v = parse_double(text)) return *v;
  throw InvalidSpec(std::string(name) + ": expected a number or inf, got '" + text + "'");
}

struct GlobalFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct ProblemFlags {
  std::string kind;
  std::vector<std::string> params;  // key=value
};

void add_problem_flags(CLI::App* app, ProblemFlags& f) {
  app->add_option("--problem", f.kind, "problem kind: quadratic, least_squares, power, abs_value, radon");
  app->add_option("--param", f.params, "problem parameter key=value (value read as JSON), repeatable");
}

void apply_problem_flags(json& config, const ProblemFlags& f) {
  if (f.kind.empty() && f.params.empty()) return;
  json& problem = config["problem"];
  if (!problem.is_object()) problem = json::object();
  if (!f.kind.empty()) problem["kind"] = f.kind;
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidSpec("--param: expected key=value, got '" + kv + "'");
    problem["params"][kv.substr(0, eq)] = scalar(kv.substr(eq + 1));
  }
}

struct RunFlags {
  json solver = json::object();  // overrides applied to every run
  std::string x0;
  std::optional<std::uint64_t> x0_seed;
  std::optional<double> x0_norm;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  const std::pair<const char*, const char*> keys[] = {
      {"--method", "method"},           {"--mu0", "mu0"},
      {"--beta-cap", "beta_cap"},       {"--gd-mu", "gd_mu"},
      {"--nesterov-nu", "nesterov_nu"}, {"--alrhb-beta", "alrhb_beta"},
      {"--max-iters", "max_iters"},     {"--gap-tol", "gap_tol"},
      {"--record-every", "record_every"},
  };
  for (auto [flag, key] : keys) {
    app->add_option_function<std::string>(
        flag, [&f, key = std::string(key)](const std::string& v) { f.solver[key] = scalar(v); },
        "overrides runs[*]." + std::string(key));
  }
  app->add_option("--x0", f.x0, "initial point: zeros or random")->check(CLI::IsMember({"zeros", "random"}));
  app->add_option_function<std::uint64_t>("--x0-seed", [&f](std::uint64_t v) { f.x0_seed = v; },
                                          "seed of a random x0");
  app->add_option_function<double>("--x0-norm", [&f](double v) { f.x0_norm = v; }, "norm of a random x0");
}

void apply_run_flags(json& config, const RunFlags& f, const GlobalFlags& g) {
  if (g.seed) {
    if (!config.contains("problem") || !config["problem"].is_object())
      throw InvalidSpec("--seed: no problem to seed");
    config["problem"]["seed"] = *g.seed;
  }
  if (!g.out.empty()) config["out_dir"] = g.out;
  if (f.x0 == "zeros") {
    config["x0"] = "zeros";
  } else if (f.x0 == "random" || f.x0_seed || f.x0_norm) {
    json r = config.contains("x0") && config["x0"].is_object() ? config["x0"].value("seeded_random", json::object())
                                                                : json::object();
    if (f.x0_seed) r["seed"] = *f.x0_seed;
    if (f.x0_norm) r["norm"] = *f.x0_norm;
    config["x0"] = json{{"seeded_random", r}};
  }
  if (!f.solver.empty() && config.contains("runs") && config["runs"].is_array())
    for (auto& run : config["runs"])
      if (run.is_object()) run.update(f.solver);
}

std::vector<std::string> run_names(const std::vector<SolverConfig>& runs) {
  std::map<std::string, int> count;
  for (const auto& r : runs) ++count[std::string(to_string(r.method))];
  std::vector<std::string> names;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string name(to_string(runs[i].method));
    if (count[name] > 1) name += "_" + std::to_string(i);
    names.push_back(name);
  }
  return names;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("out_dir: cannot create '" + dir.string() + "'");
  const fs::path probe = dir / ".ahb_write_probe";
  write_file_atomic(probe, "");
  fs::remove(probe, ec);
}

// Runs every configuration on the shared problem, one thread per run.
std::vector<Trace> run_all(const Objective& obj, const std::vector<SolverConfig>& runs, const Vector& x0) {
  if (runs.size() == 1) return {run_solver(obj, runs[0], x0)};
  std::vector<std::future<Trace>> jobs;
  for (const auto& cfg : runs)
    jobs.push_back(std::async(std::launch::async, [&obj, &x0, cfg] { return run_solver(obj, cfg, x0); }));
  std::vector<Trace> traces;
  std::exception_ptr first;
  for (auto& job : jobs) {
    try {
      traces.push_back(job.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return traces;
}

int run_experiment(const ExperimentConfig& cfg, bool compare, std::ostream& out) {
  if (!cfg.has_problem) throw InvalidSpec("problem: missing (set it in the config or with --problem)");
  std::vector<SolverConfig> runs = cfg.runs;
  if (runs.empty()) throw InvalidSpec("runs: missing");
  if (!compare && runs.size() != 1)
    throw InvalidSpec("runs: solve takes exactly one run, got " + std::to_string(runs.size()) + "; use compare");

  const Objective obj = make_objective(cfg.problem);
  const Vector x0 = make_x0(cfg.x0, obj.dim);
  for (const auto& r : runs) check_run_preconditions(obj, r, x0);
  prepare_out_dir(cfg.out_dir);

  std::vector<Trace> traces = run_all(obj, runs, x0);
  const auto names = run_names(runs);
  json summaries = json::object();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Trace& t = traces[i];
    t.meta.problem = cfg.problem;
    if (cfg.x0.kind == X0Spec::Kind::seeded_random) t.meta.x0_seed = static_cast<std::int64_t>(cfg.x0.seed);
    write_csv(t, cfg.out_dir / (names[i] + ".csv"));
    json s = summarize(t);
    write_file_atomic(cfg.out_dir / (names[i] + ".summary.json"), s.dump(2) + "\n");
    summaries[names[i]] = std::move(s);
  }
  if (compare) {
    write_file_atomic(cfg.out_dir / "compare.json", summaries.dump(2) + "\n");
    out << summaries.dump(2) << "\n";
  } else {
    out << summaries.begin()->dump(2) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// certify

struct CertifyFlags {
  ProblemFlags problem;
  std::vector<double> xbar;
  double r = 1.0;
  std::string eta = "inf";
  double phi_c = 1.0;
  double phi_alpha = 0.5;
  std::int64_t samples = 1000;
  std::optional<double> growth_c;
  std::optional<double> growth_alpha;
  double factor = 1.0;
  std::vector<double> x;
  std::vector<double> taus{1.0, 0.1, 0.01, 0.001};
  int iters = 200;
  double lambda = 1.0;
  double delta0 = 1.0;
  double c = 0.1;
  double theta = 2.0;
  std::int64_t steps = 10000;
};

void add_slice_flags(CLI::App* app, CertifyFlags& f) {
  add_problem_flags(app, f.problem);
  app->add_option("--xbar", f.xbar, "reference point, comma separated (default: the minimizer)")->delimiter(',');
  app->add_option("--r", f.r, "ball radius")->capture_default_str();
  app->add_option("--samples", f.samples, "number of samples")->capture_default_str();
}

void add_phi_flags(CLI::App* app, CertifyFlags& f) {
  app->add_option("--phi-c", f.phi_c, "phi(t) = c t^alpha: c")->capture_default_str();
  app->add_option("--phi-alpha", f.phi_alpha, "phi(t) = c t^alpha: alpha")->capture_default_str();
}

Objective certify_objective(const json& config) {
  if (!config.contains("problem")) throw InvalidSpec("problem: missing (set it in the config or with --problem)");
  return make_objective(config.at("problem").get<ProblemSpec>());
}

Vector point_or_minimizer(const std::vector<double>& v, const Objective& obj, const char* name) {
  if (v.empty()) return obj.require_minimizer();
  if (static_cast<Eigen::Index>(v.size()) != obj.dim)
    throw InvalidSpec(std::string(name) + ": has " + std::to_string(v.size()) + " entries, problem dim is " +
                      std::to_string(obj.dim));
  return Eigen::Map<const Vector>(v.data(), obj.dim);
}

int emit_report(const CertReport& report, json extra, std::ostream& out) {
  json j = report;
  for (auto& [k, v] : extra.items()) j[k] = v;
  out << j.dump(2) << "\n";
  return report.violations > 0 ? kViolations : kOk;
}

int run_certify(const std::string& which, const CertifyFlags& f, json config, std::uint64_t seed,
                std::ostream& out) {
  apply_problem_flags(config, f.problem);
  if (which == "rate") {
    auto res = verify_recursive_rate(f.delta0, f.c, f.theta, f.steps);
    return emit_report(res.report,
                       {{"check", "rate"},
                        {"c_tilde", res.c_tilde},
                        {"argmax_k", res.argmax_k},
                        {"tail_slope", res.tail_slope ? json(*res.tail_slope) : json(nullptr)}},
                       out);
  }

  const Objective obj = certify_objective(config);
  const HolderFunction phi{f.phi_c, f.phi_alpha};
  if (which == "growth-ppa") {
    const Vector x = point_or_minimizer(f.x, obj, "--x");
    auto res = certify_growth_via_ppa(obj, x, phi, f.taus, f.iters);
    json per_tau = json::array();
    for (const auto& t : res.per_tau)
      per_tau.push_back({{"tau", t.tau},
                         {"path_length", t.path_length},
                         {"first_step", t.first_step},
                         {"bound", t.bound},
                         {"slack", t.slack}});
    return emit_report(res.report,
                       {{"check", "growth-ppa"}, {"per_tau", per_tau}, {"slack_monotone", res.slack_monotone}},
                       out);
  }

  const Vector xbar = point_or_minimizer(f.xbar, obj, "--xbar");
  if (which == "moreau")
    return emit_report(check_moreau_exponent(obj, f.lambda, xbar, f.r, f.samples, seed), {{"check", "moreau"}},
                       out);

  const double eta = to_extended(f.eta, "--eta");
  if (which == "growth")
    return emit_report(certify_growth_direct(obj, xbar, f.r, eta, phi, f.factor, f.samples, seed),
                       {{"check", "growth"}}, out);
  if (f.growth_c || f.growth_alpha) {
    if (!f.growth_c || !f.growth_alpha) throw InvalidSpec("--growth-c and --growth-alpha go together");
    return emit_report(check_growth_implies_kl(obj, xbar, f.r, eta, *f.growth_c, *f.growth_alpha, f.samples, seed),
                       {{"check", "growth-implies-kl"}}, out);
  }
  return emit_report(check_kl(obj, xbar, f.r, eta, phi, f.samples, seed), {{"check", "kl"}}, out);
}

// ---------------------------------------------------------------------------
// fit-rate

struct FitRateFlags {
  std::string trace;
  std::string model;
  std::int64_t k_min = 0;
  std::int64_t k_max = std::numeric_limits<std::int64_t>::max();
};

int run_fit_rate(const FitRateFlags& f, std::ostream& out) {
  const Trace trace = read_csv(f.trace);
  const RateFit fit = fit_rate_from_trace(trace, parse_rate_model(f.model), f.k_min, f.k_max);
  out << json(fit).dump(2) << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive heavy ball solvers, proximal tools and growth/KL certification", "ahb"};
  app.require_subcommand(1);
  GlobalFlags global;
  app.add_option("--config", global.config, "experiment config JSON");
  app.add_option("--out", global.out, "output directory (overrides out_dir)");
  app.add_option_function<std::uint64_t>("--seed", [&global](std::uint64_t v) { global.seed = v; },
                                         "problem seed (solve, compare) or sampler seed (certify)");

  ProblemFlags solve_problem, compare_problem;
  RunFlags solve_run, compare_run;
  auto* solve = app.add_subcommand("solve", "run one solver configuration and write its trace");
  auto* compare = app.add_subcommand("compare", "run several configurations on one problem");
  for (auto [cmd, pf, rf] : {std::tuple{solve, &solve_problem, &solve_run},
                             std::tuple{compare, &compare_problem, &compare_run}}) {
    cmd->fallthrough();
    add_problem_flags(cmd, *pf);
    add_run_flags(cmd, *rf);
  }

  auto* certify = app.add_subcommand("certify", "check KL or growth inequalities; exit 3 on violations");
  certify->fallthrough();
  certify->require_subcommand(1);
  CertifyFlags cf;
  auto* kl = certify->add_subcommand("kl", "KL inequality on a level slice");
  auto* growth = certify->add_subcommand("growth", "growth bound d(x, S) <= factor phi(gap) on a level slice");
  auto* growth_ppa = certify->add_subcommand("growth-ppa", "growth bound through proximal point paths");
  auto* moreau = certify->add_subcommand("moreau", "growth exponent of the Moreau envelope");
  auto* rate = certify->add_subcommand("rate", "power-rate recursion Delta+ = Delta - C Delta^theta");
  for (auto* sub : {kl, growth, growth_ppa, moreau, rate}) sub->fallthrough();
  for (auto* sub : {kl, growth}) {
    add_slice_flags(sub, cf);
    add_phi_flags(sub, cf);
    sub->add_option("--eta", cf.eta, "level-slice height (number or inf)")->capture_default_str();
  }
  kl->add_option_function<double>("--growth-c", [&cf](double v) { cf.growth_c = v; },
                                  "check the KL inequality implied by growth with constant C");
  kl->add_option_function<double>("--growth-alpha", [&cf](double v) { cf.growth_alpha = v; },
                                  "growth exponent paired with --growth-c");
  growth->add_option("--factor", cf.factor, "multiplier of phi in the bound")->capture_default_str();
  add_problem_flags(growth_ppa, cf.problem);
  add_phi_flags(growth_ppa, cf);
  growth_ppa->add_option("--x", cf.x, "starting point, comma separated")->delimiter(',');
  growth_ppa->add_option("--tau", cf.taus, "step sizes, comma separated")->delimiter(',')->capture_default_str();
  growth_ppa->add_option("--iters", cf.iters, "proximal steps per tau")->capture_default_str();
  add_slice_flags(moreau, cf);
  moreau->add_option("--lambda", cf.lambda, "envelope parameter")->capture_default_str();
  rate->add_option("--delta0", cf.delta0, "Delta_0")->capture_default_str();
  rate->add_option("--c", cf.c, "C")->capture_default_str();
  rate->add_option("--theta", cf.theta, "theta > 1")->capture_default_str();
  rate->add_option("--steps", cf.steps, "number of steps")->capture_default_str();

  FitRateFlags ff;
  auto* fit = app.add_subcommand("fit-rate", "fit a linear or power rate to a trace's dist column");
  fit->fallthrough();
  fit->add_option("--trace", ff.trace, "trace CSV")->required();
  fit->add_option("--model", ff.model, "linear or power")->required();
  fit->add_option("--k-min", ff.k_min, "first iteration in the fit");
  fit->add_option("--k-max", ff.k_max, "last iteration in the fit");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    json config = load_config(global.config);
    if (!config.is_object()) throw InvalidSpec("config: expected a JSON object");

    if (*solve || *compare) {
      const bool is_compare = static_cast<bool>(*compare);
      apply_problem_flags(config, is_compare ? compare_problem : solve_problem);
      if (!config.contains("runs")) {
        if (is_compare) {
          config["runs"] = json::array();
          for (const auto& r : default_comparison_runs()) config["runs"].push_back(r);
        } else {
          config["runs"] = json::array({json::object()});
        }
      }
      apply_run_flags(config, is_compare ? compare_run : solve_run, global);
      return run_experiment(parse_experiment(config), is_compare, out);
    }
    if (*certify) {
      const std::uint64_t seed = global.seed.value_or(0);
      for (auto [sub, name] : {std::pair{kl, "kl"}, std::pair{growth, "growth"}, std::pair{growth_ppa, "growth-ppa"},
                               std::pair{moreau, "moreau"}, std::pair{rate, "rate"}})
        if (*sub) return run_certify(name, cf, config, seed, out);
    }
    if (*fit) return run_fit_rate(ff, out);
    err << "error: no command\n";
    return kConfigError;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const InnerSolveError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace ahb::cli
