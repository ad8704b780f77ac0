#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string_view>

#include "CLI11.hpp"
#include "json.hpp"
#include "jccp/gauss_markov.hpp"
#include "jccp/monte_carlo.hpp"
#include "jccp/pipeline.hpp"

namespace jccp::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGradientTolerance = 1e-6;

struct Common {
  std::uint64_t seed = 42;
  std::string out = ".";
  double kkt_tol = 1e-6;
  double cons_tol = 1e-8;
  int multistart = 5;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("--seed", c.seed, "Seed for multistart and Monte Carlo")->capture_default_str();
  cmd.add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd.add_option("--kkt-tol", c.kkt_tol, "KKT residual tolerance")->capture_default_str();
  cmd.add_option("--cons-tol", c.cons_tol, "Constraint violation tolerance")->capture_default_str();
  cmd.add_option("--multistart", c.multistart, "Number of solver starts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

SolverOptions solver_options(const Common& c) {
  SolverOptions o;
  o.kkt_tol = c.kkt_tol;
  o.cons_tol = c.cons_tol;
  o.multistart_count = c.multistart;
  o.seed = c.seed;
  return o;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string csv_line(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    line += cells[i];
  }
  return line + '\n';
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) { fs::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(root_ / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (root_ / name).string());
    f << content;
    files_.push_back(name);
  }

  void write_manifest(Json manifest) {
    manifest["outputs"] = files_;
    std::ofstream f(root_ / "manifest.json", std::ios::binary);
    if (!f) throw Error("cannot write " + (root_ / "manifest.json").string());
    f << manifest.dump(2) << '\n';
  }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Json manifest_for(const std::string& command_line, const std::string& command, const Common& c,
                  const std::string& source) {
  Json m;
  m["command_line"] = command_line;
  m["command"] = command;
  m["seed"] = c.seed;
  m["tolerances"] = {{"kkt_tol", c.kkt_tol}, {"cons_tol", c.cons_tol}};
  m["multistart"] = c.multistart;
  m["problem_source"] = source;
  return m;
}

Json solution_json(const MethodResult& r) {
  Json j;
  j["method"] = std::string(to_string(r.method));
  j["status"] = std::string(to_string(r.solution.status));
  j["x"] = to_std(r.solution.x);
  j["slacks"] = to_std(r.solution.slacks);
  j["cost"] = r.solution.cost_value;
  j["kkt_residual"] = r.solution.kkt_residual;
  j["constraint_violation"] = r.solution.constraint_violation;
  j["certificate"] = {{"max_violation", r.certificate.max_violation},
                      {"product", r.certificate.product},
                      {"pairing", r.certificate.pairing},
                      {"linear", r.certificate.linear},
                      {"bounds", r.certificate.bounds}};
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot read problem file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<Method> methods_for(const std::string& name) {
  if (name == "both") return {Method::spectral, Method::boole};
  return {parse_method(name)};
}

bool is_example(const std::string& name) { return name == "mass-spring" || name == "f16"; }

std::string status_name(const MethodResult& r) { return std::string(to_string(r.solution.status)); }

bool converged(const MethodResult& r) { return r.solution.status == SolveStatus::converged; }

// --- solve ---------------------------------------------------------------

struct SolveArgs {
  std::string problem;
  std::string method = "spectral";
  int mc_runs = 0;
};

int cmd_solve(const SolveArgs& a, const Common& c, const std::string& command_line) {
  Stopwatch clock;
  const JccpProblem p = load_problem(read_file(a.problem));
  const Method method = parse_method(a.method);
  const MethodResult r = solve_jccp(p, method, solver_options(c));
  std::cout << to_string(method) << ": J = " << format_number(r.solution.cost_value)
            << ", status = " << status_name(r) << '\n';

  ProbabilityEstimate est;
  est.estimate = kNaN;
  est.standard_error = kNaN;
  if (a.mc_runs > 0) {
    est = estimate_joint_probability(p, r.solution.x, a.mc_runs, c.seed);
    std::cout << "Monte Carlo: beta_hat = " << format_number(est.estimate) << " (" << a.mc_runs << " samples)\n";
  }

  OutputDir out(c.out);
  out.write("solution.json", solution_json(r).dump(2) + "\n");
  std::string report = csv_line({"method", "status", "cost", "kkt_residual", "constraint_violation",
                                 "certified_violation", "mc_samples", "beta_hat", "beta_hat_stderr"});
  report += csv_line({std::string(to_string(method)), status_name(r), format_number(r.solution.cost_value),
                      format_number(r.solution.kkt_residual), format_number(r.solution.constraint_violation),
                      format_number(r.certificate.max_violation), std::to_string(a.mc_runs),
                      format_number(est.estimate), format_number(est.standard_error)});
  out.write("report.csv", report);

  Json m = manifest_for(command_line, "solve", c, a.problem);
  m["method"] = std::string(to_string(method));
  m["solver_status"] = status_name(r);
  m["wall_seconds"] = clock.seconds();
  out.write_manifest(m);
  return converged(r) ? kOk : kNotConverged;
}

// --- example ---------------------------------------------------------------

struct ExampleArgs {
  std::string name;
  double beta = 0.6;
  std::string method = "both";
  int mc_runs = 10000;
};

struct MethodRun {
  MethodResult result;
  MonteCarloReport mc;
};

MethodRun run_example_method(const ExampleInstance& ex, Method method, const Common& c, int mc_runs) {
  MethodRun run;
  run.result = solve_jccp(ex.problem, method, solver_options(c));
  run.mc = simulate_batch(ex.model, ex.spec, run.result.solution.x, mc_runs, c.seed);
  return run;
}

int cmd_example(const ExampleArgs& a, const Common& c, const std::string& command_line) {
  Stopwatch clock;
  const ExampleInstance ex = example_by_name(a.name, a.beta);
  const std::vector<Method> methods = methods_for(a.method);

  std::vector<MethodRun> runs;
  for (Method m : methods) {
    runs.push_back(run_example_method(ex, m, c, a.mc_runs));
    const MethodRun& r = runs.back();
    std::cout << to_string(m) << ": J = " << format_number(r.result.solution.cost_value)
              << ", beta_hat = " << format_number(r.mc.beta_hat) << ", status = " << status_name(r.result) << '\n';
  }

  OutputDir out(c.out);
  std::string table = csv_line({"method", "J", "beta_hat", "stderr", "status", "mean_realized_cost"});
  for (const MethodRun& r : runs) {
    table += csv_line({std::string(to_string(r.result.method)), format_number(r.result.solution.cost_value),
                       format_number(r.mc.beta_hat), format_number(r.mc.beta_hat_stderr), status_name(r.result),
                       format_number(r.mc.mean_realized_cost)});
  }
  out.write("table1.csv", table);

  const Eigen::Index outputs = ex.model.r();
  for (Eigen::Index k = 0; k < outputs; ++k) {
    std::string env = csv_line({"method", "time", "output", "mean", "lo", "hi"});
    for (const MethodRun& r : runs) {
      const Envelope& e = r.mc.envelope;
      for (Eigen::Index t = 0; t < e.mean.rows(); ++t) {
        env += csv_line({std::string(to_string(r.result.method)), std::to_string(t + 1), std::to_string(k + 1),
                         format_number(e.mean(t, k)), format_number(e.lo(t, k)), format_number(e.hi(t, k))});
      }
    }
    out.write("envelope_y" + std::to_string(k + 1) + ".csv", env);
  }
  for (const MethodRun& r : runs) {
    Json s = solution_json(r.result);
    s["beta"] = a.beta;
    s["mc_runs"] = a.mc_runs;
    s["beta_hat"] = r.mc.beta_hat;
    s["beta_hat_stderr"] = r.mc.beta_hat_stderr;
    out.write("solution_" + std::string(to_string(r.result.method)) + ".json", s.dump(2) + "\n");
  }

  Json m = manifest_for(command_line, "example", c, "example:" + a.name);
  m["method"] = a.method;
  m["beta"] = a.beta;
  m["mc_runs"] = a.mc_runs;
  Json statuses = Json::object();
  bool all_ok = true;
  for (const MethodRun& r : runs) {
    statuses[std::string(to_string(r.result.method))] = status_name(r.result);
    all_ok = all_ok && converged(r.result);
  }
  m["solver_status"] = statuses;
  m["wall_seconds"] = clock.seconds();
  out.write_manifest(m);
  return all_ok ? kOk : kNotConverged;
}

// --- sweep -------------------------------------------------------------------

struct SweepArgs {
  std::string name;
  std::string grid = "0.5:0.99:0.05";
  std::string method = "both";
  int mc_runs = 10000;
};

struct SweepCell {
  double cost = kNaN;
  double beta_hat = kNaN;
  double stderr_hat = kNaN;
  std::string status = "error";
};

int cmd_sweep(const SweepArgs& a, const Common& c, const std::string& command_line) {
  Stopwatch clock;
  const std::vector<double> grid = parse_grid(a.grid);
  if (!is_example(a.name)) example_by_name(a.name, 0.5);  // throws with the accepted names

  std::string csv = csv_line({"beta", "J_spectral", "J_boole", "beta_hat_spectral", "beta_hat_boole",
                              "stderr_spectral", "stderr_boole", "status_spectral", "status_boole"});
  bool all_ok = true;
  for (double beta : grid) {
    SweepCell cells[2];
    const Method methods[2] = {Method::spectral, Method::boole};
    for (int i = 0; i < 2; ++i) {
      if (a.method != "both" && a.method != to_string(methods[i])) {
        cells[i].status = "skipped";
        continue;
      }
      try {
        const ExampleInstance ex = example_by_name(a.name, beta);
        const MethodRun r = run_example_method(ex, methods[i], c, a.mc_runs);
        cells[i] = {r.result.solution.cost_value, r.mc.beta_hat, r.mc.beta_hat_stderr, status_name(r.result)};
      } catch (const std::exception& e) {
        std::cerr << "beta " << format_number(beta) << ", " << to_string(methods[i]) << ": " << e.what() << '\n';
      }
      all_ok = all_ok && cells[i].status == "converged";
    }
    std::cout << "beta " << format_number(beta) << ": J = " << format_number(cells[0].cost) << " / "
              << format_number(cells[1].cost) << ", beta_hat = " << format_number(cells[0].beta_hat) << " / "
              << format_number(cells[1].beta_hat) << '\n';
    csv += csv_line({format_number(beta), format_number(cells[0].cost), format_number(cells[1].cost),
                     format_number(cells[0].beta_hat), format_number(cells[1].beta_hat),
                     format_number(cells[0].stderr_hat), format_number(cells[1].stderr_hat), cells[0].status,
                     cells[1].status});
  }

  OutputDir out(c.out);
  out.write("sweep.csv", csv);
  Json m = manifest_for(command_line, "sweep", c, "example:" + a.name);
  m["method"] = a.method;
  m["grid"] = grid;
  m["mc_runs"] = a.mc_runs;
  m["solver_status"] = all_ok ? "converged" : "partial";
  m["wall_seconds"] = clock.seconds();
  out.write_manifest(m);
  return all_ok ? kOk : kNotConverged;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::string target;
  std::string method = "spectral";
  double beta = 0.9;
  double step = 1e-6;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  const JccpProblem p = is_example(a.target) ? example_by_name(a.target, a.beta).problem
                                             : load_problem(read_file(a.target));
  const Method method = parse_method(a.method);
  double worst = 0.0;
  for (SlackForm form : {SlackForm::probability, SlackForm::quantile}) {
    BuiltProgram prog = build_program(p, method, std::nullopt, form);
    if (a.corrupt) {
      prog.nlp.constraints = [inner = prog.nlp.constraints](const VectorXd& z, VectorXd& g, MatrixXd* jac) {
        inner(z, g, jac);
        if (jac != nullptr && jac->size() > 0) {
          double& entry = (*jac)(jac->rows() - 1, 0);
          entry += 0.01 * (1.0 + std::abs(entry));
        }
      };
    }
    const double err = check_gradients(prog.nlp, prog.start, a.step);
    worst = std::max(worst, err);
    std::cout << to_string(method) << (form == SlackForm::probability ? " (probability slacks)" : " (quantile slacks)")
              << ": max relative error " << format_number(err) << '\n';
  }
  const bool ok = worst <= kGradientTolerance;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kOk : kGradientFailure;
}

// --- emit --------------------------------------------------------------------

struct EmitArgs {
  std::string name;
  double beta = 0.6;
};

int cmd_emit(const EmitArgs& a, const Common& c, const std::string& command_line) {
  const ExampleInstance ex = example_by_name(a.name, a.beta);
  OutputDir out(c.out);
  out.write("problem.json", serialize_problem(ex.problem) + "\n");
  Json m = manifest_for(command_line, "emit", c, "example:" + a.name);
  m["beta"] = a.beta;
  out.write_manifest(m);
  std::cout << "wrote " << (fs::path(c.out) / "problem.json").string() << '\n';
  return kOk;
}

std::string join(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<double> parse_grid(const std::string& text) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw ValidationError("grid must be lo:hi:step, got '" + text + "'");
  }
  if (!(lo >= 0.0) || !(hi <= 0.99) || !(lo <= hi)) {
    throw ValidationError("grid must satisfy 0 <= lo <= hi <= 0.99");
  }
  if (!(step > 0.0) && lo != hi) throw ValidationError("grid step must be positive");

  std::vector<double> out;
  const double tol = 1e-9;
  for (int k = 0;; ++k) {
    double v = lo + k * step;
    if (v > hi + tol || (lo == hi && k > 0)) break;
    v = std::round(v * 1e12) / 1e12;
    out.push_back(std::min(v, hi));
    if (lo == hi) break;
  }
  if (hi - out.back() > tol) out.push_back(hi);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Joint chance-constrained programs: spectral and Boole safe approximations"};
  app.name("jccp");
  app.require_subcommand(1);

  Common common;
  SolveArgs solve_args;
  ExampleArgs example_args;
  SweepArgs sweep_args;
  GradcheckArgs grad_args;
  EmitArgs emit_args;

  CLI::App* solve = app.add_subcommand("solve", "Solve a problem file");
  solve->add_option("problem", solve_args.problem, "Problem file (JSON)")->required();
  solve->add_option("--method", solve_args.method, "spectral or boole")
      ->check(CLI::IsMember({"spectral", "boole"}))
      ->capture_default_str();
  solve->add_option("--mc-runs", solve_args.mc_runs, "Monte Carlo samples (0 = skip)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_common(*solve, common);

  CLI::App* example = app.add_subcommand("example", "Run a built-in example");
  example->add_option("name", example_args.name, "mass-spring or f16")
      ->required()
      ->check(CLI::IsMember({"mass-spring", "f16"}));
  example->add_option("--beta", example_args.beta, "Confidence level")->capture_default_str();
  example->add_option("--method", example_args.method, "spectral, boole or both")
      ->check(CLI::IsMember({"spectral", "boole", "both"}))
      ->capture_default_str();
  example->add_option("--mc-runs", example_args.mc_runs, "Monte Carlo runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(*example, common);

  CLI::App* sweep = app.add_subcommand("sweep", "Sweep beta on a built-in example");
  sweep->add_option("name", sweep_args.name, "mass-spring or f16")
      ->required()
      ->check(CLI::IsMember({"mass-spring", "f16"}));
  sweep->add_option("--grid", sweep_args.grid, "lo:hi:step")->capture_default_str();
  sweep->add_option("--method", sweep_args.method, "spectral, boole or both")
      ->check(CLI::IsMember({"spectral", "boole", "both"}))
      ->capture_default_str();
  sweep->add_option("--mc-runs", sweep_args.mc_runs, "Monte Carlo runs per point")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(*sweep, common);

  CLI::App* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference derivatives");
  grad->add_option("target", grad_args.target, "Example name or problem file")->required();
  grad->add_option("--method", grad_args.method, "spectral or boole")
      ->check(CLI::IsMember({"spectral", "boole"}))
      ->capture_default_str();
  grad->add_option("--beta", grad_args.beta, "Confidence level for examples")->capture_default_str();
  grad->add_option("--step", grad_args.step, "Central-difference step")->capture_default_str();
  grad->add_flag("--corrupt-jacobian", grad_args.corrupt)->group("");

  CLI::App* emit = app.add_subcommand("emit", "Write a built-in example as a problem file");
  emit->add_option("name", emit_args.name, "mass-spring or f16")
      ->required()
      ->check(CLI::IsMember({"mass-spring", "f16"}));
  emit->add_option("--beta", emit_args.beta, "Confidence level")->capture_default_str();
  add_common(*emit, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }

  const std::string command_line = join(argc, argv);
  try {
    if (*solve) return cmd_solve(solve_args, common, command_line);
    if (*example) return cmd_example(example_args, common, command_line);
    if (*sweep) return cmd_sweep(sweep_args, common, command_line);
    if (*grad) return cmd_gradcheck(grad_args);
    if (*emit) return cmd_emit(emit_args, common, command_line);
  } catch (const jccp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  argv.reserve(copy.size() + 1);
  for (std::string& s : copy) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace jccp::cli
