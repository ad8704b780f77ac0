#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "jccp/gauss_markov.hpp"
#include "jccp/linalg.hpp"
#include "jccp/monte_carlo.hpp"
#include "jccp/pipeline.hpp"
#include "jccp/special_functions.hpp"
#include "support.hpp"

using namespace jccp;

namespace {

constexpr int kRuns = 10000;
constexpr std::uint64_t kSeed = 42;
constexpr int kSafetySamples = 100000;
constexpr std::uint64_t kSafetySeed = 20231;

int failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

struct Solved {
  JccpProblem problem;
  VectorXd x;
  std::string label;
};

std::vector<Solved> converged_solutions;

struct Timing {
  double worst_spectral = 0.0;
  double worst_boole = 0.0;
};

Timing timing;

MethodResult solve_recorded(const JccpProblem& p, Method method, const std::string& label, bool f16) {
  MethodResult r = solve_jccp(p, method);
  if (f16) {
    double& worst = method == Method::spectral ? timing.worst_spectral : timing.worst_boole;
    worst = std::max(worst, r.seconds);
  }
  if (r.solution.status == SolveStatus::converged) converged_solutions.push_back({p, r.solution.x, label});
  return r;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void table_orderings() {
  struct Row {
    double beta, j_s, j_b, bb_s, bb_b;
  };
  const Row published[] = {{0.6, 597.7, 729.7, 0.7737, 0.9577}, {0.8, 695.9, 788.4, 0.9107, 0.9782}};
  bool ok = true;
  std::string detail;
  for (const Row& row : published) {
    const ExampleInstance ex = example_mass_spring(row.beta);
    const MethodResult s = solve_recorded(ex.problem, Method::spectral, "mass-spring spectral", false);
    const MethodResult b = solve_recorded(ex.problem, Method::boole, "mass-spring boole", false);
    const MonteCarloReport ms = simulate_batch(ex.model, ex.spec, s.solution.x, kRuns, kSeed);
    const MonteCarloReport mb = simulate_batch(ex.model, ex.spec, b.solution.x, kRuns, kSeed);
    const double js = s.solution.cost_value, jb = b.solution.cost_value;
    const bool converged =
        s.solution.status == SolveStatus::converged && b.solution.status == SolveStatus::converged;
    const bool order = js < jb && row.beta <= ms.beta_hat && ms.beta_hat < mb.beta_hat;
    const bool close = std::abs(js - row.j_s) <= 0.05 * row.j_s && std::abs(jb - row.j_b) <= 0.05 * row.j_b &&
                       std::abs(ms.beta_hat - row.bb_s) <= 0.03 && std::abs(mb.beta_hat - row.bb_b) <= 0.03;
    ok = ok && converged && order && close;
    if (!detail.empty()) detail += "; ";
    detail += fmt("beta %.1f: J %.1f < %.1f", row.beta, js, jb);
    detail += fmt(", beta_hat %.4f < %.4f", ms.beta_hat, mb.beta_hat);
  }
  report(1, ok, "two-mass table orderings and tolerances", detail);
}

void sweep_trends() {
  bool ok = true;
  int points = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10; ++k) {
    const double beta = k == 10 ? 0.99 : std::round((0.5 + 0.05 * k) * 1e12) / 1e12;
    const ExampleInstance ex = example_f16(beta);
    const MethodResult s = solve_recorded(ex.problem, Method::spectral, "f16 spectral", true);
    const MethodResult b = solve_recorded(ex.problem, Method::boole, "f16 boole", true);
    const MonteCarloReport ms = simulate_batch(ex.model, ex.spec, s.solution.x, kRuns, kSeed);
    const MonteCarloReport mb = simulate_batch(ex.model, ex.spec, b.solution.x, kRuns, kSeed);
    const bool point_ok = s.solution.status == SolveStatus::converged &&
                          b.solution.status == SolveStatus::converged &&
                          s.solution.cost_value <= b.solution.cost_value &&
                          ms.beta_hat >= beta - 3.0 * ms.beta_hat_stderr &&
                          mb.beta_hat >= beta - 3.0 * mb.beta_hat_stderr &&
                          std::abs(ms.beta_hat - beta) <= std::abs(mb.beta_hat - beta);
    if (!point_ok) {
      std::printf("  sweep point beta %.2f: J %.3f / %.3f, beta_hat %.4f / %.4f\n", beta, s.solution.cost_value,
                  b.solution.cost_value, ms.beta_hat, mb.beta_hat);
    }
    min_gap = std::min(min_gap, b.solution.cost_value - s.solution.cost_value);
    ok = ok && point_ok;
    ++points;
  }
  report(2, ok, "f16 sweep trends",
         fmt("%.0f grid points, smallest J_boole - J_spectral %.3f", points, min_gap));
}

void single_constraint() {
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const test::SingleConstraintCase c = test::single_constraint_case(seed);
    for (Method method : {Method::spectral, Method::boole}) {
      const MethodResult r = solve_recorded(c.problem, method, "single-constraint", false);
      const double x_err = (r.solution.x - c.x_star).cwiseAbs().maxCoeff() / std::max(1.0, c.x_star.cwiseAbs().maxCoeff());
      const double j_err = std::abs(r.solution.cost_value - c.cost_star) / std::max(1.0, std::abs(c.cost_star));
      const double err = std::max(x_err, j_err);
      worst = std::max(worst, err);
      ok = ok && r.solution.status == SolveStatus::converged && err <= 1e-4;
    }
  }
  report(3, ok, "single-constraint closed form", fmt("20 problems x 2 methods, worst relative error %.2e", worst));
}

void statistical_safety() {
  bool ok = true;
  double worst_margin = 1.0;
  for (const Solved& s : converged_solutions) {
    const double beta = s.problem.beta;
    const auto est = estimate_joint_probability(s.problem, s.x, kSafetySamples, kSafetySeed);
    const double bound = beta - 3.0 * std::sqrt(beta * (1.0 - beta) / kSafetySamples);
    worst_margin = std::min(worst_margin, est.estimate - bound);
    if (est.estimate < bound) {
      std::printf("  unsafe: %s beta %.4f estimate %.5f\n", s.label.c_str(), beta, est.estimate);
      ok = false;
    }
  }
  report(4, ok, "independent sampling safety",
         fmt("%.0f converged solutions, smallest margin %.5f", static_cast<double>(converged_solutions.size()),
             worst_margin));
}

void numerics() {
  std::mt19937_64 rng(2024);
  double eig = 0.0;
  for (Eigen::Index n : {2, 5, 13, 30, 60}) {
    const SymMatrixd s(test::random_matrix(rng, n, n) * 3.0);
    const auto e = sym_eig(s);
    const MatrixXd rebuilt = e.theta * e.lambda.asDiagonal() * e.theta.transpose();
    eig = std::max(eig, (rebuilt - s.matrix()).cwiseAbs().maxCoeff());
    eig = std::max(eig, (e.theta.transpose() * e.theta - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
  }

  std::uniform_real_distribution<double> u(-1.0 + 1e-9, 1.0 - 1e-9);
  double round_trip = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double p = u(rng);
    round_trip = std::max(round_trip, std::abs(jccp::erf(erf_inv(p)) - p));
  }

  double symmetry = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double z = -10.0 + 20.0 * i / 10000.0;
    symmetry = std::max(symmetry, std::abs(std_normal_cdf(z) + std_normal_cdf(-z) - 1.0));
  }

  double semigroup = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd ac = test::random_matrix(rng, 4, 4);
    const MatrixXd bc = test::random_matrix(rng, 4, 2);
    const double dt = 0.1 + 0.2 * trial;
    const auto one = zoh_discretize(ac, bc, dt);
    const auto two = zoh_discretize(ac, bc, 2.0 * dt);
    semigroup = std::max(semigroup, (one.a * one.a - two.a).cwiseAbs().maxCoeff());
    semigroup = std::max(semigroup, (one.a * one.b + one.b - two.b).cwiseAbs().maxCoeff());
  }

  // Program costs reach 1e6 at these points, so h = 1e-5 keeps the
  // difference quotient above rounding.
  double gradient = 0.0;
  std::uniform_real_distribution<double> slack(0.55, 0.98);
  for (const char* name : {"mass-spring", "f16"}) {
    const JccpProblem p = example_by_name(name, 0.8).problem;
    for (Method method : {Method::spectral, Method::boole}) {
      for (SlackForm form : {SlackForm::probability, SlackForm::quantile}) {
        const BuiltProgram prog = build_program(p, method, std::nullopt, form);
        const Eigen::Index n_x = p.n_x();
        for (int k = 0; k < 100; ++k) {
          VectorXd z(prog.nlp.dim);
          z.head(n_x) = test::random_vector(rng, n_x);
          for (Eigen::Index i = n_x; i < z.size(); ++i) z(i) = slack_from_probability(slack(rng), form);
          gradient = std::max(gradient, check_gradients(prog.nlp, z, 1e-5));
        }
      }
    }
  }

  const bool ok = eig <= 1e-10 && round_trip <= 1e-12 && symmetry <= 1e-14 && semigroup <= 1e-10 && gradient <= 1e-6;
  report(5, ok, "numerics properties",
         fmt("eig %.1e, erf_inv %.1e, cdf %.1e, zoh %.1e", eig, round_trip, symmetry, semigroup) +
             fmt(", gradients %.1e", gradient));
}

void counterexample() {
  MatrixXd rot(2, 2);
  rot << -std::sqrt(3.0) / 2.0, 0.5, 0.5, std::sqrt(3.0) / 2.0;
  const VectorXd v = (VectorXd(2) << 1.0, -1.0).finished();
  const VectorXd image = rot * v;
  const VectorXd preimage = rot.inverse() * VectorXd::Zero(2);
  const bool ok = (image.array() <= 0.0).all() && !(v.array() <= preimage.array()).all();
  report(6, ok, "rotated orthant counterexample", fmt("rotated v = (%.4f, %.4f)", image(0), image(1)));
}

void performance() {
  const bool ok = timing.worst_spectral < 30.0 && timing.worst_boole < 10.0;
  report(7, ok, "f16 solve times",
         fmt("worst spectral %.2f s, worst boole %.2f s", timing.worst_spectral, timing.worst_boole));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  table_orderings();
  sweep_trends();
  single_constraint();
  statistical_safety();
  numerics();
  counterexample();
  performance();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 7 criteria passed in %.1f s\n", 7 - failures, total);
  return failures == 0 ? 0 : 1;
}
