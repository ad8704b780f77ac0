#include "jccp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <string>

namespace jccp {

std::string_view to_string(Method m) { return m == Method::spectral ? "spectral" : "boole"; }

Method parse_method(std::string_view name) {
  if (name == "spectral") return Method::spectral;
  if (name == "boole") return Method::boole;
  throw ValidationError("unknown method '" + std::string(name) + "' (expected spectral or boole)");
}

MatrixXd cost_scaling(const JccpProblem& p) {
  if (!p.quadratic_cost) return {};
  const MatrixXd& h = p.quadratic_cost->H;
  const double shift = 1e-8 * std::max(h.diagonal().cwiseAbs().maxCoeff(), 1.0);
  const Eigen::LLT<MatrixXd> llt(h + shift * MatrixXd::Identity(h.rows(), h.cols()));
  if (llt.info() != Eigen::Success) return {};
  return llt.matrixU();
}

BuiltProgram build_program(const JccpProblem& p, Method method, const std::optional<VectorXd>& x0,
                           SlackForm form) {
  const VectorXd start_x = x0.value_or(VectorXd::Zero(p.n_x()));
  BuiltProgram out;
  if (method == Method::spectral) {
    const SpectralNlp nlp = build_spectral_nlp(normalize_problem(p));
    out = {nlp.as_nlp(form), nlp.initial_point(start_x, form)};
  } else {
    const BooleNlp nlp = build_boole_nlp(p);
    out = {nlp.as_nlp(form), nlp.initial_point(start_x, form)};
  }
  out.nlp.primary_scaling = cost_scaling(p);
  return out;
}

namespace {

template <class Program>
void solve_into(MethodResult& out, const Program& program, const JccpProblem& p, const SolverOptions& opts,
                const VectorXd& start_x) {
  Nlp nlp = program.as_nlp(SlackForm::quantile);
  nlp.primary_scaling = cost_scaling(p);
  SolveResult r = multistart_solve(nlp, program.initial_point(start_x, SlackForm::quantile), opts);
  for (double& v : r.solution.slacks) v = slack_probability(v, SlackForm::quantile);
  VectorXd z(program.dim());
  z << r.solution.x, r.solution.slacks;
  out.certificate = certify_feasibility(program, z);
  out.solution = std::move(r.solution);
  out.trace = std::move(r.trace);
}

}  // namespace

MethodResult solve_jccp(const JccpProblem& p, Method method, const SolverOptions& opts,
                        const std::optional<VectorXd>& x0) {
  const auto t0 = std::chrono::steady_clock::now();
  MethodResult out;
  out.method = method;
  const VectorXd start_x = x0.value_or(VectorXd::Zero(p.n_x()));
  if (method == Method::spectral) {
    solve_into(out, build_spectral_nlp(normalize_problem(p)), p, opts, start_x);
  } else {
    solve_into(out, build_boole_nlp(p), p, opts, start_x);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace jccp
