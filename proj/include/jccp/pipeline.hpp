#pragma once

#include <optional>
#include <string_view>

#include "jccp/boole.hpp"
#include "jccp/nlp_solver.hpp"
#include "jccp/spectral.hpp"

namespace jccp {

enum class Method { spectral, boole };

std::string_view to_string(Method m);
/// "spectral" or "boole"; throws ValidationError otherwise.
Method parse_method(std::string_view name);

struct MethodResult {
  Method method = Method::spectral;
  Solution solution;
  SolveTrace trace;
  FeasibilityReport certificate;
  double seconds = 0.0;
};

/// Upper Cholesky factor of the quadratic cost's H (lightly shifted), used
/// as the solver's primary_scaling; empty without a quadratic cost.
MatrixXd cost_scaling(const JccpProblem& p);

/// Builds the chosen program (normalizing first for the spectral one),
/// multistart-solves it from x0 (zeros by default) with quantile slacks and
/// certifies the result. Reported slacks are probabilities.
MethodResult solve_jccp(const JccpProblem& p, Method method, const SolverOptions& opts = {},
                        const std::optional<VectorXd>& x0 = std::nullopt);

/// The generic program for a method, as handed to the solver, plus its
/// canonical start.
struct BuiltProgram {
  Nlp nlp;
  VectorXd start;
};
BuiltProgram build_program(const JccpProblem& p, Method method,
                           const std::optional<VectorXd>& x0 = std::nullopt,
                           SlackForm form = SlackForm::quantile);

}  // namespace jccp
