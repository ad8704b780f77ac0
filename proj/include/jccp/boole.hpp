#pragma once

#include "jccp/nlp_solver.hpp"
#include "jccp/problem.hpp"
#include "jccp/spectral.hpp"

namespace jccp {

/// Risk-allocation program over z = [x, b (n_m)] with g(z) <= 0 rows
///   [ sum_i (1 - b_i) - (1 - beta) ]                                  (1)
///   [ M_i mu(x) - m_i + sqrt(2 M_i Sigma M_i^T) erf_inv(2 b_i - 1) ]  (n_m)
/// and b in [eps, 1 - eps]. Works on the raw (M, m); no normalization needed.
class BooleNlp {
 public:
  explicit BooleNlp(JccpProblem problem, double eps = kSlackEpsilon);

  const JccpProblem& base() const { return problem_; }
  const VectorXd& row_std() const { return row_std_; }
  double eps() const { return eps_; }

  Eigen::Index n_x() const { return problem_.n_x(); }
  Eigen::Index n_m() const { return problem_.n_m(); }
  Eigen::Index dim() const { return n_x() + n_m(); }
  Eigen::Index num_constraints() const { return 1 + n_m(); }

  double cost(const VectorXd& z, VectorXd* grad) const;
  void evaluate(const VectorXd& z, VectorXd& g, MatrixXd* jac,
                SlackForm form = SlackForm::probability) const;
  VectorXd eval_constraints(const VectorXd& z) const;
  MatrixXd eval_constraint_jacobian(const VectorXd& z) const;

  /// x0 followed by the uniform allocation b_i = 1 - (1 - beta) / n_m.
  VectorXd initial_point(const VectorXd& x0, SlackForm form = SlackForm::probability) const;
  VectorXd initial_point() const { return initial_point(VectorXd::Zero(n_x())); }

  Nlp as_nlp(SlackForm form = SlackForm::probability) const;

 private:
  JccpProblem problem_;
  VectorXd row_std_;
  double eps_;
};

BooleNlp build_boole_nlp(const JccpProblem& p);

/// max_violation covers the budget row, the per-row constraints and [0, 1]
/// bounds; `product` carries the budget residual and `pairing` is unused.
FeasibilityReport certify_feasibility(const BooleNlp& nlp, const VectorXd& z);

}  // namespace jccp
