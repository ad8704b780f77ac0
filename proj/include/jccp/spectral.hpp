#pragma once

#include "jccp/nlp_solver.hpp"
#include "jccp/problem.hpp"

namespace jccp {

/// Slack box [eps, 1 - eps] keeping erf_inv(2b - 1) finite.
inline constexpr double kSlackEpsilon = 1e-9;
/// Floor on each (b1 + b2 - 1) inside the logarithm of the product row.
inline constexpr double kProductFloor = 1e-12;
/// Eigenvalues below this fraction of max(lambda_max, 1) are set to zero.
inline constexpr double kLambdaTolerance = 1e-12;

/// How the solver sees each slack: as the probability b itself, or as the
/// quantile t = erf_inv(2 b - 1), which stays well scaled as b -> 1.
enum class SlackForm { probability, quantile };

/// erf_inv(2b - 1) and 1 - b for one slack variable v, with their derivatives
/// in v, after clamping v to its box.
struct SlackTerms {
  double q = 0.0;
  double dq = 0.0;
  double c = 0.0;
  double dc = 0.0;
};
SlackTerms slack_terms(double v, SlackForm form, double eps);

/// Box of one slack variable: [eps, 1 - eps] mapped into the form.
double slack_lower(SlackForm form, double eps);
double slack_upper(SlackForm form, double eps);

/// The probability b of a slack variable given in `form`.
double slack_probability(double v, SlackForm form);
/// The slack variable in `form` for probability b.
double slack_from_probability(double b, SlackForm form);

/// Everything about the spectral reformulation that does not depend on the
/// decision vector: Sigma = theta diag(lambda) theta^T, Mbar = M theta, the
/// sign table (1 where Mbar >= 0, else 2) and sqrt(2 lambda_j) |Mbar_ij|.
struct SpectralData {
  MatrixXd theta;
  VectorXd lambda;
  MatrixXd Mbar;
  Eigen::MatrixXi sigma_table;
  MatrixXd coef;
};

/// Requires n_m >= n_phi (see normalize_problem).
SpectralData precompute_spectral(const JccpProblem& p);

struct FeasibilityReport {
  double max_violation = 0.0;
  double product = 0.0;  // beta - prod_j (b1_j + b2_j - 1)
  double pairing = 0.0;  // max_j 1 - b1_j - b2_j
  double linear = 0.0;   // max_i of the per-row residual
  double bounds = 0.0;   // distance outside [0, 1] for any slack
};

/// Deterministic program over z = [x, b1 (n_phi), b2 (n_phi)] with
/// constraints g(z) <= 0 ordered as
///   [ log beta - sum_j log(max(b1_j + b2_j - 1, floor)) ]      (1)
///   [ 1 - b1_j - b2_j ]                                        (n_phi)
///   [ sum_j coef_ij erf_inv(2 b^{s_ij}_j - 1) + Mbar_i theta^T mu(x) - m_i ]  (n_m)
/// For beta == 0 the product row is the constant -1 (it is implied by the
/// pairing rows).
class SpectralNlp {
 public:
  SpectralNlp(JccpProblem problem, SpectralData data, double eps = kSlackEpsilon);

  const JccpProblem& base() const { return problem_; }
  const SpectralData& data() const { return data_; }
  double eps() const { return eps_; }

  Eigen::Index n_x() const { return problem_.n_x(); }
  Eigen::Index n_phi() const { return problem_.n_phi(); }
  Eigen::Index n_m() const { return problem_.n_m(); }
  Eigen::Index dim() const { return n_x() + 2 * n_phi(); }
  Eigen::Index num_constraints() const { return 1 + n_phi() + n_m(); }

  double cost(const VectorXd& z, VectorXd* grad) const;
  void evaluate(const VectorXd& z, VectorXd& g, MatrixXd* jac,
                SlackForm form = SlackForm::probability) const;
  VectorXd eval_constraints(const VectorXd& z) const;
  MatrixXd eval_constraint_jacobian(const VectorXd& z) const;

  /// x0 followed by b1 = b2 = (1 + beta^(1/n_phi)) / 2.
  VectorXd initial_point(const VectorXd& x0, SlackForm form = SlackForm::probability) const;
  VectorXd initial_point() const { return initial_point(VectorXd::Zero(n_x())); }

  /// Generic view for the solver. Holds its own copy of this program.
  Nlp as_nlp(SlackForm form = SlackForm::probability) const;

 private:
  JccpProblem problem_;
  SpectralData data_;
  double eps_;
};

/// Precomputes and assembles the spectral program. Requires n_m >= n_phi.
SpectralNlp build_spectral_nlp(const JccpProblem& p);

/// Re-evaluates every constraint at z in the raw product form.
FeasibilityReport certify_feasibility(const SpectralNlp& nlp, const VectorXd& z);

}  // namespace jccp
