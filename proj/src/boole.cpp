#include "jccp/boole.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "jccp/special_functions.hpp"

namespace jccp {

BooleNlp::BooleNlp(JccpProblem problem, double eps) : problem_(std::move(problem)), eps_(eps) {
  const MatrixXd& M = problem_.M;
  const MatrixXd ms = M * problem_.sigma.matrix();
  row_std_.resize(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    row_std_(i) = std::sqrt(std::max(0.0, ms.row(i).dot(M.row(i))));
  }
}

double BooleNlp::cost(const VectorXd& z, VectorXd* grad) const {
  const VectorXd x = z.head(n_x());
  const double value = problem_.cost(x)(0);
  if (grad != nullptr) {
    grad->setZero(dim());
    grad->head(n_x()) = problem_.cost.jacobian(x).row(0).transpose();
  }
  return value;
}

void BooleNlp::evaluate(const VectorXd& z, VectorXd& g, MatrixXd* jac, SlackForm form) const {
  const Eigen::Index nx = n_x();
  const Eigen::Index nm = n_m();
  const VectorXd x = z.head(nx);

  g.resize(num_constraints());
  if (jac != nullptr) jac->setZero(num_constraints(), dim());

  const VectorXd mean_part = problem_.M * problem_.mean(x) - problem_.m;
  double budget = -(1.0 - problem_.beta);
  for (Eigen::Index i = 0; i < nm; ++i) {
    const SlackTerms t = slack_terms(z(nx + i), form, eps_);
    const double scale = std::numbers::sqrt2 * row_std_(i);
    budget += t.c;
    g(1 + i) = mean_part(i) + scale * t.q;
    if (jac != nullptr) {
      (*jac)(0, nx + i) = t.dc;
      (*jac)(1 + i, nx + i) = scale * t.dq;
    }
  }
  g(0) = budget;
  if (jac != nullptr) jac->block(1, 0, nm, nx) = problem_.M * problem_.mean.jacobian(x);
}

VectorXd BooleNlp::eval_constraints(const VectorXd& z) const {
  VectorXd g;
  evaluate(z, g, nullptr);
  return g;
}

MatrixXd BooleNlp::eval_constraint_jacobian(const VectorXd& z) const {
  VectorXd g;
  MatrixXd jac;
  evaluate(z, g, &jac);
  return jac;
}

VectorXd BooleNlp::initial_point(const VectorXd& x0, SlackForm form) const {
  VectorXd z(dim());
  z.head(n_x()) = x0;
  const double b = 1.0 - (1.0 - problem_.beta) / static_cast<double>(n_m());
  z.tail(n_m()).setConstant(slack_from_probability(std::clamp(b, eps_, 1.0 - eps_), form));
  return z;
}

Nlp BooleNlp::as_nlp(SlackForm form) const {
  auto self = std::make_shared<const BooleNlp>(*this);
  Nlp nlp;
  nlp.dim = dim();
  nlp.num_constraints = num_constraints();
  nlp.num_primary = n_x();
  nlp.cost = [self](const VectorXd& z, VectorXd* grad) { return self->cost(z, grad); };
  nlp.constraints = [self, form](const VectorXd& z, VectorXd& g, MatrixXd* jac) {
    self->evaluate(z, g, jac, form);
  };
  nlp.lower = VectorXd::Constant(dim(), -std::numeric_limits<double>::infinity());
  nlp.upper = VectorXd::Constant(dim(), std::numeric_limits<double>::infinity());
  nlp.lower.tail(n_m()).setConstant(slack_lower(form, eps_));
  nlp.upper.tail(n_m()).setConstant(slack_upper(form, eps_));
  return nlp;
}

BooleNlp build_boole_nlp(const JccpProblem& p) { return BooleNlp(p); }

FeasibilityReport certify_feasibility(const BooleNlp& nlp, const VectorXd& z) {
  const VectorXd b = z.tail(nlp.n_m());
  FeasibilityReport r;
  r.product = (1.0 - b.array()).sum() - (1.0 - nlp.base().beta);
  r.pairing = -std::numeric_limits<double>::infinity();
  r.bounds = std::max({0.0, (-b).maxCoeff(), (b.array() - 1.0).maxCoeff()});
  if ((b.array() > 0.0).all() && (b.array() < 1.0).all()) {
    BooleNlp exact(nlp.base(), std::numeric_limits<double>::denorm_min());
    r.linear = exact.eval_constraints(z).tail(nlp.n_m()).maxCoeff();
  } else {
    r.linear = std::numeric_limits<double>::infinity();
  }
  r.max_violation = std::max({r.product, r.linear, r.bounds});
  return r;
}

}  // namespace jccp
