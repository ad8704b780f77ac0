#include "jccp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "jccp/special_functions.hpp"

namespace jccp {

SlackTerms slack_terms(double v, SlackForm form, double eps) {
  SlackTerms t;
  if (form == SlackForm::probability) {
    const double b = std::clamp(v, eps, 1.0 - eps);
    t.q = erf_inv(2.0 * b - 1.0);
    t.dq = 2.0 * erf_inv_derivative_at(t.q);
    t.c = 1.0 - b;
    t.dc = -1.0;
  } else {
    t.q = std::clamp(v, slack_lower(form, eps), slack_upper(form, eps));
    t.dq = 1.0;
    t.c = 0.5 * erfc(t.q);
    t.dc = -std::exp(-t.q * t.q) / std::sqrt(std::numbers::pi);
  }
  return t;
}

double slack_lower(SlackForm form, double eps) {
  return form == SlackForm::probability ? eps : -erf_inv(1.0 - 2.0 * eps);
}

double slack_upper(SlackForm form, double eps) {
  return form == SlackForm::probability ? 1.0 - eps : erf_inv(1.0 - 2.0 * eps);
}

double slack_probability(double v, SlackForm form) {
  if (form == SlackForm::probability) return v;
  return v < 0.0 ? 0.5 * erfc(-v) : 1.0 - 0.5 * erfc(v);
}

double slack_from_probability(double b, SlackForm form) {
  return form == SlackForm::probability ? b : erf_inv(2.0 * b - 1.0);
}

SpectralData precompute_spectral(const JccpProblem& p) {
  if (p.n_m() < p.n_phi()) {
    throw ValidationError("spectral program requires n_m >= n_phi; normalize the problem first");
  }
  const EigenPaird eig = sym_eig(p.sigma);

  SpectralData d;
  d.theta = eig.theta;
  d.lambda = eig.lambda;
  const double floor = kLambdaTolerance * std::max(eig.lambda.maxCoeff(), 1.0);
  for (Eigen::Index j = 0; j < d.lambda.size(); ++j) {
    if (d.lambda(j) < floor) d.lambda(j) = 0.0;
  }
  d.Mbar = p.M * d.theta;
  d.sigma_table = (d.Mbar.array() >= 0.0).select(Eigen::MatrixXi::Ones(d.Mbar.rows(), d.Mbar.cols()),
                                                  Eigen::MatrixXi::Constant(d.Mbar.rows(), d.Mbar.cols(), 2));
  d.coef.resize(d.Mbar.rows(), d.Mbar.cols());
  for (Eigen::Index j = 0; j < d.Mbar.cols(); ++j) {
    d.coef.col(j) = std::sqrt(2.0 * d.lambda(j)) * d.Mbar.col(j).cwiseAbs();
  }
  return d;
}

SpectralNlp::SpectralNlp(JccpProblem problem, SpectralData data, double eps)
    : problem_(std::move(problem)), data_(std::move(data)), eps_(eps) {}

double SpectralNlp::cost(const VectorXd& z, VectorXd* grad) const {
  const VectorXd x = z.head(n_x());
  const double value = problem_.cost(x)(0);
  if (grad != nullptr) {
    grad->setZero(dim());
    grad->head(n_x()) = problem_.cost.jacobian(x).row(0).transpose();
  }
  return value;
}

void SpectralNlp::evaluate(const VectorXd& z, VectorXd& g, MatrixXd* jac, SlackForm form) const {
  const Eigen::Index nx = n_x();
  const Eigen::Index nphi = n_phi();
  const Eigen::Index nm = n_m();
  const VectorXd x = z.head(nx);
  std::vector<SlackTerms> t1(static_cast<std::size_t>(nphi)), t2(static_cast<std::size_t>(nphi));
  for (Eigen::Index j = 0; j < nphi; ++j) {
    t1[static_cast<std::size_t>(j)] = slack_terms(z(nx + j), form, eps_);
    t2[static_cast<std::size_t>(j)] = slack_terms(z(nx + nphi + j), form, eps_);
  }

  g.resize(num_constraints());
  if (jac != nullptr) jac->setZero(num_constraints(), dim());

  // product row, in log form; b1 + b2 - 1 = 1 - c1 - c2
  if (problem_.beta > 0.0) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < nphi; ++j) {
      const SlackTerms& a = t1[static_cast<std::size_t>(j)];
      const SlackTerms& b = t2[static_cast<std::size_t>(j)];
      const double s = 1.0 - a.c - b.c;
      sum += std::log(std::max(s, kProductFloor));
      if (jac != nullptr && s > kProductFloor) {
        (*jac)(0, nx + j) = a.dc / s;
        (*jac)(0, nx + nphi + j) = b.dc / s;
      }
    }
    g(0) = std::log(problem_.beta) - sum;
  } else {
    g(0) = -1.0;
  }

  for (Eigen::Index j = 0; j < nphi; ++j) {
    const SlackTerms& a = t1[static_cast<std::size_t>(j)];
    const SlackTerms& b = t2[static_cast<std::size_t>(j)];
    g(1 + j) = a.c + b.c - 1.0;
    if (jac != nullptr) {
      (*jac)(1 + j, nx + j) = a.dc;
      (*jac)(1 + j, nx + nphi + j) = b.dc;
    }
  }

  const VectorXd mu_bar = data_.theta.transpose() * problem_.mean(x);
  const VectorXd mean_part = data_.Mbar * mu_bar - problem_.m;
  const Eigen::Index row0 = 1 + nphi;
  for (Eigen::Index i = 0; i < nm; ++i) {
    double acc = mean_part(i);
    for (Eigen::Index j = 0; j < nphi; ++j) {
      const double c = data_.coef(i, j);
      if (c == 0.0) continue;
      const bool first = data_.sigma_table(i, j) == 1;
      const SlackTerms& t = first ? t1[static_cast<std::size_t>(j)] : t2[static_cast<std::size_t>(j)];
      acc += c * t.q;
      if (jac != nullptr) (*jac)(row0 + i, nx + (first ? j : nphi + j)) = c * t.dq;
    }
    g(row0 + i) = acc;
  }
  if (jac != nullptr) {
    jac->block(row0, 0, nm, nx) = data_.Mbar * (data_.theta.transpose() * problem_.mean.jacobian(x));
  }
}

VectorXd SpectralNlp::eval_constraints(const VectorXd& z) const {
  VectorXd g;
  evaluate(z, g, nullptr);
  return g;
}

MatrixXd SpectralNlp::eval_constraint_jacobian(const VectorXd& z) const {
  VectorXd g;
  MatrixXd jac;
  evaluate(z, g, &jac);
  return jac;
}

VectorXd SpectralNlp::initial_point(const VectorXd& x0, SlackForm form) const {
  VectorXd z(dim());
  z.head(n_x()) = x0;
  const double b = 0.5 * (1.0 + std::pow(problem_.beta, 1.0 / static_cast<double>(n_phi())));
  z.tail(2 * n_phi()).setConstant(slack_from_probability(std::clamp(b, eps_, 1.0 - eps_), form));
  return z;
}

Nlp SpectralNlp::as_nlp(SlackForm form) const {
  auto self = std::make_shared<const SpectralNlp>(*this);
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
  nlp.lower.tail(2 * n_phi()).setConstant(slack_lower(form, eps_));
  nlp.upper.tail(2 * n_phi()).setConstant(slack_upper(form, eps_));
  return nlp;
}

SpectralNlp build_spectral_nlp(const JccpProblem& p) {
  return SpectralNlp(p, precompute_spectral(p));
}

FeasibilityReport certify_feasibility(const SpectralNlp& nlp, const VectorXd& z) {
  const Eigen::Index nx = nlp.n_x();
  const Eigen::Index nphi = nlp.n_phi();
  const VectorXd b1 = z.segment(nx, nphi);
  const VectorXd b2 = z.segment(nx + nphi, nphi);

  FeasibilityReport r;
  double product = 1.0;
  r.pairing = -std::numeric_limits<double>::infinity();
  r.bounds = 0.0;
  for (Eigen::Index j = 0; j < nphi; ++j) {
    product *= b1(j) + b2(j) - 1.0;
    r.pairing = std::max(r.pairing, 1.0 - b1(j) - b2(j));
    r.bounds = std::max({r.bounds, -b1(j), -b2(j), b1(j) - 1.0, b2(j) - 1.0});
  }
  r.product = nlp.base().beta - product;

  // The linear rows need erf_inv, which is only defined strictly inside (0, 1).
  const bool open_box = (b1.array() > 0.0).all() && (b1.array() < 1.0).all() &&
                        (b2.array() > 0.0).all() && (b2.array() < 1.0).all();
  if (open_box) {
    SpectralNlp exact(nlp.base(), nlp.data(), std::numeric_limits<double>::denorm_min());
    const VectorXd g = exact.eval_constraints(z);
    r.linear = g.tail(nlp.n_m()).maxCoeff();
  } else {
    r.linear = std::numeric_limits<double>::infinity();
  }
  r.max_violation = std::max({r.product, r.pairing, r.linear, r.bounds});
  return r;
}

}  // namespace jccp
