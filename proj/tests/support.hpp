#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "jccp/problem.hpp"

namespace jccp::test {

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) { return random_matrix(rng, n, 1); }

inline MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double shift = 0.5) {
  const MatrixXd a = random_matrix(rng, n, n);
  return a * a.transpose() + shift * MatrixXd::Identity(n, n);
}

// Standard normal quantile by bisection on the libm CDF; independent of the
// library's erf/erf_inv.
inline double normal_quantile_oracle(double q) {
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// min x^T H x + c^T x subject to a^T x <= b, H positive definite.
inline VectorXd qp_single_constraint(const MatrixXd& H, const VectorXd& c, const VectorXd& a, double b) {
  const Eigen::LLT<MatrixXd> llt(H);
  const VectorXd x_free = llt.solve(-0.5 * c);
  const double excess = a.dot(x_free) - b;
  if (excess <= 0.0) return x_free;
  const VectorXd hinv_a = llt.solve(a);
  return x_free - hinv_a * (excess / a.dot(hinv_a));
}

// One chance constraint m - M mu(x) >= sqrt(2 M Sigma M^T) erf_inv(2 beta - 1)
// over an affine mean, with an active optimum.
struct SingleConstraintCase {
  JccpProblem problem;
  VectorXd x_star;
  double cost_star = 0.0;
};

inline SingleConstraintCase single_constraint_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> level(0.55, 0.97);
  const int n_x = dim(rng);
  const int n_phi = dim(rng);

  QuadraticCost cost;
  cost.H = random_spd(rng, n_x);
  cost.c = random_vector(rng, n_x) * 2.0;
  cost.constant = 1.0;
  AffineMap mean{random_matrix(rng, n_phi, n_x), random_vector(rng, n_phi)};
  const MatrixXd sigma = random_spd(rng, n_phi, 0.1) * 0.3;
  const MatrixXd M = random_matrix(rng, 1, n_phi);
  const double beta = level(rng);

  const VectorXd a = (M * mean.G).transpose();
  const Eigen::LLT<MatrixXd> llt(cost.H);
  const VectorXd x_free = llt.solve(-0.5 * cost.c);
  const double row_std = std::sqrt((M * sigma * M.transpose())(0, 0));
  const double z = normal_quantile_oracle(beta);
  // place m so that the free optimum violates the deterministic bound
  const double m0 = (M * mean.h)(0) + a.dot(x_free) + row_std * z - 0.5 - 0.5 * std::abs(a.norm());

  SingleConstraintCase out;
  const double b = m0 - (M * mean.h)(0) - row_std * z;
  out.x_star = qp_single_constraint(cost.H, cost.c, a, b);
  out.cost_star = cost(out.x_star);
  out.problem = make_problem(cost, mean, sigma, M, VectorXd::Constant(1, m0), beta);
  return out;
}

// The 1-D toy: cost (x - 1)^2, phi ~ N(x, 1), P(phi <= 0) >= beta.
inline JccpProblem scalar_toy(double beta) {
  QuadraticCost cost{MatrixXd::Identity(1, 1), VectorXd::Constant(1, -2.0), 1.0};
  AffineMap mean{MatrixXd::Identity(1, 1), VectorXd::Zero(1)};
  return make_problem(cost, mean, MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1), VectorXd::Zero(1), beta);
}

}  // namespace jccp::test
