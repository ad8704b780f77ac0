#pragma once

#include <string_view>

#include "jccp/problem.hpp"

namespace jccp {

/// x_{t+1} = A x_t + Bu u_t + Bw w_t,  y_t = C x_t + Du u_t + Dw w_t,
/// x_0 ~ N(x0_mean, x0_cov), w_t ~ N(0, w_cov) i.i.d. and independent of x_0.
struct GaussMarkovModel {
  MatrixXd A;
  MatrixXd Bu;
  MatrixXd Bw;
  MatrixXd C;
  MatrixXd Du;
  MatrixXd Dw;
  VectorXd x0_mean;
  SymMatrixd x0_cov;
  SymMatrixd w_cov;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index p() const { return Bu.cols(); }
  Eigen::Index q() const { return Bw.cols(); }
  Eigen::Index r() const { return C.rows(); }

  void validate() const;
};

/// Horizon, quadratic weights, output bound and confidence level.
struct HorizonSpec {
  int N = 1;
  MatrixXd Q;
  MatrixXd R;
  VectorXd y_max;
  double beta = 0.5;

  void validate(const GaussMarkovModel& model) const;
};

/// u = (u_0, ..., u_{N-1}) -> (E[y_1], ..., E[y_N]), time-major. The Du u_t
/// term is applied for t < N only; u_N is not a decision variable.
AffineMap stack_output_mean(const GaussMarkovModel& model, const HorizonSpec& spec);

/// u -> (E[x_1], ..., E[x_N]).
AffineMap stack_state_mean(const GaussMarkovModel& model, const HorizonSpec& spec);

/// Covariance of (y_1, ..., y_N); independent of u.
SymMatrixd stack_output_cov(const GaussMarkovModel& model, const HorizonSpec& spec);

/// sum_t E[x_{t+1}]^T Q E[x_{t+1}] + u_t^T R u_t as a quadratic in u.
QuadraticCost stack_cost(const GaussMarkovModel& model, const HorizonSpec& spec);

/// sum_t trace(Q Cov(x_{t+1})): the u-independent part of the expected
/// quadratic cost that stack_cost leaves out.
double stack_cost_variance_term(const GaussMarkovModel& model, const HorizonSpec& spec);

/// Joint constraint y_t <= y_max for t = 1..N as a JccpProblem with M = I.
JccpProblem build_problem(const GaussMarkovModel& model, const HorizonSpec& spec);

struct ExampleInstance {
  GaussMarkovModel model;
  HorizonSpec spec;
  JccpProblem problem;
};

/// Two masses coupled by a spring-damper (k = 1, c = 0.5, m1 = m2 = 1),
/// force u on mass 1 and disturbance w on mass 2, ZOH at dt = 0.5 s, N = 20.
ExampleInstance example_mass_spring(double beta);

/// Short-period pitch dynamics with actuator states, dt = 0.1 s, N = 10.
ExampleInstance example_f16(double beta);

/// "mass-spring" or "f16"; throws ValidationError otherwise.
ExampleInstance example_by_name(std::string_view name, double beta);

}  // namespace jccp
