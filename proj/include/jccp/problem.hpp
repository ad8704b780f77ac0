#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "jccp/linalg.hpp"

namespace jccp {

/// A smooth map R^in_dim -> R^out_dim with its Jacobian (out_dim x in_dim).
/// Both callables must be re-entrant.
class DifferentiableMap {
 public:
  using EvalFn = std::function<VectorXd(const VectorXd&)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

  DifferentiableMap() = default;
  DifferentiableMap(Eigen::Index in_dim, Eigen::Index out_dim, EvalFn eval, JacobianFn jacobian)
      : in_dim_(in_dim), out_dim_(out_dim), eval_(std::move(eval)), jacobian_(std::move(jacobian)) {}

  Eigen::Index in_dim() const { return in_dim_; }
  Eigen::Index out_dim() const { return out_dim_; }
  VectorXd operator()(const VectorXd& x) const { return eval_(x); }
  MatrixXd jacobian(const VectorXd& x) const { return jacobian_(x); }

  /// Max relative error between the Jacobian and central differences of
  /// step h, entrywise |a - fd| / max(1, |a|, |fd|).
  double finite_difference_error(const VectorXd& x, double h = 1e-6) const;

 private:
  Eigen::Index in_dim_ = 0;
  Eigen::Index out_dim_ = 0;
  EvalFn eval_;
  JacobianFn jacobian_;
};

/// x -> G x + h
struct AffineMap {
  MatrixXd G;
  VectorXd h;

  VectorXd operator()(const VectorXd& x) const { return G * x + h; }
  DifferentiableMap as_map() const;
};

/// x -> x^T H x + c^T x + constant, with H symmetric.
struct QuadraticCost {
  MatrixXd H;
  VectorXd c;
  double constant = 0.0;

  double operator()(const VectorXd& x) const { return x.dot(H * x) + c.dot(x) + constant; }
  VectorXd gradient(const VectorXd& x) const { return 2.0 * (H * x) + c; }
  /// When H is positive definite the map evaluates |U x + w|^2 + k with
  /// H = U^T U, which avoids cancellation between large terms near the
  /// optimum; otherwise it uses the expanded form above.
  DifferentiableMap as_map() const;
};

/// min J(x) s.t. P(M phi(x) <= m) >= beta, phi(x) ~ N(mu(x), Sigma).
struct JccpProblem {
  DifferentiableMap cost;  // out_dim == 1
  DifferentiableMap mean;  // out_dim == n_phi
  SymMatrixd sigma;
  MatrixXd M;
  VectorXd m;
  double beta = 0.0;

  // Serializable forms, present when the problem came from a file or a
  // Gauss-Markov builder.
  std::optional<QuadraticCost> quadratic_cost;
  std::optional<AffineMap> affine_mean;

  Eigen::Index n_x() const { return mean.in_dim(); }
  Eigen::Index n_phi() const { return mean.out_dim(); }
  Eigen::Index n_m() const { return M.rows(); }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;
};

/// Builds and validates a problem from quadratic cost and affine mean.
JccpProblem make_problem(QuadraticCost cost, AffineMap mean, const MatrixXd& sigma,
                         MatrixXd M, VectorXd m, double beta);

enum class SolveStatus { converged, max_iter, infeasible_detected };

std::string_view to_string(SolveStatus status);

struct Solution {
  VectorXd x;
  VectorXd slacks;
  double cost_value = 0.0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  SolveStatus status = SolveStatus::max_iter;
};

/// Parses the JSON problem format:
///   {n_x, n_phi, n_m, beta, cost: {H, c, const}, mean: {G, h}, sigma, M, m}
/// Throws ParseError on malformed text, ValidationError on invariant failure.
JccpProblem load_problem(std::string_view text);

/// Inverse of load_problem; requires the quadratic/affine forms. Numbers are
/// written in shortest round-trip form.
std::string serialize_problem(const JccpProblem& p);

/// If n_m < n_phi, rewrites the problem over phi' = M phi with M' = I, so
/// that n_m == n_phi. Otherwise returns the input unchanged.
JccpProblem normalize_problem(const JccpProblem& p);

/// Relative PSD tolerance applied to Sigma.
inline constexpr double kPsdTolerance = 1e-10;

}  // namespace jccp
