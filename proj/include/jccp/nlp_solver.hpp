#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "jccp/linalg.hpp"
#include "jccp/problem.hpp"

namespace jccp {

/// min f(z) s.t. g(z) <= 0, lower <= z <= upper.
///
/// The first `num_primary` entries of z are the original decision variables;
/// the rest are auxiliary (slack) variables. Only multistart uses the split.
struct Nlp {
  Eigen::Index dim = 0;
  Eigen::Index num_constraints = 0;
  Eigen::Index num_primary = 0;

  /// Returns f(z); writes the gradient when `grad` is non-null.
  std::function<double(const VectorXd& z, VectorXd* grad)> cost;
  /// Writes g(z) into `g`; writes the Jacobian when `jac` is non-null.
  std::function<void(const VectorXd& z, VectorXd& g, MatrixXd* jac)> constraints;

  VectorXd lower;
  VectorXd upper;

  /// Optional change of variables y = S x on the primary block, with S upper
  /// triangular and nonsingular (num_primary x num_primary). Empty means
  /// identity. The primary block must be unbounded when S is set.
  MatrixXd primary_scaling;
};

struct SolverOptions {
  double kkt_tol = 1e-6;
  double cons_tol = 1e-8;
  int max_outer = 50;
  int max_inner = 500;
  int multistart_count = 5;
  std::uint64_t seed = 42;

  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double violation_decrease = 0.25;
  int lbfgs_memory = 100;
};

struct OuterRecord {
  double cost = 0.0;
  double max_violation = 0.0;
  double penalty = 0.0;
  int inner_iterations = 0;
  bool accepted = false;
};

struct SolveTrace {
  std::vector<OuterRecord> outer;
};

struct SolveResult {
  Solution solution;
  SolveTrace trace;
};

/// Augmented Lagrangian (PHR, squared-hinge inequalities) over a projected
/// limited-memory BFGS inner solver. kkt_residual is measured in the
/// scaled coordinates (see primary_scaling). Throws EvaluationError if a callback
/// returns NaN/Inf; index is the offending constraint row, or -1 for the cost.
SolveResult solve(const Nlp& nlp, const VectorXd& z0, const SolverOptions& opts = {});

/// Solves from z0 plus (multistart_count - 1) seeded perturbations and keeps
/// the lowest-cost converged result, else the least-violating one. Ties go to
/// the lowest start index.
SolveResult multistart_solve(const Nlp& nlp, const VectorXd& z0, const SolverOptions& opts = {});

/// The perturbed start used by multistart for a given start index (index 0
/// returns z0 projected onto the box).
VectorXd multistart_point(const Nlp& nlp, const VectorXd& z0, std::uint64_t seed, int index);

/// Max relative error, |a - fd| / max(1, |a|, |fd|), between the analytic
/// cost gradient / constraint Jacobian and central differences of step h.
double check_gradients(const Nlp& nlp, const VectorXd& z, double h = 1e-6);

/// Largest constraint or bound violation at z, unscaled.
double max_violation(const Nlp& nlp, const VectorXd& z);

}  // namespace jccp
