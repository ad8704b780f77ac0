#pragma once

#include <cstdint>
#include <vector>

#include "jccp/gauss_markov.hpp"
#include "jccp/problem.hpp"

namespace jccp {

/// Standard normals from a counter-based stream keyed by (seed, index):
/// splitmix64 over an incrementing counter feeds Box-Muller. The same key
/// always yields the same sequence, independent of any other stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t index);

  double next();
  /// Uniform on (0, 1], 53 random bits.
  double uniform();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Draws L z with cov = L L^T, L = theta sqrt(diag(lambda)) from sym_eig
/// (negative round-off eigenvalues clipped), so rank-deficient cov is fine.
class GaussianSampler {
 public:
  explicit GaussianSampler(const SymMatrixd& cov);

  Eigen::Index dim() const { return factor_.rows(); }
  const MatrixXd& factor() const { return factor_; }
  VectorXd sample(NormalStream& stream) const;

 private:
  MatrixXd factor_;
};

VectorXd gaussian_sample(const SymMatrixd& cov, NormalStream& stream);

/// Per-output, per-time statistics over runs; rows are t = 1..N, columns are
/// output components.
struct Envelope {
  MatrixXd mean;
  MatrixXd lo;
  MatrixXd hi;
};

struct MonteCarloReport {
  int runs = 0;
  std::uint64_t seed = 0;
  double beta_hat = 0.0;
  double beta_hat_stderr = 0.0;
  double mean_realized_cost = 0.0;
  double realized_cost_stderr = 0.0;
  Envelope envelope;
  std::vector<char> satisfied;  // per run
};

/// Simulates the open-loop system under u_seq (length p N) for `runs`
/// independent trajectories. Run k draws x_0 then w_0..w_N from stream
/// (seed, k); a run satisfies iff y_t <= y_max for all t = 1..N.
MonteCarloReport simulate_batch(const GaussMarkovModel& model, const HorizonSpec& spec,
                                const VectorXd& u_seq, int runs, std::uint64_t seed);

/// Expected value of the realized quadratic cost under u: the
/// deterministic-equivalent cost plus the covariance trace term.
double expected_realized_cost(const GaussMarkovModel& model, const HorizonSpec& spec, const VectorXd& u_seq);

struct ProbabilityEstimate {
  int samples = 0;
  long hits = 0;
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Direct sampling estimate of P(M phi(x) <= m), phi(x) ~ N(mu(x), Sigma).
ProbabilityEstimate estimate_joint_probability(const JccpProblem& p, const VectorXd& x, int samples,
                                               std::uint64_t seed);

}  // namespace jccp
