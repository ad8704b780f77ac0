#include "jccp/gauss_markov.hpp"

#include <string>
#include <vector>

namespace jccp {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

bool is_psd(const SymMatrixd& s) {
  const double tol = kPsdTolerance * s.max_abs();
  return sym_eig(s).lambda.minCoeff() >= -tol;
}

// powers[k] = A^k, k = 0..N
std::vector<MatrixXd> powers(const MatrixXd& a, int n) {
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(MatrixXd::Identity(a.rows(), a.cols()));
  for (int k = 1; k <= n; ++k) out.push_back(a * out.back());
  return out;
}

// Linear maps from the noise vector xi = (x_0 - x0_mean, w_0, ..., w_N) to
// the stacked state and output deviations.
struct NoiseMaps {
  MatrixXd state;   // (n N) x (n + q (N + 1)), rows for x_1..x_N
  MatrixXd output;  // (r N) x (n + q (N + 1)), rows for y_1..y_N
  MatrixXd cov;     // blockdiag(x0_cov, w_cov, ..., w_cov)
};

NoiseMaps noise_maps(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const Eigen::Index n = model.n(), q = model.q(), r = model.r();
  const int N = spec.N;
  const Eigen::Index cols = n + q * (N + 1);
  const auto ap = powers(model.A, N);

  NoiseMaps maps;
  maps.state = MatrixXd::Zero(n * N, cols);
  maps.output = MatrixXd::Zero(r * N, cols);
  for (int t = 1; t <= N; ++t) {
    auto rows = maps.state.middleRows(n * (t - 1), n);
    rows.leftCols(n) = ap[static_cast<std::size_t>(t)];
    for (int k = 0; k < t; ++k) {
      rows.middleCols(n + q * k, q) = ap[static_cast<std::size_t>(t - 1 - k)] * model.Bw;
    }
    auto out = maps.output.middleRows(r * (t - 1), r);
    out = model.C * rows;
    out.middleCols(n + q * t, q) += model.Dw;
  }
  maps.cov = MatrixXd::Zero(cols, cols);
  maps.cov.topLeftCorner(n, n) = model.x0_cov.matrix();
  for (int k = 0; k <= N; ++k) maps.cov.block(n + q * k, n + q * k, q, q) = model.w_cov.matrix();
  return maps;
}

}  // namespace

void GaussMarkovModel::validate() const {
  require(A.rows() == A.cols() && A.rows() >= 1, "A must be square");
  require(Bu.rows() == n() && Bw.rows() == n(), "dimension mismatch: Bu/Bw rows != n");
  require(C.cols() == n(), "dimension mismatch: C columns != n");
  require(Du.rows() == r() && Du.cols() == p(), "dimension mismatch: Du");
  require(Dw.rows() == r() && Dw.cols() == q(), "dimension mismatch: Dw");
  require(x0_mean.size() == n(), "dimension mismatch: x0_mean");
  require(x0_cov.size() == n(), "dimension mismatch: x0_cov");
  require(w_cov.size() == q(), "dimension mismatch: w_cov");
  require(is_psd(x0_cov), "x0_cov not PSD");
  require(is_psd(w_cov), "w_cov not PSD");
}

void HorizonSpec::validate(const GaussMarkovModel& model) const {
  require(N >= 1, "horizon N must be >= 1");
  require(Q.rows() == model.n() && Q.cols() == model.n(), "dimension mismatch: Q");
  require(R.rows() == model.p() && R.cols() == model.p(), "dimension mismatch: R");
  require(y_max.size() == model.r(), "dimension mismatch: y_max");
  require(is_psd(SymMatrixd(Q)), "Q not PSD");
  require(sym_eig(SymMatrixd(R)).lambda.minCoeff() > 0.0, "R not positive definite");
  require(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
}

AffineMap stack_state_mean(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const Eigen::Index n = model.n(), p = model.p();
  const int N = spec.N;
  const auto ap = powers(model.A, N);
  AffineMap map{MatrixXd::Zero(n * N, p * N), VectorXd::Zero(n * N)};
  for (int t = 1; t <= N; ++t) {
    map.h.segment(n * (t - 1), n) = ap[static_cast<std::size_t>(t)] * model.x0_mean;
    for (int k = 0; k < t; ++k) {
      map.G.block(n * (t - 1), p * k, n, p) = ap[static_cast<std::size_t>(t - 1 - k)] * model.Bu;
    }
  }
  return map;
}

AffineMap stack_output_mean(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const Eigen::Index n = model.n(), p = model.p(), r = model.r();
  const int N = spec.N;
  const AffineMap states = stack_state_mean(model, spec);
  AffineMap map{MatrixXd::Zero(r * N, p * N), VectorXd::Zero(r * N)};
  for (int t = 1; t <= N; ++t) {
    map.G.middleRows(r * (t - 1), r) = model.C * states.G.middleRows(n * (t - 1), n);
    map.h.segment(r * (t - 1), r) = model.C * states.h.segment(n * (t - 1), n);
    if (t < N) map.G.block(r * (t - 1), p * t, r, p) += model.Du;
  }
  return map;
}

SymMatrixd stack_output_cov(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const NoiseMaps maps = noise_maps(model, spec);
  return SymMatrixd(maps.output * maps.cov * maps.output.transpose());
}

QuadraticCost stack_cost(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const Eigen::Index n = model.n(), p = model.p();
  const int N = spec.N;
  const AffineMap states = stack_state_mean(model, spec);
  MatrixXd qbar = MatrixXd::Zero(n * N, n * N);
  MatrixXd rbar = MatrixXd::Zero(p * N, p * N);
  for (int t = 0; t < N; ++t) {
    qbar.block(n * t, n * t, n, n) = spec.Q;
    rbar.block(p * t, p * t, p, p) = spec.R;
  }
  QuadraticCost cost;
  const MatrixXd gq = states.G.transpose() * qbar;
  cost.H = gq * states.G + rbar;
  cost.H = (cost.H + cost.H.transpose()) / 2.0;
  cost.c = 2.0 * gq * states.h;
  cost.constant = states.h.dot(qbar * states.h);
  return cost;
}

double stack_cost_variance_term(const GaussMarkovModel& model, const HorizonSpec& spec) {
  const NoiseMaps maps = noise_maps(model, spec);
  const MatrixXd state_cov = maps.state * maps.cov * maps.state.transpose();
  const Eigen::Index n = model.n();
  double total = 0.0;
  for (int t = 0; t < spec.N; ++t) {
    total += (spec.Q * state_cov.block(n * t, n * t, n, n)).trace();
  }
  return total;
}

JccpProblem build_problem(const GaussMarkovModel& model, const HorizonSpec& spec) {
  model.validate();
  spec.validate(model);
  const Eigen::Index rn = model.r() * spec.N;
  return make_problem(stack_cost(model, spec), stack_output_mean(model, spec),
                      stack_output_cov(model, spec).matrix(), MatrixXd::Identity(rn, rn),
                      spec.y_max.replicate(spec.N, 1), spec.beta);
}

ExampleInstance example_mass_spring(double beta) {
  const double k = 1.0, c = 0.5, m1 = 1.0, m2 = 1.0;
  MatrixXd ac(4, 4);
  ac << 0, 0, 1, 0,
        0, 0, 0, 1,
        -k / m1, k / m1, -c / m1, c / m1,
        k / m2, -k / m2, c / m2, -c / m2;
  MatrixXd bc(4, 2);
  bc << 0, 0,
        0, 0,
        1 / m1, 0,
        0, 1 / m2;
  const auto d = zoh_discretize(ac, bc, 0.5);

  GaussMarkovModel model;
  model.A = d.a;
  model.Bu = d.b.col(0);
  model.Bw = d.b.col(1);
  model.C.resize(2, 4);
  model.C << 1, 0, 0, 0,
             0, 1, 0, 0;
  model.Du = MatrixXd::Zero(2, 1);
  model.Dw = MatrixXd::Zero(2, 1);
  model.x0_mean = (VectorXd(4) << -0.5, -0.5, 0.0, 0.0).finished();
  model.x0_cov = SymMatrixd::zero(4);
  model.w_cov = SymMatrixd(MatrixXd::Constant(1, 1, 1e-4));

  HorizonSpec spec;
  spec.N = 20;
  spec.Q = VectorXd((VectorXd(4) << 1000, 1000, 1, 1).finished()).asDiagonal();
  spec.R = MatrixXd::Identity(1, 1);
  spec.y_max = VectorXd::Zero(2);
  spec.beta = beta;

  JccpProblem problem = build_problem(model, spec);
  return {std::move(model), std::move(spec), std::move(problem)};
}

ExampleInstance example_f16(double beta) {
  GaussMarkovModel model;
  model.A.resize(5, 5);
  model.A << 1.0000, 0.1025, 0.2080, -0.0502, -0.0057,
             0,      1.1175, 4.1534, -0.8000, -0.1010,
             0,      0.0955, 1.0722, -0.0541, -0.0153,
             0,      0,      0,       0.1353,  0,
             0,      0,      0,       0,       0.1353;
  model.Bu.resize(5, 2);
  model.Bu << -0.0377, -0.0040,
              -1.0042, -0.1131,
              -0.0453, -0.0175,
               0.8647,  0,
               0,       0.8647;
  model.Bw = model.Bu;
  model.C.resize(2, 5);
  model.C << -1, 0, 0, 0, 0,
              0, -1, 0, 0, 0;
  model.Du = MatrixXd::Zero(2, 2);
  model.Dw = MatrixXd::Zero(2, 2);
  model.x0_mean = (VectorXd(5) << 1, 0, 0, 0, 0).finished();
  model.x0_cov = SymMatrixd::zero(5);
  model.w_cov = SymMatrixd(2.5e-3 * MatrixXd::Identity(2, 2));

  HorizonSpec spec;
  spec.N = 10;
  spec.Q = VectorXd((VectorXd(5) << 1000, 1, 1, 1, 1).finished()).asDiagonal();
  spec.R = MatrixXd::Identity(2, 2);
  spec.y_max = (VectorXd(2) << 0, 1).finished();
  spec.beta = beta;

  JccpProblem problem = build_problem(model, spec);
  return {std::move(model), std::move(spec), std::move(problem)};
}

ExampleInstance example_by_name(std::string_view name, double beta) {
  if (name == "mass-spring") return example_mass_spring(beta);
  if (name == "f16") return example_f16(beta);
  throw ValidationError("unknown example '" + std::string(name) + "' (expected mass-spring or f16)");
}

}  // namespace jccp
