#include <cmath>
#include <random>

#include "doctest.h"
#include "jccp/gauss_markov.hpp"
#include "jccp/monte_carlo.hpp"
#include "jccp/pipeline.hpp"
#include "support.hpp"

using namespace jccp;

namespace {

GaussMarkovModel small_model(std::mt19937_64& rng) {
  GaussMarkovModel m;
  m.A = test::random_matrix(rng, 3, 3) * 0.6;
  m.Bu = test::random_matrix(rng, 3, 2);
  m.Bw = test::random_matrix(rng, 3, 1);
  m.C = test::random_matrix(rng, 2, 3);
  m.Du = MatrixXd::Zero(2, 2);
  m.Dw = MatrixXd::Zero(2, 1);
  m.x0_mean = test::random_vector(rng, 3);
  m.x0_cov = SymMatrixd(test::random_spd(rng, 3, 0.1) * 0.1);
  m.w_cov = SymMatrixd(MatrixXd::Constant(1, 1, 0.05));
  return m;
}

HorizonSpec small_spec(int N) {
  HorizonSpec s;
  s.N = N;
  s.Q = MatrixXd::Identity(3, 3);
  s.R = MatrixXd::Identity(2, 2);
  s.y_max = VectorXd::Ones(2);
  s.beta = 0.8;
  return s;
}

// E[y_1..y_N] by direct recursion of the state equation with w = 0.
VectorXd simulate_mean(const GaussMarkovModel& m, int N, const VectorXd& u) {
  const Eigen::Index p = m.p(), r = m.r();
  VectorXd x = m.x0_mean;
  VectorXd y(r * N);
  for (int t = 1; t <= N; ++t) {
    x = m.A * x + m.Bu * u.segment(p * (t - 1), p);
    y.segment(r * (t - 1), r) = m.C * x;
    if (t < N) y.segment(r * (t - 1), r) += m.Du * u.segment(p * t, p);
  }
  return y;
}

}  // namespace

TEST_CASE("printed example data") {
  const ExampleInstance f16 = example_f16(0.9);
  CHECK(f16.model.A(1, 2) == 4.1534);
  CHECK(f16.model.Bu(3, 0) == 0.8647);
  CHECK(f16.model.Bw == f16.model.Bu);
  CHECK(f16.problem.n_phi() == 20);
  CHECK(f16.problem.n_m() == 20);
  CHECK(f16.problem.beta == 0.9);

  const ExampleInstance ms = example_mass_spring(0.6);
  CHECK(ms.problem.n_phi() == 40);
  CHECK(ms.problem.n_x() == 20);
  CHECK(ms.problem.M == MatrixXd::Identity(40, 40));
  CHECK(ms.model.A(0, 0) == doctest::Approx(0.8976850119991975).epsilon(1e-12));
  CHECK(ms.model.Bw(3, 0) == doctest::Approx(0.4308106480567008).epsilon(1e-12));
  CHECK_THROWS_AS(example_by_name("pendulum", 0.5), ValidationError);
  CHECK_THROWS_AS(example_f16(1.0), ValidationError);
}

TEST_CASE("free response") {
  std::mt19937_64 rng(71);
  const GaussMarkovModel m = small_model(rng);
  const AffineMap map = stack_output_mean(m, small_spec(5));
  MatrixXd power = MatrixXd::Identity(3, 3);
  for (int t = 1; t <= 5; ++t) {
    power = m.A * power;
    CHECK((map.h.segment(2 * (t - 1), 2) - m.C * power * m.x0_mean).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("memoryless chain has a single subdiagonal") {
  std::mt19937_64 rng(72);
  GaussMarkovModel m = small_model(rng);
  m.A.setZero();
  const AffineMap map = stack_output_mean(m, small_spec(4));
  for (int t = 0; t < 4; ++t) {
    for (int k = 0; k < 4; ++k) {
      const MatrixXd block = map.G.block(2 * t, 2 * k, 2, 2);
      if (k == t) {
        CHECK((block - m.C * m.Bu).cwiseAbs().maxCoeff() == 0.0);
      } else {
        CHECK(block.isZero(0.0));
      }
    }
  }
}

TEST_CASE("stacked mean matches recursion") {
  const ExampleInstance ex = example_mass_spring(0.6);
  const AffineMap map = stack_output_mean(ex.model, ex.spec);
  VectorXd impulse = VectorXd::Zero(20);
  impulse(0) = 1.0;
  CHECK((map(impulse) - simulate_mean(ex.model, 20, impulse)).cwiseAbs().maxCoeff() <= 1e-12);

  std::mt19937_64 rng(73);
  GaussMarkovModel m = small_model(rng);
  m.Du = test::random_matrix(rng, 2, 2);
  const VectorXd u = test::random_vector(rng, 12);
  CHECK((stack_output_mean(m, small_spec(6))(u) - simulate_mean(m, 6, u)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("output covariance closed forms") {
  std::mt19937_64 rng(74);
  GaussMarkovModel m = small_model(rng);
  m.x0_cov = SymMatrixd::zero(3);
  m.w_cov = SymMatrixd::zero(1);
  CHECK(stack_output_cov(m, small_spec(4)).matrix().isZero(0.0));

  GaussMarkovModel one = small_model(rng);
  one.C = MatrixXd::Identity(3, 3);
  one.Du = MatrixXd::Zero(3, 2);
  one.Dw = MatrixXd::Zero(3, 1);
  HorizonSpec spec = small_spec(1);
  spec.y_max = VectorXd::Ones(3);
  const MatrixXd expected = one.A * one.x0_cov.matrix() * one.A.transpose() +
                            one.Bw * one.w_cov.matrix() * one.Bw.transpose();
  CHECK((stack_output_cov(one, spec).matrix() - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("output covariance is PSD") {
  for (const char* name : {"mass-spring", "f16"}) {
    const ExampleInstance ex = example_by_name(name, 0.5);
    const SymMatrixd cov = stack_output_cov(ex.model, ex.spec);
    CHECK(sym_eig(cov).lambda.minCoeff() >= -kPsdTolerance * cov.max_abs());
  }
}

TEST_CASE("output covariance matches sampled trajectories") {
  const ExampleInstance ex = example_f16(0.9);
  const GaussMarkovModel& m = ex.model;
  const int N = ex.spec.N, runs = 1000000;
  const Eigen::Index dim = m.r() * N;
  const GaussianSampler w_sampler(m.w_cov);
  // deviations from the mean do not depend on u or x0_mean (Sigma_x = 0)
  MatrixXd second = MatrixXd::Zero(dim, dim);
  MatrixXd fourth = MatrixXd::Zero(dim, dim);
  VectorXd y(dim);
  for (int k = 0; k < runs; ++k) {
    NormalStream stream(5, static_cast<std::uint64_t>(k));
    VectorXd x = VectorXd::Zero(m.n());
    for (int t = 1; t <= N; ++t) {
      x = m.A * x + m.Bw * w_sampler.sample(stream);
      y.segment(m.r() * (t - 1), m.r()) = m.C * x;
    }
    const MatrixXd outer = y * y.transpose();
    second += outer;
    fourth += outer.cwiseProduct(outer);
  }
  second /= runs;
  fourth /= runs;
  const MatrixXd cov = stack_output_cov(m, ex.spec).matrix();
  const MatrixXd se = ((fourth - second.cwiseProduct(second)) / runs).cwiseSqrt();
  const MatrixXd dev = (second - cov).cwiseAbs();
  CHECK((dev.array() <= 3.0 * se.array() + 1e-15).all());
}

TEST_CASE("quadratic cost construction") {
  std::mt19937_64 rng(75);
  GaussMarkovModel m = small_model(rng);
  HorizonSpec spec = small_spec(3);
  spec.Q.setZero();
  const QuadraticCost energy = stack_cost(m, spec);
  CHECK((energy.H - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(energy.c.isZero(0.0));

  m.x0_mean.setZero();
  spec.Q = test::random_spd(rng, 3);
  CHECK(stack_cost(m, spec).c.isZero(0.0));

  const ExampleInstance ex = example_mass_spring(0.6);
  double recursion = 0.0;
  VectorXd x = ex.model.x0_mean;
  for (int t = 0; t < ex.spec.N; ++t) {
    x = ex.model.A * x;
    recursion += x.dot(ex.spec.Q * x);
  }
  CHECK(stack_cost(ex.model, ex.spec)(VectorXd::Zero(20)) == doctest::Approx(recursion).epsilon(1e-13));
}

TEST_CASE("model and horizon validation") {
  std::mt19937_64 rng(76);
  const GaussMarkovModel good = small_model(rng);
  GaussMarkovModel bad = good;
  bad.Bu = MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.w_cov = SymMatrixd(MatrixXd::Constant(1, 1, -1.0));
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  HorizonSpec spec = small_spec(3);
  spec.R = MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(build_problem(good, spec), ValidationError);
  spec = small_spec(0);
  CHECK_THROWS_AS(build_problem(good, spec), ValidationError);
  spec = small_spec(3);
  spec.Q = -MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(build_problem(good, spec), ValidationError);
}

TEST_CASE("zero confidence level stays between the unconstrained and a positive level") {
  const ExampleInstance ex = example_mass_spring(0.0);
  const QuadraticCost& q = *ex.problem.quadratic_cost;
  const double unconstrained = q(q.H.llt().solve(-0.5 * q.c));
  const MethodResult zero = solve_jccp(ex.problem, Method::spectral);
  const MethodResult low = solve_jccp(example_mass_spring(0.3).problem, Method::spectral);
  REQUIRE(zero.solution.status == SolveStatus::converged);
  REQUIRE(low.solution.status == SolveStatus::converged);
  CHECK(zero.solution.cost_value >= unconstrained - 1e-6);
  CHECK(zero.solution.cost_value <= low.solution.cost_value);
  CHECK(zero.solution.cost_value <= 1.05 * unconstrained);
}
