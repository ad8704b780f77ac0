#include "jccp/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace jccp {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Per-run record, reduced afterwards in run order.
struct RunRecord {
  bool satisfied = true;
  double cost = 0.0;
  MatrixXd outputs;  // N x r
};

template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::max(1, std::min<int>(static_cast<int>(std::thread::hardware_concurrency()), 8));
  if (workers == 1 || count < 256) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t index)
    : key_(mix64(mix64(seed + kGolden) ^ (index * kGolden + 0x632BE59BD9B4E019ULL))) {}

double NormalStream::uniform() {
  ++counter_;
  const std::uint64_t bits = mix64(key_ + counter_ * kGolden);
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double NormalStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

GaussianSampler::GaussianSampler(const SymMatrixd& cov) {
  const EigenPaird eig = sym_eig(cov);
  factor_ = eig.theta;
  for (Eigen::Index j = 0; j < eig.lambda.size(); ++j) {
    factor_.col(j) *= std::sqrt(std::max(0.0, eig.lambda(j)));
  }
}

VectorXd GaussianSampler::sample(NormalStream& stream) const {
  VectorXd z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = stream.next();
  return factor_ * z;
}

VectorXd gaussian_sample(const SymMatrixd& cov, NormalStream& stream) {
  return GaussianSampler(cov).sample(stream);
}

MonteCarloReport simulate_batch(const GaussMarkovModel& model, const HorizonSpec& spec,
                                const VectorXd& u_seq, int runs, std::uint64_t seed) {
  if (runs < 1) throw ValidationError("simulate_batch: runs must be >= 1");
  model.validate();
  const Eigen::Index p = model.p(), r = model.r();
  const int N = spec.N;
  if (u_seq.size() != p * N) throw ValidationError("simulate_batch: u_seq must have length p N");

  const GaussianSampler x0_sampler(model.x0_cov);
  const GaussianSampler w_sampler(model.w_cov);

  std::vector<RunRecord> records(static_cast<std::size_t>(runs));
  parallel_for(runs, [&](int run) {
    NormalStream stream(seed, static_cast<std::uint64_t>(run));
    RunRecord& rec = records[static_cast<std::size_t>(run)];
    rec.outputs.resize(N, r);
    VectorXd x = model.x0_mean + x0_sampler.sample(stream);
    VectorXd w = w_sampler.sample(stream);  // w_0
    for (int t = 1; t <= N; ++t) {
      const auto u = u_seq.segment(p * (t - 1), p);
      x = model.A * x + model.Bu * u + model.Bw * w;
      rec.cost += x.dot(spec.Q * x) + u.dot(spec.R * u);
      w = w_sampler.sample(stream);  // w_t
      VectorXd y = model.C * x + model.Dw * w;
      if (t < N) y += model.Du * u_seq.segment(p * t, p);
      rec.outputs.row(t - 1) = y.transpose();
      if ((y.array() > spec.y_max.array()).any()) rec.satisfied = false;
    }
  });

  MonteCarloReport rep;
  rep.runs = runs;
  rep.seed = seed;
  rep.satisfied.resize(static_cast<std::size_t>(runs));
  rep.envelope.mean = MatrixXd::Zero(N, r);
  rep.envelope.lo = MatrixXd::Constant(N, r, std::numeric_limits<double>::infinity());
  rep.envelope.hi = MatrixXd::Constant(N, r, -std::numeric_limits<double>::infinity());
  long hits = 0;
  double cost_sum = 0.0, cost_sq = 0.0;
  for (int k = 0; k < runs; ++k) {
    const RunRecord& rec = records[static_cast<std::size_t>(k)];
    rep.satisfied[static_cast<std::size_t>(k)] = rec.satisfied ? 1 : 0;
    hits += rec.satisfied ? 1 : 0;
    cost_sum += rec.cost;
    cost_sq += rec.cost * rec.cost;
    rep.envelope.mean += rec.outputs;
    rep.envelope.lo = rep.envelope.lo.cwiseMin(rec.outputs);
    rep.envelope.hi = rep.envelope.hi.cwiseMax(rec.outputs);
  }
  const double n = static_cast<double>(runs);
  rep.envelope.mean /= n;
  rep.beta_hat = static_cast<double>(hits) / n;
  rep.beta_hat_stderr = std::sqrt(rep.beta_hat * (1.0 - rep.beta_hat) / n);
  rep.mean_realized_cost = cost_sum / n;
  const double var = runs > 1 ? std::max(0.0, (cost_sq - n * rep.mean_realized_cost * rep.mean_realized_cost) / (n - 1.0)) : 0.0;
  rep.realized_cost_stderr = std::sqrt(var / n);
  return rep;
}

double expected_realized_cost(const GaussMarkovModel& model, const HorizonSpec& spec, const VectorXd& u_seq) {
  return stack_cost(model, spec)(u_seq) + stack_cost_variance_term(model, spec);
}

ProbabilityEstimate estimate_joint_probability(const JccpProblem& p, const VectorXd& x, int samples,
                                               std::uint64_t seed) {
  if (samples < 1) throw ValidationError("estimate_joint_probability: samples must be >= 1");
  const GaussianSampler sampler(p.sigma);
  const VectorXd mu = p.mean(x);
  std::vector<char> hit(static_cast<std::size_t>(samples));
  parallel_for(samples, [&](int k) {
    NormalStream stream(seed, static_cast<std::uint64_t>(k));
    const VectorXd phi = mu + sampler.sample(stream);
    hit[static_cast<std::size_t>(k)] = ((p.M * phi - p.m).array() <= 0.0).all() ? 1 : 0;
  });
  ProbabilityEstimate est;
  est.samples = samples;
  for (char h : hit) est.hits += h;
  est.estimate = static_cast<double>(est.hits) / samples;
  est.standard_error = std::sqrt(est.estimate * (1.0 - est.estimate) / samples);
  return est;
}

}  // namespace jccp
