#include "jccp/nlp_solver.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

namespace jccp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr double kWolfeSigma = 0.9;
// Largest trial displacement, relative to max(1, |z|_inf).
constexpr double kMaxMove = 1e3;

VectorXd project(const VectorXd& z, const VectorXd& lo, const VectorXd& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

// || z - P(z - g) ||_inf
double projected_gradient_norm(const VectorXd& z, const VectorXd& g, const VectorXd& lo,
                               const VectorXd& hi) {
  if (z.size() == 0) return 0.0;
  return (z - project(z - g, lo, hi)).lpNorm<Eigen::Infinity>();
}

void require_finite_cost(double f, const VectorXd* grad) {
  if (!std::isfinite(f) || (grad != nullptr && !grad->allFinite())) {
    throw EvaluationError("non-finite value in cost or cost gradient", -1);
  }
}

void require_finite_constraints(const VectorXd& g, const MatrixXd* jac) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g(i)) || (jac != nullptr && !jac->row(i).allFinite())) {
      throw EvaluationError("non-finite value in constraint " + std::to_string(i), static_cast<long>(i));
    }
  }
}

using Objective = std::function<double(const VectorXd&, VectorXd&)>;

struct InnerResult {
  int iterations = 0;
  double value = 0.0;
  double pg_norm = 0.0;
};

// Projected L-BFGS: two-loop recursion restricted to the free variables,
// backtracking along the projection arc.
InnerResult projected_lbfgs(const Objective& fg, VectorXd& z, const VectorXd& lo, const VectorXd& hi,
                            double tol, int max_iter, int memory) {
  const Eigen::Index n = z.size();
  VectorXd g(n);
  double f = fg(z, g);

  std::deque<VectorXd> s_hist;
  std::deque<VectorXd> y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_buf;

  VectorXd zn(n), gn(n), d(n), q(n);
  std::vector<char> active(static_cast<std::size_t>(n));
  InnerResult res;
  int stall = 0;

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    res.pg_norm = projected_gradient_norm(z, g, lo, hi);
    if (res.pg_norm <= tol) break;

    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = z(i) <= lo(i) && g(i) > 0;
      const bool at_hi = z(i) >= hi(i) && g(i) < 0;
      active[static_cast<std::size_t>(i)] = at_lo || at_hi;
    }
    auto mask = [&](VectorXd& v) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[static_cast<std::size_t>(i)]) v(i) = 0.0;
    };

    q = g;
    mask(q);
    const std::size_t k = s_hist.size();
    alpha_buf.assign(k, 0.0);
    for (std::size_t j = k; j-- > 0;) {
      alpha_buf[j] = rho_hist[j] * s_hist[j].dot(q);
      q -= alpha_buf[j] * y_hist[j];
      mask(q);
    }
    if (k > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(q);
      q += (alpha_buf[j] - beta) * s_hist[j];
      mask(q);
    }
    d = -q;

    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      mask(d);
      slope = g.dot(d);
    }

    double step = 1.0;
    const double d_max = std::max(d.lpNorm<Eigen::Infinity>(), 1e-300);
    if (s_hist.empty()) step = std::min(1.0, 1.0 / d_max);
    step = std::min(step, kMaxMove * std::max(1.0, z.lpNorm<Eigen::Infinity>()) / d_max);

    // Armijo, or the approximate Wolfe test of Hager and Zhang once f is
    // flat to rounding: sigma phi'(0) <= phi'(a) <= (2 delta - 1) phi'(0).
    bool accepted = false;
    double fn = f;
    const double noise = 1e-12 * std::abs(f);
    for (int ls = 0; ls < 60; ++ls) {
      zn = project(z + step * d, lo, hi);
      const double predicted = g.dot(zn - z);
      if (predicted < 0.0) {
        fn = fg(zn, gn);
        if (!std::isfinite(fn)) {
          step *= 0.5;
          continue;
        }
        const double slope_new = gn.dot(zn - z);
        const bool armijo = fn <= f + kArmijo * predicted;
        const bool approx_wolfe = fn <= f + noise && slope_new >= kWolfeSigma * predicted &&
                                  slope_new <= (2.0 * kArmijo - 1.0) * predicted;
        if (armijo || approx_wolfe) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (s_hist.empty()) break;  // steepest descent failed too
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    const VectorXd s = zn - z;
    const VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      if (static_cast<int>(s_hist.size()) == memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }

    const double pg_new = projected_gradient_norm(zn, gn, lo, hi);
    stall = (f - fn <= 1e-15 * std::max(1.0, std::abs(f)) && pg_new >= res.pg_norm) ? stall + 1 : 0;
    z = zn;
    g = gn;
    f = fn;
    if (stall >= 5) {
      res.pg_norm = projected_gradient_norm(z, g, lo, hi);
      break;
    }
  }
  if (res.iterations == max_iter) res.pg_norm = projected_gradient_norm(z, g, lo, hi);
  res.value = f;
  return res;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// [-1, 1), 53 random bits
double symmetric_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

void validate(const Nlp& nlp, const SolverOptions& opts) {
  if (!(opts.kkt_tol > 0.0) || !(opts.cons_tol > 0.0)) {
    throw ValidationError("solver tolerances must be positive");
  }
  if (opts.max_outer < 1 || opts.max_inner < 1 || opts.lbfgs_memory < 1) {
    throw ValidationError("solver iteration limits must be positive");
  }
  if (nlp.lower.size() != nlp.dim || nlp.upper.size() != nlp.dim) {
    throw ValidationError("Nlp bounds do not match its dimension");
  }
  if ((nlp.lower.array() > nlp.upper.array()).any()) {
    throw ValidationError("Nlp lower bound exceeds upper bound");
  }
  const MatrixXd& s = nlp.primary_scaling;
  if (s.size() > 0) {
    const Eigen::Index np = nlp.num_primary;
    if (s.rows() != np || s.cols() != np) throw ValidationError("primary_scaling must be num_primary square");
    if ((s.diagonal().array() == 0.0).any()) throw ValidationError("primary_scaling is singular");
    if (nlp.lower.head(np).array().isFinite().any() || nlp.upper.head(np).array().isFinite().any()) {
      throw ValidationError("primary_scaling requires an unbounded primary block");
    }
  }
}

// The same program in y = S x coordinates on the primary block.
Nlp rescaled(const Nlp& nlp) {
  const Eigen::Index np = nlp.num_primary;
  const MatrixXd s = nlp.primary_scaling;
  auto to_x = [s, np](const VectorXd& y) {
    VectorXd z = y;
    z.head(np) = s.triangularView<Eigen::Upper>().solve(y.head(np));
    return z;
  };
  // rows * blockdiag(S^{-1}, I)
  auto pull_back = [s, np](MatrixXd& rows) {
    if (rows.rows() == 0) return;
    const MatrixXd t = s.transpose().triangularView<Eigen::Lower>().solve(rows.leftCols(np).transpose());
    rows.leftCols(np) = t.transpose();
  };
  Nlp out = nlp;
  out.primary_scaling.resize(0, 0);
  out.cost = [cost = nlp.cost, to_x, pull_back](const VectorXd& y, VectorXd* grad) {
    const double f = cost(to_x(y), grad);
    if (grad != nullptr) {
      MatrixXd row = grad->transpose();
      pull_back(row);
      *grad = row.transpose();
    }
    return f;
  };
  out.constraints = [cons = nlp.constraints, to_x, pull_back](const VectorXd& y, VectorXd& g, MatrixXd* jac) {
    cons(to_x(y), g, jac);
    if (jac != nullptr) pull_back(*jac);
  };
  return out;
}

}  // namespace

double max_violation(const Nlp& nlp, const VectorXd& z) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < nlp.dim; ++i) {
    worst = std::max({worst, nlp.lower(i) - z(i), z(i) - nlp.upper(i)});
  }
  if (nlp.num_constraints > 0) {
    VectorXd g(nlp.num_constraints);
    nlp.constraints(z, g, nullptr);
    worst = std::max(worst, g.maxCoeff());
  }
  return worst;
}

SolveResult solve(const Nlp& nlp, const VectorXd& z0, const SolverOptions& opts) {
  validate(nlp, opts);
  if (z0.size() != nlp.dim) throw ValidationError("start point does not match the Nlp dimension");
  if (nlp.primary_scaling.size() > 0) {
    const auto s = nlp.primary_scaling.triangularView<Eigen::Upper>();
    VectorXd y0 = z0;
    y0.head(nlp.num_primary) = s * z0.head(nlp.num_primary);
    SolveResult r = solve(rescaled(nlp), y0, opts);
    r.solution.x = s.solve(r.solution.x);
    return r;
  }
  const Eigen::Index n = nlp.dim;
  const Eigen::Index mc = nlp.num_constraints;
  const VectorXd& lo = nlp.lower;
  const VectorXd& hi = nlp.upper;

  VectorXd z = project(z0, lo, hi);

  // Scale factors frozen at the start point.
  VectorXd grad_f(n);
  double f = nlp.cost(z, &grad_f);
  require_finite_cost(f, &grad_f);
  VectorXd g(mc);
  MatrixXd jac(mc, n);
  if (mc > 0) {
    nlp.constraints(z, g, &jac);
    require_finite_constraints(g, &jac);
  }
  const double cost_scale = 1.0 / std::max(1.0, grad_f.lpNorm<Eigen::Infinity>());
  VectorXd row_scale = VectorXd::Ones(mc);
  for (Eigen::Index i = 0; i < mc; ++i) {
    row_scale(i) = 1.0 / std::max(1.0, jac.row(i).lpNorm<Eigen::Infinity>());
  }

  VectorXd lambda = VectorXd::Zero(mc);
  double penalty = opts.initial_penalty;

  // Buffers reused by the merit function.
  VectorXd gf_buf(n), g_buf(mc), w(mc);
  MatrixXd jac_buf(mc, n);
  const Objective merit = [&](const VectorXd& zz, VectorXd& grad) {
    const double fv = nlp.cost(zz, &gf_buf);
    require_finite_cost(fv, &gf_buf);
    double value = cost_scale * fv;
    grad = cost_scale * gf_buf;
    if (mc > 0) {
      nlp.constraints(zz, g_buf, &jac_buf);
      require_finite_constraints(g_buf, &jac_buf);
      for (Eigen::Index i = 0; i < mc; ++i) {
        const double shifted = std::max(0.0, lambda(i) + penalty * row_scale(i) * g_buf(i));
        value += (shifted * shifted - lambda(i) * lambda(i)) / (2.0 * penalty);
        w(i) = shifted * row_scale(i);
      }
      grad.noalias() += jac_buf.transpose() * w;
    }
    return value;
  };

  SolveResult out;
  Solution& best = out.solution;
  best.status = SolveStatus::max_iter;
  double best_violation = kInf;
  double best_cost = kInf;
  double accepted_violation = kInf;
  double prev_scaled_violation = kInf;
  double inner_tol = 1e-2;

  auto assign = [&](Solution& sol, const VectorXd& zz, double fv, double kkt, double viol) {
    sol.x = zz.head(nlp.num_primary);
    sol.slacks = zz.tail(n - nlp.num_primary);
    sol.cost_value = fv;
    sol.kkt_residual = kkt;
    sol.constraint_violation = viol;
  };

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const InnerResult inner = projected_lbfgs(merit, z, lo, hi, inner_tol, opts.max_inner, opts.lbfgs_memory);

    f = nlp.cost(z, &grad_f);
    require_finite_cost(f, &grad_f);
    double violation = 0.0;
    double scaled_violation = 0.0;
    VectorXd lambda_next = lambda;
    VectorXd lagrangian_grad = cost_scale * grad_f;
    double complementarity = 0.0;
    if (mc > 0) {
      nlp.constraints(z, g, &jac);
      require_finite_constraints(g, &jac);
      for (Eigen::Index i = 0; i < mc; ++i) {
        const double gi = row_scale(i) * g(i);
        violation = std::max(violation, g(i));
        scaled_violation = std::max(scaled_violation, gi);
        lambda_next(i) = std::max(0.0, lambda(i) + penalty * gi);
        complementarity = std::max(complementarity, std::abs(lambda_next(i) * std::min(gi, 0.0)));
      }
      lagrangian_grad.noalias() += jac.transpose() * lambda_next.cwiseProduct(row_scale);
    }
    const double stationarity = projected_gradient_norm(z, lagrangian_grad, lo, hi);
    const double kkt = std::max(stationarity, complementarity);

    OuterRecord rec;
    rec.cost = f;
    rec.max_violation = violation;
    rec.penalty = penalty;
    rec.inner_iterations = inner.iterations;
    rec.accepted = violation <= accepted_violation;
    if (rec.accepted) accepted_violation = violation;
    out.trace.outer.push_back(rec);

    const bool feasible = violation <= opts.cons_tol;
    const bool better = feasible ? (best_violation > opts.cons_tol || f < best_cost)
                                 : violation < best_violation;
    if (better) {
      assign(best, z, f, kkt, violation);
      best_violation = violation;
      best_cost = f;
    }

    if (feasible && kkt <= opts.kkt_tol) {
      assign(best, z, f, kkt, violation);
      best.status = SolveStatus::converged;
      return out;
    }

    // An inexact inner solve says little about the penalty; retry it first.
    const bool inner_solved = inner.pg_norm <= inner_tol;
    lambda = lambda_next;
    if (inner_solved && !feasible && scaled_violation > opts.violation_decrease * prev_scaled_violation) {
      penalty *= opts.penalty_growth;
    }
    prev_scaled_violation = scaled_violation;
    if (inner_solved) inner_tol = std::max(0.1 * inner_tol, 0.5 * opts.kkt_tol);

    if (penalty > 1e12 && !feasible) {
      best.status = SolveStatus::infeasible_detected;
      return out;
    }
  }
  return out;
}

VectorXd multistart_point(const Nlp& nlp, const VectorXd& z0, std::uint64_t seed, int index) {
  VectorXd z = project(z0, nlp.lower, nlp.upper);
  if (index == 0) return z;
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index))));
  for (Eigen::Index i = 0; i < nlp.dim; ++i) {
    const double r = symmetric_unit(rng);
    if (i < nlp.num_primary) {
      z(i) = z(i) == 0.0 ? 0.1 * r : z(i) * (1.0 + 0.1 * r);
    } else {
      const double room = std::min(z(i) - nlp.lower(i), nlp.upper(i) - z(i));
      if (std::isfinite(room)) z(i) += 0.5 * room * r;
    }
  }
  return project(z, nlp.lower, nlp.upper);
}

SolveResult multistart_solve(const Nlp& nlp, const VectorXd& z0, const SolverOptions& opts) {
  if (opts.multistart_count < 1) throw ValidationError("multistart_count must be >= 1");
  SolveResult best;
  bool have = false;
  for (int k = 0; k < opts.multistart_count; ++k) {
    SolveResult r = solve(nlp, multistart_point(nlp, z0, opts.seed, k), opts);
    if (!have) {
      best = std::move(r);
      have = true;
      continue;
    }
    const Solution& a = r.solution;
    const Solution& b = best.solution;
    const bool a_conv = a.status == SolveStatus::converged;
    const bool b_conv = b.status == SolveStatus::converged;
    bool take;
    if (a_conv != b_conv) {
      take = a_conv;
    } else if (a_conv) {
      take = a.cost_value < b.cost_value;
    } else {
      take = a.constraint_violation < b.constraint_violation;
    }
    if (take) best = std::move(r);
  }
  return best;
}

double check_gradients(const Nlp& nlp, const VectorXd& z, double h) {
  const Eigen::Index n = nlp.dim;
  const Eigen::Index mc = nlp.num_constraints;
  VectorXd grad(n);
  nlp.cost(z, &grad);
  VectorXd g(mc);
  MatrixXd jac(mc, n);
  if (mc > 0) nlp.constraints(z, g, &jac);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
  };
  double worst = 0.0;
  VectorXd zp = z;
  VectorXd gp(mc), gm(mc);
  for (Eigen::Index k = 0; k < n; ++k) {
    zp(k) = z(k) + h;
    const double fp = nlp.cost(zp, nullptr);
    if (mc > 0) nlp.constraints(zp, gp, nullptr);
    zp(k) = z(k) - h;
    const double fm = nlp.cost(zp, nullptr);
    if (mc > 0) nlp.constraints(zp, gm, nullptr);
    zp(k) = z(k);
    worst = std::max(worst, rel(grad(k), (fp - fm) / (2.0 * h)));
    for (Eigen::Index i = 0; i < mc; ++i) {
      worst = std::max(worst, rel(jac(i, k), (gp(i) - gm(i)) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace jccp
