#include "jccp/problem.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace jccp {

using nlohmann::json;

double DifferentiableMap::finite_difference_error(const VectorXd& x, double h) const {
  const MatrixXd jac = jacobian(x);
  double worst = 0.0;
  VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + h;
    const VectorXd fp = (*this)(xp);
    xp(k) = x(k) - h;
    const VectorXd fm = (*this)(xp);
    xp(k) = x(k);
    const VectorXd fd = (fp - fm) / (2.0 * h);
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double denom = std::max({1.0, std::abs(fd(i)), std::abs(jac(i, k))});
      worst = std::max(worst, std::abs(fd(i) - jac(i, k)) / denom);
    }
  }
  return worst;
}

DifferentiableMap AffineMap::as_map() const {
  return DifferentiableMap(
      G.cols(), G.rows(), [G = G, h = h](const VectorXd& x) -> VectorXd { return G * x + h; },
      [G = G](const VectorXd&) -> MatrixXd { return G; });
}

DifferentiableMap QuadraticCost::as_map() const {
  const Eigen::LLT<MatrixXd> llt(H);
  if (H.size() > 0 && llt.info() == Eigen::Success) {
    const MatrixXd u = llt.matrixU();
    // (U x + w)^T (U x + w) = x^T H x + 2 w^T U x + |w|^2, so U^T w = c / 2
    const VectorXd w = u.transpose().triangularView<Eigen::Lower>().solve(0.5 * c);
    const double k = constant - w.squaredNorm();
    return DifferentiableMap(
        H.cols(), 1,
        [u, w, k](const VectorXd& x) -> VectorXd {
          return VectorXd::Constant(1, (u.triangularView<Eigen::Upper>() * x + w).squaredNorm() + k);
        },
        [u, w](const VectorXd& x) -> MatrixXd {
          const VectorXd r = u.triangularView<Eigen::Upper>() * x + w;
          return 2.0 * (u.transpose().triangularView<Eigen::Lower>() * r).transpose();
        });
  }
  return DifferentiableMap(
      H.cols(), 1,
      [q = *this](const VectorXd& x) -> VectorXd { return VectorXd::Constant(1, q(x)); },
      [q = *this](const VectorXd& x) -> MatrixXd { return q.gradient(x).transpose(); });
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::infeasible_detected:
      return "infeasible_detected";
  }
  return "unknown";
}

void JccpProblem::validate() const {
  if (cost.out_dim() != 1) throw ValidationError("cost must be scalar-valued");
  if (cost.in_dim() != mean.in_dim()) {
    throw ValidationError("dimension mismatch: cost and mean take different n_x");
  }
  if (sigma.size() != n_phi()) throw ValidationError("dimension mismatch: sigma is not n_phi x n_phi");
  if (M.cols() != n_phi()) throw ValidationError("dimension mismatch: M columns != n_phi");
  if (M.rows() != m.size()) throw ValidationError("dimension mismatch: M rows != len(m)");
  if (n_m() < 1) throw ValidationError("n_m must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("beta must lie in [0, 1)");
  if (!sigma.matrix().allFinite() || !M.allFinite() || !m.allFinite()) {
    throw ValidationError("non-finite entry in sigma, M or m");
  }
  const EigenPaird eig = sym_eig(sigma);
  const double tol = kPsdTolerance * sigma.max_abs();
  if (eig.lambda.minCoeff() < -tol) throw ValidationError("sigma not PSD");
}

JccpProblem make_problem(QuadraticCost cost, AffineMap mean, const MatrixXd& sigma, MatrixXd M,
                         VectorXd m, double beta) {
  if (cost.H.rows() != cost.H.cols() || cost.c.size() != cost.H.rows()) {
    throw ValidationError("dimension mismatch: cost H/c");
  }
  if (mean.h.size() != mean.G.rows()) throw ValidationError("dimension mismatch: mean G/h");
  JccpProblem p;
  p.cost = cost.as_map();
  p.mean = mean.as_map();
  p.sigma = SymMatrixd(sigma);
  p.M = std::move(M);
  p.m = std::move(m);
  p.beta = beta;
  p.quadratic_cost = std::move(cost);
  p.affine_mean = std::move(mean);
  p.validate();
  return p;
}

namespace {

const json& field(const json& obj, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ParseError(std::string("missing field '") + name + "'");
  }
  return obj.at(name);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("field '" + where + "' must be a number");
  return v.get<double>();
}

VectorXd vector_field(const json& obj, const char* name, Eigen::Index expect) {
  const json& v = field(obj, name);
  if (!v.is_array()) throw ParseError(std::string("field '") + name + "' must be an array");
  if (static_cast<Eigen::Index>(v.size()) != expect) {
    throw ValidationError(std::string("dimension mismatch: field '") + name + "' has length " +
                          std::to_string(v.size()) + ", expected " + std::to_string(expect));
  }
  VectorXd out(expect);
  for (Eigen::Index i = 0; i < expect; ++i) out(i) = number(v[static_cast<std::size_t>(i)], name);
  return out;
}

MatrixXd matrix_field(const json& obj, const char* name, Eigen::Index rows, Eigen::Index cols) {
  const json& v = field(obj, name);
  if (!v.is_array()) throw ParseError(std::string("field '") + name + "' must be an array of arrays");
  if (static_cast<Eigen::Index>(v.size()) != rows) {
    throw ValidationError(std::string("dimension mismatch: field '") + name + "' has " +
                          std::to_string(v.size()) + " rows, expected " + std::to_string(rows));
  }
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw ParseError(std::string("field '") + name + "' rows must be arrays");
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(std::string("dimension mismatch: field '") + name + "' row " +
                            std::to_string(i) + " has " + std::to_string(row.size()) +
                            " entries, expected " + std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = number(row[static_cast<std::size_t>(j)], name);
  }
  return out;
}

Eigen::Index count_field(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_number_integer() || v.get<long>() < 1) {
    throw ParseError(std::string("field '") + name + "' must be a positive integer");
  }
  return v.get<Eigen::Index>();
}

json to_json(const MatrixXd& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

JccpProblem load_problem(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed problem file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("problem file must be a JSON object");

  const Eigen::Index n_x = count_field(doc, "n_x");
  const Eigen::Index n_phi = count_field(doc, "n_phi");
  const Eigen::Index n_m = count_field(doc, "n_m");
  const double beta = number(field(doc, "beta"), "beta");

  const json& cost = field(doc, "cost");
  QuadraticCost q;
  q.H = matrix_field(cost, "H", n_x, n_x);
  q.c = vector_field(cost, "c", n_x);
  q.constant = number(field(cost, "const"), "cost.const");

  const json& mean = field(doc, "mean");
  AffineMap mu;
  mu.G = matrix_field(mean, "G", n_phi, n_x);
  mu.h = vector_field(mean, "h", n_phi);

  const MatrixXd sigma = matrix_field(doc, "sigma", n_phi, n_phi);
  MatrixXd M = matrix_field(doc, "M", n_m, n_phi);
  VectorXd m = vector_field(doc, "m", n_m);

  auto asymmetric = [](const MatrixXd& a) {
    return (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
  };
  if (asymmetric(q.H)) throw ValidationError("cost.H not symmetric");
  if (asymmetric(sigma)) throw ValidationError("sigma not symmetric");
  q.H = (q.H + q.H.transpose()) / 2.0;
  return make_problem(std::move(q), std::move(mu), sigma, std::move(M), std::move(m), beta);
}

std::string serialize_problem(const JccpProblem& p) {
  if (!p.quadratic_cost || !p.affine_mean) {
    throw ValidationError("only quadratic-cost / affine-mean problems can be serialized");
  }
  json doc;
  doc["n_x"] = p.n_x();
  doc["n_phi"] = p.n_phi();
  doc["n_m"] = p.n_m();
  doc["beta"] = p.beta;
  doc["cost"] = {{"H", to_json(p.quadratic_cost->H)},
                 {"c", to_json(p.quadratic_cost->c)},
                 {"const", p.quadratic_cost->constant}};
  doc["mean"] = {{"G", to_json(p.affine_mean->G)}, {"h", to_json(p.affine_mean->h)}};
  doc["sigma"] = to_json(p.sigma.matrix());
  doc["M"] = to_json(p.M);
  doc["m"] = to_json(p.m);
  return doc.dump(1);
}

JccpProblem normalize_problem(const JccpProblem& p) {
  if (p.n_m() >= p.n_phi()) return p;

  JccpProblem out;
  out.cost = p.cost;
  out.quadratic_cost = p.quadratic_cost;
  out.beta = p.beta;
  out.m = p.m;
  out.M = MatrixXd::Identity(p.n_m(), p.n_m());
  out.sigma = SymMatrixd(p.M * p.sigma.matrix() * p.M.transpose());
  if (p.affine_mean) {
    out.affine_mean = AffineMap{p.M * p.affine_mean->G, p.M * p.affine_mean->h};
    out.mean = out.affine_mean->as_map();
  } else {
    out.mean = DifferentiableMap(
        p.n_x(), p.n_m(), [mu = p.mean, M = p.M](const VectorXd& x) -> VectorXd { return M * mu(x); },
        [mu = p.mean, M = p.M](const VectorXd& x) -> MatrixXd { return M * mu.jacobian(x); });
  }
  return out;
}

}  // namespace jccp
