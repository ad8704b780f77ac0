#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jccp/errors.hpp"

namespace jccp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense symmetric matrix. Construction symmetrizes the input, so
/// entries(i, j) == entries(j, i) holds bit-for-bit afterwards.
template <typename Scalar>
class SymMatrix {
 public:
  SymMatrix() : entries_(MatrixX<Scalar>::Zero(1, 1)) {}

  template <typename Derived>
  explicit SymMatrix(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) {
      throw ValidationError("SymMatrix: matrix is not square");
    }
    if (m.rows() < 1) throw ValidationError("SymMatrix: dimension must be >= 1");
    entries_ = (m + m.transpose()) / Scalar(2);
  }

  static SymMatrix zero(Eigen::Index n) { return SymMatrix(MatrixX<Scalar>::Zero(n, n)); }
  static SymMatrix identity(Eigen::Index n) {
    return SymMatrix(MatrixX<Scalar>::Identity(n, n));
  }

  Eigen::Index size() const { return entries_.rows(); }
  const MatrixX<Scalar>& matrix() const { return entries_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  Scalar max_abs() const { return entries_.cwiseAbs().maxCoeff(); }

 private:
  MatrixX<Scalar> entries_;
};

using SymMatrixd = SymMatrix<double>;

/// Orthogonal eigenvector matrix (columns) and eigenvalues, descending.
template <typename Scalar>
struct EigenPair {
  MatrixX<Scalar> theta;
  VectorX<Scalar> lambda;
};

using EigenPaird = EigenPair<double>;

/// Symmetric eigendecomposition S = theta diag(lambda) theta^T by cyclic
/// Jacobi rotations.
///
/// Eigenvalues are sorted descending (stable on ties) and each eigenvector
/// is signed so that its largest-magnitude component (first one on ties) is
/// positive. Throws ConvergenceError after `max_sweeps` sweeps.
template <typename Scalar>
EigenPair<Scalar> sym_eig(const SymMatrix<Scalar>& s, int max_sweeps = 100) {
  using std::abs;
  using std::sqrt;
  const Eigen::Index n = s.size();
  MatrixX<Scalar> a = s.matrix();
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);

  const Scalar scale = std::max(s.max_abs(), Scalar(1e-300));
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  auto off_norm = [&] {
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < j; ++i) sum += a(i, j) * a(i, j);
    return sqrt(sum);
  };

  bool converged = n == 1;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (off_norm() <= eps * eps * scale) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar app = a(p, p);
        const Scalar aqq = a(q, q);
        // skip rotations that would not change the diagonal in floating point
        if (sweep > 3 && abs(apq) <= eps * Scalar(1e-3) * std::min(abs(app), abs(aqq))) {
          a(p, q) = a(q, p) = 0;
          continue;
        }
        const Scalar tau = (aqq - app) / (2 * apq);
        const Scalar t = (tau >= 0 ? Scalar(1) : Scalar(-1)) / (abs(tau) + sqrt(Scalar(1) + tau * tau));
        const Scalar c = Scalar(1) / sqrt(Scalar(1) + t * t);
        const Scalar sn = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged && off_norm() > eps * eps * scale) {
    throw ConvergenceError("sym_eig: Jacobi iteration did not converge");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  EigenPair<Scalar> out;
  out.theta.resize(n, n);
  out.lambda.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.lambda(k) = a(src, src);
    auto col = v.col(src);
    Eigen::Index arg = 0;
    Scalar best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (abs(col(i)) > best) {
        best = abs(col(i));
        arg = i;
      }
    }
    out.theta.col(k) = col(arg) < 0 ? VectorX<Scalar>(-col) : VectorX<Scalar>(col);
  }
  return out;
}

/// Matrix exponential by scaling and squaring around a truncated Taylor
/// series. The scaling s is the smallest with ||A||_1 / 2^s <= 0.5.
template <typename Derived>
MatrixX<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = a.rows();
  const Scalar norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  while (norm1 / std::ldexp(Scalar(1), s) > Scalar(0.5)) ++s;
  const MatrixX<Scalar> scaled = a / std::ldexp(Scalar(1), s);

  // 0.5^k / k! < 1e-20 by k = 18
  MatrixX<Scalar> result = MatrixX<Scalar>::Identity(n, n);
  MatrixX<Scalar> term = MatrixX<Scalar>::Identity(n, n);
  for (int k = 1; k <= 24; ++k) {
    term = (term * scaled) / Scalar(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() <= std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3)) break;
  }
  for (int i = 0; i < s; ++i) result = result * result;
  return result;
}

template <typename Scalar>
struct Discretized {
  MatrixX<Scalar> a;
  MatrixX<Scalar> b;
};

/// Zero-order-hold discretization of dx/dt = Ac x + Bc u with sample time dt,
/// read off exp([[Ac, Bc], [0, 0]] dt).
template <typename DerivedA, typename DerivedB>
Discretized<typename DerivedA::Scalar> zoh_discretize(const Eigen::MatrixBase<DerivedA>& ac,
                                                      const Eigen::MatrixBase<DerivedB>& bc,
                                                      typename DerivedA::Scalar dt) {
  using Scalar = typename DerivedA::Scalar;
  if (!(dt > 0)) throw DomainError("zoh_discretize: dt must be positive");
  if (ac.rows() != ac.cols() || bc.rows() != ac.rows()) {
    throw ValidationError("zoh_discretize: dimension mismatch");
  }
  const Eigen::Index n = ac.rows();
  const Eigen::Index p = bc.cols();
  MatrixX<Scalar> aug = MatrixX<Scalar>::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = ac * dt;
  aug.topRightCorner(n, p) = bc * dt;
  const MatrixX<Scalar> e = expm(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, p)};
}

}  // namespace jccp
