#pragma once

// Lotka-Volterra systems on the cluster Poisson structure {x_i, x_j} = a_ij x_i x_j.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lvpoisson/error.hpp"

namespace lvp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace tolerance {
inline constexpr double antisymmetry = 1e-12;
inline constexpr double kernel_relative = 1e-12;
inline constexpr double fixed_point_residual = 1e-10;
}  // namespace tolerance

/// A point of the open positive quadrant.
class State {
 public:
  explicit State(Vector x) : x_(std::move(x)) {
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      if (!(std::isfinite(x_[i]) && x_[i] > 0.0)) {
        std::ostringstream os;
        os << "component x" << i + 1 << " = " << x_[i] << " is outside the positive quadrant";
        throw Error(ErrorKind::DomainError, os.str());
      }
    }
  }
  State(std::initializer_list<double> xs) : State(Vector::Map(xs.begin(), static_cast<Eigen::Index>(xs.size()))) {}

  const Vector& values() const noexcept { return x_; }
  Eigen::Index size() const noexcept { return x_.size(); }
  double operator[](Eigen::Index i) const { return x_[i]; }
  Vector log() const { return x_.array().log().matrix(); }

 private:
  Vector x_;
};

/// Immutable Lotka-Volterra system x_j' = eps_j x_j + sum_k a_jk x_j x_k with a solved
/// positive fixed point q. Construct through build_system().
class LVSystem {
 public:
  Eigen::Index dim() const noexcept { return a_.rows(); }
  const Matrix& interaction() const noexcept { return a_; }
  const Vector& environment() const noexcept { return eps_; }
  const Vector& fixed_point() const noexcept { return q_; }

 private:
  LVSystem(Matrix a, Vector eps, Vector q) : a_(std::move(a)), eps_(std::move(eps)), q_(std::move(q)) {}
  friend LVSystem build_system(const Matrix&, const Vector&, const std::optional<Vector>&);

  Matrix a_;
  Vector eps_;
  Vector q_;
};

/// Exponent vectors v in ker A; each x -> prod x_k^{v_k} is a Casimir.
struct CasimirBasis {
  std::vector<Vector> exponents;

  std::size_t size() const noexcept { return exponents.size(); }
  bool empty() const noexcept { return exponents.empty(); }
};

/// Log-linear first integral: sum_j linear_j x_j + sum_j log_j log x_j.
struct FirstIntegral {
  std::string name;
  Vector linear;
  Vector log;

  double operator()(const State& x) const {
    return linear.dot(x.values()) + log.dot(x.log());
  }
};

namespace detail {

inline void require_dim(const LVSystem& sys, Eigen::Index n, const char* what) {
  if (n != sys.dim()) {
    std::ostringstream os;
    os << what << " has dimension " << n << ", system has " << sys.dim();
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

/// Orthonormal basis (columns) of ker M, thresholding singular values relative to the largest.
inline Matrix kernel_basis(const Matrix& m, double relative_threshold = tolerance::kernel_relative) {
  const Eigen::Index n = m.cols();
  if (n == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0.0 && s[i] > relative_threshold * smax) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

/// Reduced row echelon form of the rows of m (in place, partial pivoting).
inline Matrix row_echelon(Matrix m, double eps = 1e-12) {
  Eigen::Index lead = 0;
  const Eigen::Index rows = m.rows(), cols = m.cols();
  for (Eigen::Index r = 0; r < rows && lead < cols; ++r, ++lead) {
    Eigen::Index pivot = r;
    while (true) {
      m.col(lead).segment(r, rows - r).cwiseAbs().maxCoeff(&pivot);
      pivot += r;
      if (std::abs(m(pivot, lead)) > eps) break;
      if (++lead == cols) return m;
    }
    m.row(r).swap(m.row(pivot));
    m.row(r) /= m(r, lead);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i != r) m.row(i) -= m(i, lead) * m.row(r);
    }
  }
  return m;
}

}  // namespace detail

/// Builds a system from an interaction matrix and environment vector.
///
/// A is symmetrized to exact antisymmetry; a change larger than 1e-12 in any entry is
/// rejected. The fixed point solves A q = -eps. When A is singular the solution set is
/// the affine space q_ls + ker A: a supplied reference is projected onto it, otherwise
/// the minimum-norm solution is used when positive, else the midpoint of the positive
/// segment along a one-dimensional kernel, or the point nearest (1, ..., 1) for larger
/// kernels.
inline LVSystem build_system(const Matrix& a, const Vector& eps,
                             const std::optional<Vector>& q_reference = std::nullopt) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::InvalidArgument, "interaction matrix must be square and non-empty");
  }
  if (eps.size() != a.rows()) {
    throw Error(ErrorKind::InvalidArgument, "environment vector size does not match interaction matrix");
  }
  if (!a.allFinite() || !eps.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "non-finite coefficient");
  }
  const Matrix sym = 0.5 * (a - a.transpose());
  const double change = (sym - a).cwiseAbs().maxCoeff();
  if (change > tolerance::antisymmetry) {
    std::ostringstream os;
    os << "symmetrization changes an entry by " << change;
    throw Error(ErrorKind::NotAntisymmetric, os.str());
  }

  const Eigen::Index n = a.rows();
  const Vector q_ls = sym.completeOrthogonalDecomposition().solve(-eps);
  const double scale = std::max(1.0, eps.cwiseAbs().maxCoeff());
  if ((sym * q_ls + eps).cwiseAbs().maxCoeff() > tolerance::fixed_point_residual * scale) {
    throw Error(ErrorKind::NoPositiveFixedPoint, "A q = -eps has no solution");
  }
  const Matrix kernel = detail::kernel_basis(sym);

  Vector q = q_ls;
  if (q_reference) {
    if (q_reference->size() != n) {
      throw Error(ErrorKind::InvalidArgument, "reference fixed point has wrong dimension");
    }
    q = q_ls + kernel * (kernel.transpose() * (*q_reference - q_ls));
  } else if (q.minCoeff() <= 0.0 && kernel.cols() > 1) {
    // Representative closest to (1, ..., 1).
    q = q_ls + kernel * (kernel.transpose() * (Vector::Ones(n) - q_ls));
  } else if (q.minCoeff() <= 0.0 && kernel.cols() == 1) {
    // q_ls + t k > 0 componentwise.
    const Vector k = kernel.col(0);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool feasible = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (k[j] > 0.0) {
        lo = std::max(lo, -q_ls[j] / k[j]);
      } else if (k[j] < 0.0) {
        hi = std::min(hi, -q_ls[j] / k[j]);
      } else if (q_ls[j] <= 0.0) {
        feasible = false;
      }
    }
    if (feasible && lo < hi) {
      double t = 0.0;
      if (std::isfinite(lo) && std::isfinite(hi)) t = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) t = lo + 1.0;
      else t = hi - 1.0;
      q = q_ls + t * k;
    }
  }
  if (q.minCoeff() <= 0.0) {
    std::ostringstream os;
    os << "no strictly positive fixed point (candidate q = " << q.transpose() << ")";
    throw Error(ErrorKind::NoPositiveFixedPoint, os.str());
  }
  return LVSystem(sym, eps, q);
}

/// H(x) = sum_j (x_j - q_j log x_j).
inline double hamiltonian(const LVSystem& sys, const State& x) {
  detail::require_dim(sys, x.size(), "state");
  return (x.values() - sys.fixed_point().cwiseProduct(x.log())).sum();
}

/// dH/dx_j = 1 - q_j / x_j.
inline Vector hamiltonian_gradient(const LVSystem& sys, const State& x) {
  detail::require_dim(sys, x.size(), "state");
  return (1.0 - sys.fixed_point().array() / x.values().array()).matrix();
}

/// Right-hand side eps_j x_j + sum_k a_jk x_j x_k.
inline Vector vector_field(const LVSystem& sys, const State& x) {
  detail::require_dim(sys, x.size(), "state");
  const Vector& xv = x.values();
  return xv.cwiseProduct(sys.environment() + sys.interaction() * xv);
}

/// Poisson tensor pi_jk = a_jk x_j x_k of the cluster structure.
inline Matrix poisson_tensor(const LVSystem& sys, const State& x) {
  detail::require_dim(sys, x.size(), "state");
  const Vector& xv = x.values();
  return xv.asDiagonal() * sys.interaction() * xv.asDiagonal();
}

/// {x_j, H} = sum_k pi_jk dH/dx_k. Agrees with vector_field() whenever q is a fixed point.
inline Vector hamiltonian_vector_field(const LVSystem& sys, const State& x) {
  return poisson_tensor(sys, x) * hamiltonian_gradient(sys, x);
}

/// Basis of ker A in reduced row echelon form, so the first nonzero entry of each
/// exponent vector is 1.
inline CasimirBasis casimir_basis(const LVSystem& sys) {
  const Matrix kernel = detail::kernel_basis(sys.interaction());
  CasimirBasis basis;
  if (kernel.cols() == 0) return basis;
  Matrix rows = detail::row_echelon(kernel.transpose());
  rows = rows.unaryExpr([](double v) { return std::abs(v) < 1e-14 ? 0.0 : v; });
  for (Eigen::Index r = 0; r < rows.rows(); ++r) basis.exponents.emplace_back(rows.row(r).transpose());
  return basis;
}

/// sum_k v_k log x_k.
inline double log_casimir_value(const Vector& exponents, const State& x) {
  if (exponents.size() != x.size()) {
    throw Error(ErrorKind::InvalidArgument, "exponent vector and state differ in dimension");
  }
  return exponents.dot(x.log());
}

/// prod_k x_k^{v_k}, evaluated as exp(sum_k v_k log x_k).
inline double casimir_value(const Vector& exponents, const State& x) {
  return std::exp(log_casimir_value(exponents, x));
}

}  // namespace lvp
