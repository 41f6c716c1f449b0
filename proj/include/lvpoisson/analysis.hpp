#pragma once

// Linearization at singularities, spectral classification, resonance search,
// Lyapunov tangent planes, modified-Hamiltonian analysis of symplectic Euler and
// drift statistics of trajectories.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lvpoisson/system.hpp"
#include "lvpoisson/trajectory.hpp"

namespace lvp {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Linearization

/// d(x_j')/dx_k = delta_jk (eps_j + sum_l a_jl x_l) + a_jk x_j.
inline Matrix linearize(const LVSystem& sys, const State& x) {
  detail::require_dim(sys, x.size(), "state");
  const Vector& xv = x.values();
  Matrix jac = xv.asDiagonal() * sys.interaction();
  jac.diagonal() += sys.environment() + sys.interaction() * xv;
  return jac;
}

// ---------------------------------------------------------------------------
// Spectrum

struct SpectrumReport {
  Matrix matrix;
  std::vector<Complex> eigenvalues;  // sorted by (imag, real)
  int zero_count = 0;
  bool elliptic = false;
  int resonance_bound = 0;
  std::optional<std::vector<long>> resonance;

  /// Imaginary parts of the eigenvalues with positive imaginary part, ascending.
  std::vector<double> frequencies() const {
    std::vector<double> out;
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    for (const auto& l : eigenvalues) {
      if (l.imag() > 1e-9 * scale) out.push_back(l.imag());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline constexpr int default_resonance_bound = 1000;

inline std::optional<std::vector<long>> resonance_search(const std::vector<double>& frequencies, long max_coeff);

/// Numerical eigenvalues, zero count, ellipticity (every nonzero eigenvalue purely
/// imaginary, at least one pair) and a bounded resonance search over the frequencies.
inline SpectrumReport spectrum(const Matrix& m, int resonance_bound = default_resonance_bound) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, "spectrum needs a square matrix");
  SpectrumReport rep;
  rep.matrix = m;
  rep.resonance_bound = resonance_bound;
  if (m.rows() == 0) return rep;
  Eigen::EigenSolver<Matrix> es(m, false);
  const ComplexVector ev = es.eigenvalues();
  rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](const Complex& a, const Complex& b) {
    return a.imag() != b.imag() ? a.imag() < b.imag() : a.real() < b.real();
  });
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double zero_tol = 1e-9 * scale;
  int nonzero = 0;
  bool imaginary = true;
  for (const auto& l : rep.eigenvalues) {
    if (std::abs(l) <= zero_tol) {
      ++rep.zero_count;
      continue;
    }
    ++nonzero;
    if (std::abs(l.real()) > zero_tol) imaginary = false;
  }
  rep.elliptic = nonzero > 0 && imaginary;
  if (rep.elliptic) rep.resonance = resonance_search(rep.frequencies(), resonance_bound);
  return rep;
}

// ---------------------------------------------------------------------------
// Resonance search

namespace detail {

inline std::vector<long> normalize_relation(std::vector<long> nu) {
  for (long v : nu) {
    if (v != 0) {
      if (v < 0) for (auto& w : nu) w = -w;
      break;
    }
  }
  return nu;
}

inline bool better_relation(const std::vector<long>& a, const std::vector<long>& b) {
  long na = 0, nb = 0;
  for (long v : a) na += std::abs(v);
  for (long v : b) nb += std::abs(v);
  if (na != nb) return na < nb;
  return a > b;
}

}  // namespace detail

/// Integer relation nu != 0 with |nu_j| <= max_coeff and |sum nu_j w_j| < 1e-9 |nu|.
/// All but the last coefficient are enumerated; the last is the nearest integer that
/// closes the relation, so the cost is (2 max_coeff + 1)^(r - 1). Among all relations
/// found the one with smallest l1 norm is returned, sign-normalized so its first
/// nonzero entry is positive. A missing result means "none up to the bound".
inline std::optional<std::vector<long>> resonance_search(const std::vector<double>& frequencies, long max_coeff) {
  const std::size_t r = frequencies.size();
  if (max_coeff < 1 || max_coeff > 1'000'000) {
    throw Error(ErrorKind::InvalidArgument, "max_coeff must lie in [1, 1e6]");
  }
  if (r == 0) return std::nullopt;
  const auto residual_ok = [&](const std::vector<long>& nu) {
    double sum = 0.0, norm2 = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      sum += static_cast<double>(nu[j]) * frequencies[j];
      norm2 += static_cast<double>(nu[j]) * static_cast<double>(nu[j]);
    }
    return norm2 > 0.0 && std::abs(sum) < 1e-9 * std::sqrt(norm2);
  };
  std::optional<std::vector<long>> best;
  std::vector<long> nu(r, 0);
  const double last = frequencies[r - 1];
  // Odometer over the leading r - 1 coefficients.
  for (std::size_t j = 0; j + 1 < r; ++j) nu[j] = -max_coeff;
  while (true) {
    double partial = 0.0;
    for (std::size_t j = 0; j + 1 < r; ++j) partial += static_cast<double>(nu[j]) * frequencies[j];
    std::vector<long> candidates;
    if (last != 0.0) {
      const double exact = -partial / last;
      if (std::abs(exact) <= static_cast<double>(max_coeff) + 0.5) candidates.push_back(std::lround(exact));
    } else {
      candidates = {0, 1};
    }
    for (long c : candidates) {
      nu[r - 1] = c;
      if (std::abs(c) <= max_coeff && residual_ok(nu)) {
        auto rel = detail::normalize_relation(nu);
        if (!best || detail::better_relation(rel, *best)) best = rel;
      }
    }
    std::size_t j = 0;
    for (; j + 1 < r; ++j) {
      if (++nu[j] <= max_coeff) break;
      nu[j] = -max_coeff;
    }
    if (j + 1 >= r) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Closed-form spectra of the delta-system

/// Roots {0, +-i sqrt(-X1), +-i sqrt(-X2)} of lambda (lambda^4 + a lambda^2 + b), where
/// X1 <= X2 < 0 solve X^2 + a X + b = 0 with discriminant a^2 - 4b. Sorted like
/// SpectrumReport::eigenvalues.
inline std::vector<Complex> biquadratic_roots(double a, double b) {
  const double disc = a * a - 4.0 * b;
  if (disc < 0.0) throw Error(ErrorKind::InvalidArgument, "complex quadratic roots in lambda^2");
  const double x1 = 0.5 * (-a - std::sqrt(disc));
  const double x2 = 0.5 * (-a + std::sqrt(disc));
  std::vector<Complex> roots{Complex(0.0, 0.0)};
  for (double x : {x1, x2}) {
    if (x < 0.0) {
      roots.emplace_back(0.0, std::sqrt(-x));
      roots.emplace_back(0.0, -std::sqrt(-x));
    } else {
      roots.emplace_back(std::sqrt(x), 0.0);
      roots.emplace_back(-std::sqrt(x), 0.0);
    }
  }
  std::sort(roots.begin(), roots.end(), [](const Complex& l, const Complex& r) {
    return l.imag() != r.imag() ? l.imag() < r.imag() : l.real() < r.real();
  });
  return roots;
}

/// Coefficients (a, b) of the model matrix polynomial: a = delta^2 + delta + 4,
/// b = delta^2 + 3 delta + 3.
inline std::array<double, 2> delta_model_quartic(double delta) {
  return {delta * delta + delta + 4.0, delta * delta + 3.0 * delta + 3.0};
}

/// Coefficients (a, b) for the exact linearization diag(q_delta) A_delta at q_delta:
/// a = delta^2 - delta + 4, b = 3 + delta - delta^2 - delta^3.
inline std::array<double, 2> delta_linearization_quartic(double delta) {
  return {delta * delta - delta + 4.0, 3.0 + delta - delta * delta - delta * delta * delta};
}

// ---------------------------------------------------------------------------
// Lyapunov tangent planes

struct TangentBasis {
  Vector u;
  Vector v;
  double frequency = 0.0;  // Im lambda of the generating eigenvalue
};

/// Eigenvector of the linearization of the delta-system at q_delta for eigenvalue lambda,
/// normalized by x2 = 1:
///   x1 = (1 - delta)(1 - lambda) / (lambda^2 + 1 - delta)
///   x3 = -(lambda + 1 - delta) / (lambda^2 + 1 - delta)
///   x4 = -delta lambda / (lambda^2 + 1 + delta)
///   x5 = delta (1 + delta) / (lambda^2 + 1 + delta)
/// Throws SingularFormula when a denominator vanishes (|.| < 1e-8), which happens for the
/// pair lambda = +-i at delta = 0 whose eigenvector has x2 = 0.
inline ComplexVector lyapunov_eigenvector(double delta, Complex lambda) {
  const Complex l2p1 = lambda * lambda + 1.0;
  const Complex d_minus = l2p1 - delta;
  const Complex d_plus = l2p1 + delta;
  if (std::abs(d_minus) < 1e-8 || std::abs(d_plus) < 1e-8) {
    throw Error(ErrorKind::SingularFormula, "lambda^2 + 1 -+ delta vanishes");
  }
  ComplexVector x(5);
  x[0] = (1.0 - delta) * (1.0 - lambda) / d_minus;
  x[1] = 1.0;
  x[2] = -(lambda + 1.0 - delta) / d_minus;
  x[3] = -delta * lambda / d_plus;
  x[4] = delta * (1.0 + delta) / d_plus;
  return x;
}

/// Real and imaginary parts of a complex eigenvector, each scaled to unit length.
inline TangentBasis tangent_from_eigenvector(const ComplexVector& x, double frequency) {
  TangentBasis t{x.real(), x.imag(), frequency};
  if (t.u.norm() < 1e-14 || t.v.norm() < 1e-14) {
    throw Error(ErrorKind::SingularFormula, "eigenvector real and imaginary parts are dependent");
  }
  // Rotate the phase so that Re and Im are orthogonal; the spanned plane is unchanged.
  const double a = t.u.squaredNorm(), b = t.v.squaredNorm(), c = t.u.dot(t.v);
  const double theta = 0.5 * std::atan2(2.0 * c, a - b);
  const ComplexVector rotated = x * std::polar(1.0, -theta);
  t.u = rotated.real().normalized();
  t.v = rotated.imag().normalized();
  return t;
}

/// Tangent plane of the Lyapunov family of eigenvalue lambda of M, from a numerical
/// eigenvector (null vector of M - lambda I).
inline TangentBasis tangent_basis(const Matrix& m, Complex lambda) {
  const Eigen::Index n = m.rows();
  const Eigen::MatrixXcd shifted = m.cast<Complex>() - lambda * Eigen::MatrixXcd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullV);
  const ComplexVector x = svd.matrixV().col(n - 1);
  return tangent_from_eigenvector(x, std::abs(lambda.imag()));
}

/// Principal angles (radians, ascending) between the column spans of a and b. Cosines and
/// sines come from separate SVDs so that small angles keep full precision.
inline std::vector<double> principal_angles(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  const Matrix overlap = qa.transpose() * qb;
  const Vector cosines = Eigen::JacobiSVD<Matrix>(overlap).singularValues();
  const Vector sines = Eigen::JacobiSVD<Matrix>(qb - qa * overlap).singularValues();
  const Eigen::Index k = cosines.size();
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < k; ++i) {
    // cosines descend, sines of the same angles ascend
    const double s = i < sines.size() ? sines[sines.size() - 1 - i] : 0.0;
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    angles.push_back(c > 0.7 ? std::asin(std::clamp(s, 0.0, 1.0)) : std::acos(c));
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

inline Matrix span_of(const TangentBasis& t) {
  Matrix m(t.u.size(), 2);
  m.col(0) = t.u;
  m.col(1) = t.v;
  return m;
}

// ---------------------------------------------------------------------------
// Symplectic Euler: truncated modified Hamiltonian

struct SEModifiedHamiltonian {
  // H(u, v) = uu u^2 + vv v^2 + uv u v
  double uu = 0.0;
  double vv = 0.0;
  double uv = 0.0;
  // lambda^2 + c1 lambda + c0
  double c1 = 0.0;
  double c0 = 0.0;
  bool elliptic = false;
};

/// (h/2)(u^2 + v^2) - (h^2/2) u v. Its Hamiltonian linearization has characteristic
/// polynomial lambda^2 + h^2 (1 - h^2/4), with conjugate imaginary roots iff 0 < h < 2.
inline SEModifiedHamiltonian se_modified_hamiltonian(double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "time-step must be > 0");
  SEModifiedHamiltonian r;
  r.uu = 0.5 * h;
  r.vv = 0.5 * h;
  r.uv = -0.5 * h * h;
  // X = (dH/dv, -dH/du) is linear with matrix [[uv, 2 vv], [-2 uu, -uv]].
  const double trace = 0.0;
  const double det = -r.uv * r.uv + 4.0 * r.uu * r.vv;
  r.c1 = -trace;
  r.c0 = det;
  r.elliptic = r.c1 == 0.0 && r.c0 > 0.0;
  return r;
}

/// u^2/2 + ((1 - 3t^2)/2) v^2 - t u v.
inline double se_time_dependent_hamiltonian(double u, double v, double t) noexcept {
  return 0.5 * u * u + 0.5 * (1.0 - 3.0 * t * t) * v * v - t * u * v;
}

// ---------------------------------------------------------------------------
// Drift statistics

struct DriftStats {
  std::string name;
  double initial = 0.0;
  double max_abs = 0.0;  // max |f_n - f_0|
  double max_rel = 0.0;  // max |f_n - f_0| / |f_0|
  double slope = 0.0;    // least-squares slope of f_n - f_0 against n
  double slope_stderr = 0.0;

  /// |slope| within k standard errors of zero.
  bool slope_consistent_with_zero(double k = 3.0) const { return std::abs(slope) <= k * slope_stderr; }
};

/// Ordinary least-squares slope of ys against 0..n-1 and its standard error.
inline std::pair<double, double> linear_fit_slope(const std::vector<double>& ys) {
  const std::size_t n = ys.size();
  if (n < 2) return {0.0, 0.0};
  const double xbar = 0.5 * static_cast<double>(n - 1);
  double ybar = 0.0;
  for (double y : ys) ybar += y;
  ybar /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxx += dx * dx;
    sxy += dx * (ys[i] - ybar);
  }
  const double slope = sxy / sxx;
  if (n < 3) return {slope, 0.0};
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - ybar - slope * (static_cast<double>(i) - xbar);
    sse += r * r;
  }
  return {slope, std::sqrt(sse / static_cast<double>(n - 2) / sxx)};
}

inline DriftStats drift_stats(const std::string& name, const std::vector<double>& column) {
  if (column.empty()) throw Error(ErrorKind::InvalidArgument, "empty column");
  DriftStats s;
  s.name = name;
  s.initial = column.front();
  std::vector<double> dev;
  dev.reserve(column.size());
  for (double v : column) {
    const double d = v - s.initial;
    dev.push_back(d);
    s.max_abs = std::max(s.max_abs, std::abs(d));
  }
  s.max_rel = s.initial != 0.0 ? s.max_abs / std::abs(s.initial) : s.max_abs;
  std::tie(s.slope, s.slope_stderr) = linear_fit_slope(dev);
  return s;
}

/// One DriftStats per diagnostic column of the trajectory.
inline std::vector<DriftStats> drift_report(const Trajectory& traj) {
  if (traj.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory is empty");
  std::vector<DriftStats> out;
  for (const auto& name : traj.diagnostic_names) out.push_back(drift_stats(name, traj.column(name)));
  return out;
}

inline const DriftStats& find_stats(const std::vector<DriftStats>& report, const std::string& name) {
  for (const auto& s : report) {
    if (s.name == name) return s;
  }
  throw Error(ErrorKind::NotFound, "no drift statistics for '" + name + "'");
}

}  // namespace lvp
