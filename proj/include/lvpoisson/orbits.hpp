#pragma once

// Periodic orbits: flow plus first variation, constrained shooting, continuation in a
// system parameter and Lyapunov families seeded from a tangent plane.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lvpoisson/analysis.hpp"
#include "lvpoisson/integrators.hpp"
#include "lvpoisson/system.hpp"

namespace lvp {

struct FlowResult {
  State end;
  Matrix monodromy;
};

/// Phi_T(x) and its differential, integrating the state and the first-variation
/// equation D' = J(x) D jointly with the reference method.
inline FlowResult flow_and_monodromy(const LVSystem& sys, const State& x, double period,
                                     double tol = default_reference_tol) {
  detail::require_dim(sys, x.size(), "state");
  const Eigen::Index n = sys.dim();
  const Matrix& a = sys.interaction();
  const Vector& eps = sys.environment();
  detail::OdeRhs rhs = [&](const detail::OdeState& y, detail::OdeState& dy, double) {
    Eigen::Map<const Vector> xs(y.data(), n);
    Eigen::Map<const Matrix> d(y.data() + n, n, n);
    Eigen::Map<Vector> dx(dy.data(), n);
    Eigen::Map<Matrix> dd(dy.data() + n, n, n);
    const Vector growth = eps + a * xs;
    dx = xs.cwiseProduct(growth);
    Matrix jac = xs.asDiagonal() * a;
    jac.diagonal() += growth;
    dd.noalias() = jac * d;
  };
  detail::OdeState y(static_cast<std::size_t>(n + n * n), 0.0);
  Eigen::Map<Vector>(y.data(), n) = x.values();
  Eigen::Map<Matrix>(y.data() + n, n, n).setIdentity();
  detail::integrate_adaptive(rhs, y, period, tol);
  return FlowResult{State(Eigen::Map<const Vector>(y.data(), n)), Eigen::Map<const Matrix>(y.data() + n, n, n)};
}

struct PeriodicOrbit {
  State anchor;
  double period = 0.0;
  double delta = 0.0;
  double residual = 0.0;  // ||Phi_T(anchor) - anchor||_inf
  double energy = 0.0;    // H(anchor)
  int iterations = 0;
};

struct ShootOptions {
  double tolerance = 1e-10;   // accept when ||Phi_T(x) - x||_inf <= tolerance
  int max_newton = 50;
  double flow_tol = 1e-12;
  double max_condition = 1e12;
  double delta = 0.0;         // recorded in the result
};

namespace detail {

/// Orthonormal basis of the admissible displacements at x0: tangent to the symplectic
/// leaf (d log C = 0 for every Casimir), to the energy level (dH = 0) and orthogonal to
/// the flow direction.
inline Matrix shooting_subspace(const LVSystem& sys, const State& x0) {
  const CasimirBasis casimirs = casimir_basis(sys);
  const Eigen::Index n = sys.dim();
  const Vector flow = vector_field(sys, x0);
  if (flow.norm() <= 1e-12 * std::max(1.0, x0.values().norm())) {
    throw Error(ErrorKind::InvalidArgument, "shooting guess sits on a singularity of the vector field");
  }
  Matrix g(static_cast<Eigen::Index>(2 + casimirs.size()), n);
  g.row(0) = hamiltonian_gradient(sys, x0).transpose();
  g.row(1) = flow.normalized().transpose();
  Eigen::Index r = 2;
  for (const auto& v : casimirs.exponents) g.row(r++) = v.cwiseQuotient(x0.values()).transpose();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double nrm = g.row(i).norm();
    if (nrm > 0.0) g.row(i) /= nrm;
  }
  return kernel_basis(g, 1e-10);
}

}  // namespace detail

/// Newton (Gauss-Newton on the overdetermined system) for Phi_T(x) - x = 0 over the
/// displacement x - x0 in the shooting subspace and the period T. The reduced Jacobian
/// is [(D Phi_T - I) Z, X(Phi_T(x))].
inline PeriodicOrbit shoot_orbit(const LVSystem& sys, const State& guess, double period_guess,
                                 const ShootOptions& opts = {}) {
  detail::require_dim(sys, guess.size(), "guess");
  if (!(period_guess > 0.0)) throw Error(ErrorKind::InvalidArgument, "period guess must be > 0");
  const Eigen::Index n = sys.dim();
  const Matrix z = detail::shooting_subspace(sys, guess);
  const Eigen::Index m = z.cols();
  const Matrix identity = Matrix::Identity(n, n);

  Vector w = Vector::Zero(m);
  double period = period_guess;

  const auto evaluate = [&](const Vector& ww, double tt, FlowResult* flow_out) -> std::optional<Vector> {
    const Vector xv = guess.values() + z * ww;
    if ((xv.array() <= 0.0).any() || !(tt > 0.0)) return std::nullopt;
    try {
      FlowResult f = flow_and_monodromy(sys, State(xv), tt, opts.flow_tol);
      Vector r = f.end.values() - xv;
      if (flow_out) *flow_out = std::move(f);
      return r;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DomainError || e.kind() == ErrorKind::StepUnderflow) return std::nullopt;
      throw;
    }
  };

  FlowResult flow{guess, identity};
  std::optional<Vector> res = evaluate(w, period, &flow);
  if (!res) throw Error(ErrorKind::NoConvergence, "flow from the initial guess failed");
  double norm = res->cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opts.max_newton && norm > opts.tolerance; ++it) {
    Matrix jac(n, m + 1);
    jac.leftCols(m) = (flow.monodromy - identity) * z;
    jac.col(m) = vector_field(sys, flow.end);
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cond = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
    if (cond > opts.max_condition) {
      std::ostringstream os;
      os << "reduced Jacobian condition number " << cond;
      throw Error(ErrorKind::SingularReduced, os.str());
    }
    const Vector step = svd.solve(-*res);
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 12; ++k, lambda *= 0.5) {
      const Vector w_try = w + lambda * step.head(m);
      const double t_try = period + lambda * step[m];
      FlowResult f_try{guess, identity};
      const std::optional<Vector> r_try = evaluate(w_try, t_try, &f_try);
      if (!r_try) continue;
      const double n_try = r_try->cwiseAbs().maxCoeff();
      if (n_try < norm || k == 11) {
        w = w_try;
        period = t_try;
        res = r_try;
        norm = n_try;
        flow = std::move(f_try);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(norm <= opts.tolerance)) {
    std::ostringstream os;
    os << "shooting residual " << norm << " after " << it << " Newton steps";
    throw Error(ErrorKind::NoConvergence, os.str());
  }
  State anchor(guess.values() + z * w);
  const double energy = hamiltonian(sys, anchor);
  return PeriodicOrbit{std::move(anchor), period, opts.delta, norm, energy, it};
}

/// ||Phi_T(anchor) - anchor||_inf re-integrated at the given tolerance.
inline double orbit_residual(const LVSystem& sys, const PeriodicOrbit& orbit, double tol = 1e-13) {
  const State end = reference_flow(sys, orbit.anchor, orbit.period, tol);
  return (end.values() - orbit.anchor.values()).cwiseAbs().maxCoeff();
}

struct FamilyMember {
  double parameter = 0.0;  // delta or amplitude eta
  std::optional<PeriodicOrbit> orbit;
  std::string failure;
};

struct OrbitFamily {
  std::vector<FamilyMember> members;
  std::optional<TangentBasis> tangent_at_singularity;

  bool complete() const {
    for (const auto& m : members) {
      if (!m.orbit) return false;
    }
    return !members.empty();
  }
};

/// Tangent plane at q of the eigenpair whose frequency is closest to omega.
inline TangentBasis tangent_for_frequency(const LVSystem& sys, double omega) {
  const Matrix m = linearize(sys, State(sys.fixed_point()));
  const SpectrumReport rep = spectrum(m, 1);
  const std::vector<double> freqs = rep.frequencies();
  if (freqs.empty()) throw Error(ErrorKind::NotFound, "linearization at q has no imaginary eigenvalues");
  double best = freqs.front();
  for (double f : freqs) {
    if (std::abs(f - omega) < std::abs(best - omega)) best = f;
  }
  return tangent_basis(m, Complex(0.0, best));
}

using SystemFamily = std::function<LVSystem(double)>;

/// Natural-parameter continuation: each orbit seeds the next at delta_{k+1} with its
/// anchor and period, corrected by shoot_orbit.
inline OrbitFamily continue_in_delta(const SystemFamily& family, const PeriodicOrbit& orbit0,
                                     const std::vector<double>& deltas, ShootOptions opts = {}) {
  if (deltas.empty()) throw Error(ErrorKind::InvalidArgument, "no continuation parameters");
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    if (std::abs(deltas[k] - deltas[k - 1]) > 1e-3 + 1e-15) {
      throw Error(ErrorKind::InvalidArgument, "continuation step exceeds 1e-3");
    }
  }
  OrbitFamily fam;
  PeriodicOrbit first = orbit0;
  first.delta = deltas.front();
  fam.members.push_back({deltas.front(), first, ""});
  const PeriodicOrbit* prev = &*fam.members.back().orbit;
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    opts.delta = deltas[k];
    try {
      const LVSystem sys = family(deltas[k]);
      PeriodicOrbit next = shoot_orbit(sys, prev->anchor, prev->period, opts);
      if (std::abs(next.period - prev->period) > 0.5) {
        throw Error(ErrorKind::NoConvergence, "period jumped by more than 0.5");
      }
      fam.members.push_back({deltas[k], std::move(next), ""});
      prev = &*fam.members.back().orbit;
    } catch (const Error& e) {
      std::ostringstream os;
      os << "at delta = " << deltas[k] << " (last good delta = " << deltas[k - 1] << "): " << e.what();
      throw Error(ErrorKind::ContinuationStall, os.str());
    }
  }
  const LVSystem last = family(deltas.back());
  try {
    fam.tangent_at_singularity = tangent_for_frequency(last, 2.0 * std::numbers::pi / prev->period);
  } catch (const Error&) {
    fam.tangent_at_singularity.reset();
  }
  return fam;
}

struct AmplitudeOptions {
  double eta_max = 0.5;
  ShootOptions shoot{};
};

/// Lyapunov family sampled at the given amplitudes: seeds q + eta (u + v) with period
/// guess 2 pi / omega, corrected by shoot_orbit. Failed amplitudes are kept as gaps.
inline OrbitFamily amplitude_family(const LVSystem& sys, const TangentBasis& tangent, const std::vector<double>& etas,
                                    const AmplitudeOptions& opts = {}) {
  detail::require_dim(sys, tangent.u.size(), "tangent vector u");
  detail::require_dim(sys, tangent.v.size(), "tangent vector v");
  if (!(tangent.frequency > 0.0)) throw Error(ErrorKind::InvalidArgument, "tangent basis needs a positive frequency");
  for (double eta : etas) {
    if (!(eta > 0.0) || eta > opts.eta_max) {
      std::ostringstream os;
      os << "amplitude " << eta << " outside (0, " << opts.eta_max << "]";
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
  }
  OrbitFamily fam;
  fam.tangent_at_singularity = tangent;
  const double period_guess = 2.0 * std::numbers::pi / tangent.frequency;
  for (double eta : etas) {
    FamilyMember member{eta, std::nullopt, ""};
    try {
      const State seed(sys.fixed_point() + eta * (tangent.u + tangent.v));
      member.orbit = shoot_orbit(sys, seed, period_guess, opts.shoot);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidArgument) throw;
      member.failure = e.what();
    }
    fam.members.push_back(std::move(member));
  }
  return fam;
}

}  // namespace lvp
