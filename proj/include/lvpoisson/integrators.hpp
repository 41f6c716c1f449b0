#pragma once

// One-step methods: the implicit Hamiltonian Poisson step built from the cluster
// birealisation, symplectic Euler for the harmonic oscillator, a classical RK4 contrast
// method and an adaptive high-order reference flow.

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lvpoisson/system.hpp"
#include "lvpoisson/trajectory.hpp"

namespace lvp {

// ---------------------------------------------------------------------------
// Birealisation of the cluster structure

/// alpha(x, p)_j = exp(-1/2 sum_i a_ij x_i p_i) x_j.
inline Vector alpha(const LVSystem& sys, const Vector& x, const Vector& p) {
  detail::require_dim(sys, x.size(), "x");
  detail::require_dim(sys, p.size(), "p");
  if ((x.array() <= 0.0).any()) throw Error(ErrorKind::DomainError, "alpha requires positive x");
  const Vector exponent = -0.5 * (sys.interaction().transpose() * x.cwiseProduct(p));
  return exponent.array().exp().matrix().cwiseProduct(x);
}

/// beta(x, p) = alpha(x, -p).
inline Vector beta(const LVSystem& sys, const Vector& x, const Vector& p) { return alpha(sys, x, -p); }

// ---------------------------------------------------------------------------
// Implicit Hamiltonian Poisson step

enum class StageSolver { FixedPoint, Newton };

struct HPStepConfig {
  double h = 1e-2;
  double solver_tol = 1e-12;
  int max_iter = 100;
  StageSolver solver_kind = StageSolver::FixedPoint;

  void validate() const {
    if (!(h >= 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "time-step must be >= 0");
    if (!(solver_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "solver_tol must be > 0");
    if (max_iter <= 0) throw Error(ErrorKind::InvalidArgument, "max_iter must be positive");
  }
};

struct StepOutcome {
  State next;
  State stage;
  int iterations;
  double residual;
};

namespace detail {

// The stage y solves x = beta(y, h grad H(y)), i.e. in log coordinates z = log y:
//   z = log x + h/2 A (e^z - q),
// and the step returns alpha(y, h grad H(y)) = x * exp(h A (y - q)).
// With these roles the step advances along +X_H for {x_i, x_j} = a_ij x_i x_j.
inline Vector stage_residual(const LVSystem& sys, const Vector& log_x, const Vector& z, double h) {
  return z - log_x - 0.5 * h * (sys.interaction() * (z.array().exp().matrix() - sys.fixed_point()));
}

struct StageSolve {
  Vector z;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

inline void check_stage(const Vector& z) {
  if (!z.allFinite() || (z.array() > 700.0).any()) {
    throw Error(ErrorKind::DomainError, "stage iterate left the positive quadrant");
  }
}

inline StageSolve solve_stage_fixed_point(const LVSystem& sys, const Vector& log_x, double h,
                                          const HPStepConfig& cfg) {
  StageSolve s{log_x, 0, 0.0, false};
  Vector r = stage_residual(sys, log_x, s.z, h);
  s.residual = r.cwiseAbs().maxCoeff();
  double damping = 1.0;
  while (s.residual > cfg.solver_tol && s.iterations < cfg.max_iter) {
    const Vector trial = s.z - damping * r;
    check_stage(trial);
    const Vector r_trial = stage_residual(sys, log_x, trial, h);
    const double res_trial = r_trial.cwiseAbs().maxCoeff();
    ++s.iterations;
    if (res_trial < s.residual || damping < 1.0 / 64) {
      s.z = trial;
      r = r_trial;
      s.residual = res_trial;
    } else {
      damping *= 0.5;
    }
  }
  s.converged = s.residual <= cfg.solver_tol;
  return s;
}

inline StageSolve solve_stage_newton(const LVSystem& sys, const Vector& log_x, const Vector& z0, double h,
                                     const HPStepConfig& cfg) {
  const Eigen::Index n = sys.dim();
  StageSolve s{z0, 0, 0.0, false};
  Vector r = stage_residual(sys, log_x, s.z, h);
  s.residual = r.cwiseAbs().maxCoeff();
  while (s.residual > cfg.solver_tol && s.iterations < cfg.max_iter) {
    const Vector y = s.z.array().exp().matrix();
    const Matrix jac = Matrix::Identity(n, n) - 0.5 * h * sys.interaction() * y.asDiagonal();
    const Vector dz = jac.partialPivLu().solve(-r);
    // Backtrack on the residual norm.
    double step = 1.0;
    for (int k = 0; k < 30; ++k, step *= 0.5) {
      const Vector trial = s.z + step * dz;
      if (!trial.allFinite() || (trial.array() > 700.0).any()) continue;
      const Vector r_trial = stage_residual(sys, log_x, trial, h);
      if (r_trial.cwiseAbs().maxCoeff() < s.residual || k == 29) {
        s.z = trial;
        r = r_trial;
        break;
      }
    }
    check_stage(s.z);
    s.residual = r.cwiseAbs().maxCoeff();
    ++s.iterations;
  }
  s.converged = s.residual <= cfg.solver_tol;
  return s;
}

inline StageSolve solve_stage(const LVSystem& sys, const State& x, const HPStepConfig& cfg) {
  cfg.validate();
  const Vector log_x = x.log();
  if (cfg.solver_kind == StageSolver::Newton) {
    StageSolve s = solve_stage_newton(sys, log_x, log_x, cfg.h, cfg);
    if (!s.converged) {
      std::ostringstream os;
      os << "stage residual " << s.residual << " after " << s.iterations << " Newton iterations (h = " << cfg.h
         << ")";
      throw Error(ErrorKind::StageDivergence, os.str());
    }
    return s;
  }
  StageSolve s = solve_stage_fixed_point(sys, log_x, cfg.h, cfg);
  if (!s.converged) {
    // Newton fallback from the best fixed-point iterate.
    StageSolve fallback = solve_stage_newton(sys, log_x, s.z, cfg.h, cfg);
    fallback.iterations += s.iterations;
    if (!fallback.converged) {
      std::ostringstream os;
      os << "stage residual " << fallback.residual << " after " << fallback.iterations << " iterations (h = " << cfg.h
         << ")";
      throw Error(ErrorKind::StageDivergence, os.str());
    }
    return fallback;
  }
  return s;
}

}  // namespace detail

/// One step of the order-1 Hamiltonian Poisson integrator. Casimirs x^v, v in ker A,
/// are preserved to rounding because log x_{n+1} - log x_n = h A (y - q).
inline StepOutcome hp_step(const LVSystem& sys, const State& x, const HPStepConfig& cfg) {
  detail::require_dim(sys, x.size(), "state");
  const detail::StageSolve s = detail::solve_stage(sys, x, cfg);
  const Vector y = s.z.array().exp().matrix();
  const Vector log_next = x.log() + cfg.h * (sys.interaction() * (y - sys.fixed_point()));
  Vector next = log_next.array().exp().matrix();
  return StepOutcome{State(std::move(next)), State(y), s.iterations, s.residual};
}

/// H(y) at the solved stage: the time-dependent Hamiltonian H_h(x) generating the step.
inline double hp_modified_hamiltonian(const LVSystem& sys, const State& x, const HPStepConfig& cfg) {
  detail::require_dim(sys, x.size(), "state");
  const detail::StageSolve s = detail::solve_stage(sys, x, cfg);
  return hamiltonian(sys, State(s.z.array().exp().matrix()));
}

// ---------------------------------------------------------------------------
// Symplectic Euler on u' = v, v' = -u

inline std::pair<double, double> symplectic_euler_step(double u, double v, double h) noexcept {
  return {u + h * v - h * h * u, v - h * u};
}

/// [[1 - h^2, h], [-h, 1]]; determinant 1 for every h.
inline Eigen::Matrix2d symplectic_euler_matrix(double h) noexcept {
  Eigen::Matrix2d m;
  m << 1.0 - h * h, h, -h, 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Explicit contrast method

inline Vector rk4_step(const LVSystem& sys, const Vector& x, double h) {
  const auto f = [&](const Vector& y) -> Vector {
    return y.cwiseProduct(sys.environment() + sys.interaction() * y);
  };
  const Vector k1 = f(x);
  const Vector k2 = f(x + 0.5 * h * k1);
  const Vector k3 = f(x + 0.5 * h * k2);
  const Vector k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------
// Adaptive reference integration

namespace detail {

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(const OdeState&, OdeState&, double)>;

/// Integrates y' = f(y) from 0 to t_end with an embedded 7(8) Runge-Kutta pair,
/// absolute and relative tolerance tol.
inline void integrate_adaptive(const OdeRhs& rhs, OdeState& y, double t_end, double tol) {
  namespace odeint = boost::numeric::odeint;
  if (!(tol >= 1e-14)) throw Error(ErrorKind::InvalidArgument, "reference tolerance must be >= 1e-14");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::InvalidArgument, "integration time must be >= 0");
  if (t_end == 0.0) return;
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_fehlberg78<OdeState>());
  double t = 0.0;
  double dt = std::min(t_end, 1e-2);
  const double dt_min = 1e-14 * t_end;
  long steps = 0;
  while (t < t_end) {
    bool last = false;
    if (t + dt >= t_end) {
      dt = t_end - t;
      last = true;
    }
    const double dt_try = dt;
    const auto result = stepper.try_step(std::cref(rhs), y, t, dt);
    if (result == odeint::success) {
      if (last) break;
    } else if (dt < dt_min || dt_try < dt_min) {
      std::ostringstream os;
      os << "adaptive step collapsed to " << dt << " at t = " << t;
      throw Error(ErrorKind::StepUnderflow, os.str());
    }
    if (++steps > 50'000'000) throw Error(ErrorKind::StepUnderflow, "step budget exhausted");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorKind::StepUnderflow, "reference solution became non-finite");
  }
}

}  // namespace detail

inline constexpr double default_reference_tol = 1e-12;

/// Exact-flow oracle: Phi_t(x) to local tolerance tol.
inline State reference_flow(const LVSystem& sys, const State& x, double t, double tol = default_reference_tol) {
  detail::require_dim(sys, x.size(), "state");
  const Matrix& a = sys.interaction();
  const Vector& eps = sys.environment();
  const Eigen::Index n = sys.dim();
  detail::OdeRhs rhs = [&](const detail::OdeState& y, detail::OdeState& dy, double) {
    Eigen::Map<const Vector> ym(y.data(), n);
    Eigen::Map<Vector> dym(dy.data(), n);
    dym = ym.cwiseProduct(eps + a * ym);
  };
  detail::OdeState y(x.values().data(), x.values().data() + n);
  detail::integrate_adaptive(rhs, y, t, tol);
  return State(Eigen::Map<const Vector>(y.data(), n));
}

// ---------------------------------------------------------------------------
// Trajectories

enum class IntegratorKind { HP1, Reference, RK4Fixed };

inline std::string_view to_string(IntegratorKind k) noexcept {
  switch (k) {
    case IntegratorKind::HP1: return "hp1";
    case IntegratorKind::Reference: return "reference";
    case IntegratorKind::RK4Fixed: return "rk4_fixed";
  }
  return "?";
}

inline IntegratorKind parse_integrator(std::string_view name) {
  if (name == "hp1") return IntegratorKind::HP1;
  if (name == "reference") return IntegratorKind::Reference;
  if (name == "rk4_fixed") return IntegratorKind::RK4Fixed;
  throw Error(ErrorKind::InvalidArgument, "unknown integrator '" + std::string(name) + "'");
}

struct SimulateOptions {
  double solver_tol = 1e-12;
  int max_iter = 100;
  StageSolver solver_kind = StageSolver::FixedPoint;
  double reference_tol = default_reference_tol;
};

/// Diagnostic names for a system: H, C1..Ck, then the declared first integrals.
inline std::vector<std::string> diagnostic_names(const CasimirBasis& casimirs,
                                                 std::span<const FirstIntegral> integrals) {
  std::vector<std::string> names{"H"};
  for (std::size_t k = 0; k < casimirs.size(); ++k) names.push_back("C" + std::to_string(k + 1));
  for (const auto& f : integrals) names.push_back(f.name);
  return names;
}

inline Vector diagnostics_row(const LVSystem& sys, const CasimirBasis& casimirs,
                              std::span<const FirstIntegral> integrals, const State& x) {
  Vector row(static_cast<Eigen::Index>(1 + casimirs.size() + integrals.size()));
  Eigen::Index c = 0;
  row[c++] = hamiltonian(sys, x);
  for (const auto& v : casimirs.exponents) row[c++] = casimir_value(v, x);
  for (const auto& f : integrals) row[c++] = f(x);
  return row;
}

/// Runs n steps of the chosen method and records H, every Casimir and every declared
/// first integral at each row, including row 0.
inline Trajectory simulate(const LVSystem& sys, IntegratorKind kind, const State& x0, double h, long n,
                           std::span<const FirstIntegral> integrals = {}, const SimulateOptions& opts = {}) {
  detail::require_dim(sys, x0.size(), "initial state");
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "time-step must be > 0");
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "step count must be >= 0");
  for (const auto& f : integrals) {
    if (f.linear.size() != sys.dim() || f.log.size() != sys.dim()) {
      throw Error(ErrorKind::InvalidArgument, "first integral '" + f.name + "' has wrong dimension");
    }
  }
  const CasimirBasis casimirs = casimir_basis(sys);
  Trajectory traj;
  traj.diagnostic_names = diagnostic_names(casimirs, integrals);
  traj.times.reserve(static_cast<std::size_t>(n) + 1);
  traj.push_back(0.0, x0.values(), diagnostics_row(sys, casimirs, integrals, x0));

  const HPStepConfig cfg{h, opts.solver_tol, opts.max_iter, opts.solver_kind};
  State x = x0;
  for (long i = 1; i <= n; ++i) {
    try {
      long iterations = 0;
      double residual = 0.0;
      switch (kind) {
        case IntegratorKind::HP1: {
          StepOutcome out = hp_step(sys, x, cfg);
          iterations = out.iterations;
          residual = out.residual;
          x = std::move(out.next);
          break;
        }
        case IntegratorKind::Reference:
          x = reference_flow(sys, x, h, opts.reference_tol);
          break;
        case IntegratorKind::RK4Fixed:
          x = State(rk4_step(sys, x.values(), h));
          break;
      }
      traj.push_back(static_cast<double>(i) * h, x.values(), diagnostics_row(sys, casimirs, integrals, x), iterations,
                     residual);
    } catch (const Error& e) {
      throw e.with_context("step " + std::to_string(i));
    }
  }
  return traj;
}

inline constexpr double escape_norm2 = 1e200;

/// Symplectic Euler iterates of the harmonic oscillator with H = (u^2 + v^2) / 2. Stops
/// early once u^2 + v^2 exceeds escape_norm2 so the record stays finite.
inline Trajectory simulate_symplectic_euler(double u0, double v0, double h, long n) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "step count must be >= 0");
  Trajectory traj;
  traj.diagnostic_names = {"H"};
  traj.times.reserve(static_cast<std::size_t>(n) + 1);
  double u = u0, v = v0;
  const auto row = [&] {
    Vector s(2);
    s << u, v;
    Vector d(1);
    d << 0.5 * (u * u + v * v);
    return std::pair{s, d};
  };
  auto [s0, d0] = row();
  traj.push_back(0.0, s0, d0);
  for (long i = 1; i <= n; ++i) {
    std::tie(u, v) = symplectic_euler_step(u, v, h);
    auto [s, d] = row();
    traj.push_back(static_cast<double>(i) * h, s, d);
    if (!(s.squaredNorm() <= escape_norm2)) break;
  }
  return traj;
}

}  // namespace lvp
