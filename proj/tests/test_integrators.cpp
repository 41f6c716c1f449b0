#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "lvpoisson/analysis.hpp"
#include "lvpoisson/integrators.hpp"
#include "lvpoisson/systems.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace lvp;

namespace {

Vector vec(std::initializer_list<double> xs) { return Vector::Map(xs.begin(), static_cast<Eigen::Index>(xs.size())); }

double sup_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Least-squares slope of log(err) against log(h).
double loglog_slope(const std::vector<double>& hs, const std::vector<double>& errs) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    lx.push_back(std::log(hs[i]));
    ly.push_back(std::log(errs[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("alpha and beta") {
  const LVSystem pp = systems::predator_prey_2d();
  CHECK(sup_diff(alpha(pp, vec({1.5, 0.5}), Vector::Zero(2)), vec({1.5, 0.5})) == 0.0);
  const Vector a = alpha(pp, vec({1, 1}), vec({2, 0}));
  CHECK_THAT(a[0], WithinAbs(1.0, 1e-15));
  CHECK_THAT(a[1], WithinRel(std::exp(-1.0), 1e-15));

  const LVSystem sys = systems::delta_system(0.1);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> pos(0.1, 5.0), any(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    Vector x(5), p(5);
    for (int i = 0; i < 5; ++i) {
      x[i] = pos(rng);
      p[i] = any(rng);
    }
    const Vector b = beta(sys, x, p);
    const Vector am = alpha(sys, x, -p);
    CHECK((b.array() == am.array()).all());
    // alpha(., p) and alpha(., -p) are not inverse maps, but log alpha - log x is linear in p
    const Vector la = alpha(sys, x, p).array().log().matrix() - x.array().log().matrix();
    const Vector lb = b.array().log().matrix() - x.array().log().matrix();
    CHECK(sup_diff(la, -lb) < 1e-12);
  }
  CHECK_THROWS_AS(alpha(sys, vec({1, 1, -1, 1, 1}), Vector::Zero(5)), Error);
}

TEST_CASE("stage and step satisfy the birealisation equations") {
  const LVSystem sys = systems::delta_system(1e-2);
  const State x{1.3, 0.8, 1.1, 1.4, 0.9};
  for (double h : {1e-3, 1e-2, 0.1, 0.5}) {
    for (StageSolver kind : {StageSolver::FixedPoint, StageSolver::Newton}) {
      const HPStepConfig cfg{h, 1e-13, 100, kind};
      const StepOutcome out = hp_step(sys, x, cfg);
      const Vector y = out.stage.values();
      const Vector p = h * hamiltonian_gradient(sys, out.stage);
      CHECK(sup_diff(beta(sys, y, p), x.values()) < 1e-12);
      CHECK(sup_diff(alpha(sys, y, p), out.next.values()) < 1e-12);
      CHECK(out.residual <= cfg.solver_tol);
    }
  }
}

TEST_CASE("fixed-point and Newton stage solvers agree") {
  const LVSystem sys = systems::integrable_5d();
  const State x(Vector::Constant(5, 2.0));
  const StepOutcome a = hp_step(sys, x, {1.0, 1e-13, 200, StageSolver::FixedPoint});
  const StepOutcome b = hp_step(sys, x, {1.0, 1e-13, 200, StageSolver::Newton});
  CHECK(sup_diff(a.next.values(), b.next.values()) < 1e-11);
}

TEST_CASE("singularities are fixed by the step") {
  for (const auto& sys : {systems::integrable_5d(), systems::delta_system(1e-2)}) {
    for (double h : {0.1, 1.0}) {
      const HPStepConfig cfg{h};
      const State q(sys.fixed_point());
      const StepOutcome out = hp_step(sys, q, cfg);
      CHECK(sup_diff(out.next.values(), q.values()) <= 10 * cfg.solver_tol);
      CHECK(sup_diff(out.stage.values(), q.values()) <= 10 * cfg.solver_tol);
      CHECK_THAT(hp_modified_hamiltonian(sys, q, cfg), WithinAbs(hamiltonian(sys, q), 1e-12));
    }
  }
}

TEST_CASE("zero step is the identity") {
  const LVSystem sys = systems::integrable_5d();
  const State x{2, 0.5, 1, 3, 1.5};
  const StepOutcome out = hp_step(sys, x, {0.0});
  CHECK(sup_diff(out.next.values(), x.values()) <= 4 * std::numeric_limits<double>::epsilon() * 3.0);
  CHECK(out.iterations == 0);
  CHECK_THAT(hp_modified_hamiltonian(sys, x, {1e-9}), WithinAbs(hamiltonian(sys, x), 1e-12));
  CHECK_THROWS_AS(hp_step(sys, x, {-1.0}), Error);
}

TEST_CASE("time-dependent Hamiltonian at a large step is finite and reproducible") {
  const LVSystem sys = systems::integrable_5d();
  const State x(Vector::Constant(5, 2.0));
  const double a = hp_modified_hamiltonian(sys, x, {1.0});
  CHECK(std::isfinite(a));
  CHECK(a == hp_modified_hamiltonian(sys, x, {1.0}));
  // H(y) - H(x) = O(h^2): the first-order term is dH . X_H = 0
  const double d1 = std::abs(hp_modified_hamiltonian(sys, x, {1e-2}) - hamiltonian(sys, x));
  const double d2 = std::abs(hp_modified_hamiltonian(sys, x, {5e-3}) - hamiltonian(sys, x));
  CHECK_THAT(d1 / d2, WithinRel(4.0, 0.05));
}

TEST_CASE("one small step tracks the exact flow") {
  const LVSystem sys = systems::integrable_5d();
  const State x(Vector::Constant(5, 2.0));
  const State exact = reference_flow(sys, x, 1e-3, 1e-14);
  CHECK(sup_diff(hp_step(sys, x, {1e-3}).next.values(), exact.values()) <= 5e-6);
}

TEST_CASE("local defect decays at third order") {
  // The step is the implicit midpoint rule in log coordinates, hence symmetric.
  const LVSystem sys = systems::integrable_5d();
  const State x(Vector::Constant(5, 2.0));
  std::vector<double> hs, errs;
  for (double h = 0.1; h > 0.1 / 33; h /= 2) {
    hs.push_back(h);
    errs.push_back(sup_diff(hp_step(sys, x, {h, 1e-14, 200}).next.values(), reference_flow(sys, x, h, 1e-14).values()));
  }
  CHECK_THAT(loglog_slope(hs, errs), WithinAbs(3.0, 0.2));
}

TEST_CASE("global error at T = 1 decays at second order") {
  const LVSystem sys = systems::integrable_5d();
  const State x(Vector::Constant(5, 2.0));
  const State exact = reference_flow(sys, x, 1.0, 1e-14);
  std::vector<double> hs, errs;
  for (int k = 3; k <= 8; ++k) {
    const double h = std::ldexp(1.0, -k);
    const Trajectory t = simulate(sys, IntegratorKind::HP1, x, h, 1L << k, {}, {1e-14, 200});
    hs.push_back(h);
    errs.push_back(sup_diff(t.states.back(), exact.values()));
  }
  CHECK_THAT(loglog_slope(hs, errs), WithinAbs(2.0, 0.15));
}

TEST_CASE("Casimirs are preserved step by step") {
  for (const auto& sys : {systems::integrable_5d(), systems::delta_system(1e-2), systems::delta_system(0.1)}) {
    const CasimirBasis cas = casimir_basis(sys);
    State x(sys.fixed_point() + 0.5 * Vector::Ones(sys.dim()));
    for (int n = 0; n < 200; ++n) {
      const HPStepConfig cfg{0.5};
      const State next = hp_step(sys, x, cfg).next;
      for (const auto& v : cas.exponents) {
        CHECK(std::abs(log_casimir_value(v, next) - log_casimir_value(v, x)) <= 10 * cfg.solver_tol);
      }
      x = next;
    }
  }
}

TEST_CASE("stage solve failures are reported") {
  const LVSystem sys = systems::integrable_5d();
  const State x{6, 0.2, 5, 0.3, 4};
  try {
    (void)hp_step(sys, x, {1.0, 1e-14, 1});
    FAIL("expected StageDivergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StageDivergence);
  }
  try {
    (void)hp_step(sys, x, {1000.0});
    FAIL("expected DomainError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DomainError);
  }
  CHECK_THROWS_AS(hp_step(sys, x, {0.1, 0.0}), Error);
}

TEST_CASE("symplectic Euler step") {
  auto [u, v] = symplectic_euler_step(0.0, 0.0, 1.7);
  CHECK(u == 0.0);
  CHECK(v == 0.0);
  std::tie(u, v) = symplectic_euler_step(1.0, 0.0, 1.0);
  CHECK_THAT(u, WithinAbs(0.0, 1e-16));
  CHECK_THAT(v, WithinAbs(-1.0, 1e-16));
  for (double h : {0.5, 1.999, 2.001}) {
    const Eigen::Matrix2d m = symplectic_euler_matrix(h);
    CHECK_THAT(m.determinant(), WithinAbs(1.0, 1e-12));
    const auto [a, b] = symplectic_euler_step(0.3, -0.7, h);
    const Eigen::Vector2d mv = m * Eigen::Vector2d(0.3, -0.7);
    CHECK_THAT(a, WithinAbs(mv[0], 1e-15));
    CHECK_THAT(b, WithinAbs(mv[1], 1e-15));
  }
}

TEST_CASE("symplectic Euler boundedness dichotomy at h = 2") {
  const auto sup_norm2 = [](double h) {
    double u = 1.0, v = 0.0, m = 1.0;
    for (int n = 0; n < 10000 && m < 1e6; ++n) {
      std::tie(u, v) = symplectic_euler_step(u, v, h);
      m = std::max(m, u * u + v * v);
    }
    return m;
  };
  CHECK(sup_norm2(2.0 - 1e-3) <= 1e6);
  CHECK(sup_norm2(2.0 + 1e-3) >= 1e6);
  const Trajectory below = simulate_symplectic_euler(1.0, 0.0, 2.0 - 1e-3, 10000);
  CHECK(below.size() == 10001);
  const Trajectory above = simulate_symplectic_euler(1.0, 0.0, 2.0 + 1e-3, 10000);
  CHECK(above.states.back().squaredNorm() > 1e6);
  CHECK(std::isfinite(above.diagnostics.back()[0]));
}

TEST_CASE("reference flow basics") {
  const LVSystem sys = systems::delta_system(1e-2);
  const State q(sys.fixed_point());
  CHECK(sup_diff(reference_flow(sys, q, 3.0).values(), q.values()) < 1e-13);
  const State x{1.2, 0.9, 1.1, 1.3, 0.8};
  CHECK(sup_diff(reference_flow(sys, x, 0.0).values(), x.values()) == 0.0);
  CHECK_THROWS_AS(reference_flow(sys, x, 1.0, 1e-15), Error);
  CHECK_THROWS_AS(reference_flow(sys, x, -1.0), Error);
}

TEST_CASE("reference flow conserves H and Casimirs") {
  const double tol = 1e-12;
  for (const auto& sys : {systems::integrable_5d(), systems::delta_system(1e-2), systems::predator_prey_2d()}) {
    const State x(sys.fixed_point() * 1.3);
    const State y = reference_flow(sys, x, 10.0, tol);
    CHECK(std::abs(hamiltonian(sys, y) - hamiltonian(sys, x)) <= 100 * tol * std::max(1.0, hamiltonian(sys, x)));
    for (const auto& v : casimir_basis(sys).exponents) {
      CHECK(std::abs(log_casimir_value(v, y) - log_casimir_value(v, x)) <= 100 * tol);
    }
  }
}

TEST_CASE("reference flow returns after one period of the predator-prey cycle") {
  const LVSystem sys = systems::predator_prey_2d();
  const State x0{1.01, 1.0};
  // x2 starts decreasing, so x2 - 1 changes sign from + to - at the period.
  double lo = 5.5, hi = 7.0;
  REQUIRE(reference_flow(sys, x0, lo, 1e-13)[1] > 1.0);
  REQUIRE(reference_flow(sys, x0, hi, 1e-13)[1] < 1.0);
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (reference_flow(sys, x0, mid, 1e-13)[1] > 1.0 ? lo : hi) = mid;
  }
  const double period = 0.5 * (lo + hi);
  CHECK_THAT(period, WithinRel(2 * std::numbers::pi, 1e-2));
  CHECK(sup_diff(reference_flow(sys, x0, period, 1e-13).values(), x0.values()) <= 1e-8);
}

TEST_CASE("adaptive integration reports blow-up") {
  detail::OdeRhs rhs = [](const detail::OdeState& y, detail::OdeState& dy, double) { dy[0] = y[0] * y[0]; };
  detail::OdeState y{1.0};
  try {
    detail::integrate_adaptive(rhs, y, 2.0, 1e-10);
    FAIL("expected StepUnderflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepUnderflow);
  }
}

TEST_CASE("simulate records every step") {
  const LVSystem sys = systems::integrable_5d();
  const auto integrals = systems::integrable_5d_first_integrals();
  const State x0(Vector::Constant(5, 2.0));
  const Trajectory empty = simulate(sys, IntegratorKind::HP1, x0, 1.0, 0, integrals);
  CHECK(empty.size() == 1);
  CHECK(empty.diagnostic_names == std::vector<std::string>{"H", "C1", "I1", "I2"});

  const Trajectory t = simulate(sys, IntegratorKind::HP1, x0, 1.0, 100, integrals);
  t.validate();
  REQUIRE(t.size() == 101);
  const std::vector<double> c = t.column("C1");
  for (double v : c) CHECK(std::abs(v - c.front()) <= 1e-10 * std::abs(c.front()));
  const DriftStats h = drift_stats("H", t.column("H"));
  CHECK(std::isfinite(h.max_abs));
  CHECK(h.slope_consistent_with_zero(3.0));
  CHECK_THAT(t.times.back(), WithinAbs(100.0, 1e-12));

  const Trajectory rk = simulate(sys, IntegratorKind::RK4Fixed, x0, 1.0, 100, integrals);
  CHECK(std::abs(drift_stats("H", rk.column("H")).slope) >= 10 * std::abs(h.slope));

  const Trajectory ref = simulate(sys, IntegratorKind::Reference, x0, 0.5, 20, integrals);
  for (double v : ref.column("H")) CHECK(std::abs(v - ref.column("H").front()) < 1e-9);
}

TEST_CASE("simulate names the failing step") {
  const LVSystem sys = systems::integrable_5d();
  try {
    (void)simulate(sys, IntegratorKind::HP1, State{6, 0.2, 5, 0.3, 4}, 1000.0, 5);
    FAIL("expected a stage failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
  CHECK_THROWS_AS(simulate(sys, IntegratorKind::HP1, State{1, 1}, 0.1, 5), Error);
  CHECK_THROWS_AS(parse_integrator("euler"), Error);
  CHECK(parse_integrator("rk4_fixed") == IntegratorKind::RK4Fixed);
}
