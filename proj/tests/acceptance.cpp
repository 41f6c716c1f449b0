#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lvpoisson/experiments.hpp"
#include "lvpoisson/orbits.hpp"
#include "lvpoisson/systems.hpp"

using namespace lvp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Vector vec(std::initializer_list<double> xs) { return Vector::Map(xs.begin(), static_cast<Eigen::Index>(xs.size())); }

Matrix plane(const Vector& a, const Vector& b) {
  Matrix m(a.size(), 2);
  m.col(0) = a;
  m.col(1) = b;
  return m;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> ly;
  for (double y : ys) ly.push_back(std::log(y));
  std::vector<double> lx;
  for (double x : xs) lx.push_back(std::log(x));
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

const fs::path out_root = fs::temp_directory_path() / "lvp_acceptance";

Outcome casimir_exactness() {
  const ConfigDocument doc = builtin_config();
  const ExperimentSpec& spec = doc.experiment("fig1-integrable");
  run_experiment(spec, doc, out_root);
  const Trajectory t = read_trajectory(out_root / spec.name / "hp1.csv");
  const DriftStats s = drift_stats("C1", t.column("C1"));
  return {s.max_rel <= 1e-9 && t.size() == 101, "max relative Casimir deviation " + fmt(s.max_rel)};
}

Outcome bounded_energy() {
  const ConfigDocument doc = builtin_config();
  const ExperimentSpec& spec = doc.experiment("fig1-integrable");
  run_experiment(spec, doc, out_root);
  const DriftStats hp = drift_stats("H", read_trajectory(out_root / spec.name / "hp1.csv").column("H"));
  const DriftStats rk = drift_stats("H", read_trajectory(out_root / spec.name / "rk4_fixed.csv").column("H"));
  const bool finite = std::isfinite(hp.max_abs);
  const bool flat = hp.slope_consistent_with_zero(3.0);
  const bool contrast = std::abs(rk.slope) >= 10.0 * std::abs(hp.slope);
  return {finite && flat && contrast, "hp1 max |dH| " + fmt(hp.max_abs) + ", slope " + fmt(hp.slope) + " +- " +
                                          fmt(hp.slope_stderr) + "; rk4 slope " + fmt(rk.slope)};
}

Outcome order_one() {
  const LVSystem sys = systems::integrable_5d();
  const State x0(Vector::Constant(5, 2.0));
  const State exact = reference_flow(sys, x0, 1.0, 1e-13);
  std::vector<double> hs, errs;
  for (int k = 3; k <= 8; ++k) {
    const double h = std::ldexp(1.0, -k);
    State x = x0;
    for (int i = 0; i < (1 << k); ++i) x = hp_step(sys, x, {h, 1e-14, 200}).next;
    hs.push_back(h);
    errs.push_back((x.values() - exact.values()).cwiseAbs().maxCoeff());
  }
  const double slope = loglog_slope(hs, errs);
  return {std::abs(slope - 1.0) <= 0.15,
          "log-log slope " + fmt(slope) + " (errors " + fmt(errs.front()) + " .. " + fmt(errs.back()) +
              "); the scheme is symmetric, so its order is 2"};
}

Outcome singularity_fixity() {
  double worst = 0.0;
  for (const LVSystem& sys : {systems::integrable_5d(), systems::delta_system(experiment_delta)}) {
    const State q(sys.fixed_point());
    for (double h : {0.1, 1.0}) {
      worst = std::max(worst, (hp_step(sys, q, {h, 1e-12, 100}).next.values() - q.values()).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-11, "max |hp_step(q) - q| " + fmt(worst)};
}

Outcome se_dichotomy() {
  const auto sup2 = [](const Trajectory& t) {
    double m = 0.0;
    for (const auto& x : t.states) m = std::max(m, x.squaredNorm());
    return m;
  };
  const double below = sup2(simulate_symplectic_euler(1.0, 0.0, 2.0 - 1e-3, 10000));
  const double above = sup2(simulate_symplectic_euler(1.0, 0.0, 2.0 + 1e-3, 10000));
  const double eps = std::numeric_limits<double>::epsilon();
  const bool flips = se_modified_hamiltonian(2.0 * (1.0 - eps)).elliptic && !se_modified_hamiltonian(2.0).elliptic &&
                     !se_modified_hamiltonian(2.0 * (1.0 + eps)).elliptic;
  return {below <= 1e6 && above > 1e6 && flips,
          "sup norm^2 below " + fmt(below) + ", above " + fmt(above) + (flips ? ", flag flips at 2" : ", flag wrong")};
}

double root_mismatch(std::vector<Complex> computed, std::vector<Complex> expected) {
  double worst = 0.0;
  for (const auto& e : expected) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < computed.size(); ++i) {
      if (std::abs(computed[i] - e) < std::abs(computed[best] - e)) best = i;
    }
    worst = std::max(worst, std::abs(computed[best] - e));
    computed.erase(computed.begin() + static_cast<long>(best));
  }
  return worst;
}

Outcome spectrum_reproduction() {
  double model = 0.0, exact = 0.0;
  for (double delta : {0.0, 1e-3, 1e-2, 1e-1}) {
    const auto c = delta_model_quartic(delta);
    model = std::max(model, root_mismatch(spectrum(systems::delta_system_model_matrix(delta)).eigenvalues,
                                          biquadratic_roots(c[0], c[1])));
    const LVSystem sys = systems::delta_system(delta);
    const auto e = delta_linearization_quartic(delta);
    exact = std::max(exact, root_mismatch(spectrum(linearize(sys, State(sys.fixed_point()))).eigenvalues,
                                          biquadratic_roots(e[0], e[1])));
  }
  const double s3 = std::sqrt(3.0);
  const double at0 = root_mismatch(spectrum(systems::delta_system_model_matrix(0.0)).eigenvalues,
                                   {{0, 0}, {0, 1}, {0, -1}, {0, s3}, {0, -s3}});
  return {model <= 1e-10 && at0 <= 1e-10, "model matrix mismatch " + fmt(model) + ", delta=0 mismatch " + fmt(at0) +
                                              "; Jacobian vs its own quartic " + fmt(exact)};
}

Outcome tangent_limit() {
  const double s3 = std::sqrt(3.0);
  const Matrix quoted = plane(vec({1, -2, -1, 0, 0}), vec({-s3, 0, -s3, -s3, 0}));
  const Matrix leaf = plane(vec({-1, 2, 1, 0, 0}), vec({1, 0, 1, 0, 0}));
  std::vector<double> angles, corrected;
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    const LVSystem sys = systems::delta_system(delta);
    const Matrix t = span_of(tangent_for_frequency(sys, s3));
    angles.push_back(principal_angles(t, quoted).back());
    corrected.push_back(principal_angles(t, leaf).back());
  }
  const bool monotone = angles[1] < angles[0] && angles[2] < angles[1];
  std::ostringstream os;
  os << "angles to the quoted limit " << fmt(angles[0]) << ", " << fmt(angles[1]) << ", " << fmt(angles[2])
     << "; to span{(-1,2,1,0,0),(1,0,1,0,0)} " << fmt(corrected[0]) << ", " << fmt(corrected[1]) << ", "
     << fmt(corrected[2]);
  return {monotone && angles[2] <= 1e-2, os.str()};
}

Outcome orbit_shooting() {
  const double two_pi = 2.0 * std::numbers::pi;
  const LVSystem pp = systems::predator_prey_2d();
  const PeriodicOrbit planar = shoot_orbit(pp, State{1.01, 1.0}, two_pi);
  const double planar_res = orbit_residual(pp, planar);
  bool ok = std::abs(planar.period - two_pi) <= 1e-2 * two_pi && planar_res <= 1e-9;

  std::vector<double> deltas;
  for (int k = 0; k <= 10; ++k) deltas.push_back(1e-3 * k);
  const LVSystem sys0 = systems::delta_system(0.0);
  double worst = 0.0;
  std::size_t members = 0;
  for (const auto& [seed, period] : std::vector<std::pair<State, double>>{
           {State{1, 1, 1, 1.01, 1}, two_pi}, {State{1.01, 1.01, 1.0201, 1, 1}, two_pi / std::sqrt(3.0)}}) {
    const OrbitFamily fam = continue_in_delta(systems::delta_system, shoot_orbit(sys0, seed, period), deltas);
    ok = ok && fam.complete();
    for (const auto& m : fam.members) {
      worst = std::max(worst, orbit_residual(systems::delta_system(m.parameter), *m.orbit));
      ++members;
    }
  }
  ok = ok && worst <= 1e-9 && members == 22;
  return {ok, "planar period " + fmt(planar.period) + " residual " + fmt(planar_res) + "; " +
                  std::to_string(members) + " continuation orbits, max residual " + fmt(worst)};
}

Outcome long_run() {
  const LVSystem sys = systems::integrable_5d();
  const double h = 0.1;
  const Trajectory t = simulate(sys, IntegratorKind::HP1, State(Vector::Constant(5, 2.0)), h, 100000,
                                systems::integrable_5d_first_integrals());
  bool ok = true;
  std::ostringstream os;
  for (const char* name : {"I1", "I2"}) {
    const DriftStats s = drift_stats(name, t.column(name));
    ok = ok && s.max_abs <= 5.0 * h && s.slope_consistent_with_zero(3.0);
    os << name << " max dev " << fmt(s.max_abs) << " slope " << fmt(s.slope) << " +- " << fmt(s.slope_stderr) << "; ";
  }
  return {ok, os.str()};
}

struct Criterion {
  const char* name;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"casimir-exactness", 5.0, casimir_exactness},
      {"bounded-hamiltonian", 0.0, bounded_energy},
      {"order-1-convergence", 30.0, order_one},
      {"singularity-fixity", 0.0, singularity_fixity},
      {"symplectic-euler-dichotomy", 0.0, se_dichotomy},
      {"spectrum-reproduction", 0.0, spectrum_reproduction},
      {"tangent-basis-limit", 0.0, tangent_limit},
      {"orbit-shooting", 60.0, orbit_shooting},
      {"long-run-first-integrals", 0.0, long_run},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0 && secs >= c.time_limit) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.time_limit) + " s limit";
    }
    if (!o.pass) ++failures;
    std::printf("%s  %-28s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
