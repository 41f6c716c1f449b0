#pragma once

// Canned experiments: run writes trajectories and a report under out/<name>/, verify
// re-reads them and evaluates the spec's checks into verdict.json.

#include <filesystem>
#include <string>
#include <vector>

#include "lvpoisson/analysis.hpp"
#include "lvpoisson/integrators.hpp"
#include "lvpoisson/io.hpp"
#include "lvpoisson/systems.hpp"

namespace lvp {

namespace detail {

inline Vector vec(std::initializer_list<double> xs) {
  return Vector::Map(xs.begin(), static_cast<Eigen::Index>(xs.size()));
}

inline SystemDefinition lv_definition(std::string name, const Matrix& a, const Vector& eps,
                                      std::optional<Vector> qref) {
  SystemDefinition d;
  d.name = std::move(name);
  d.dim = a.rows();
  d.a = a;
  d.eps = eps;
  d.q_reference = std::move(qref);
  d.a_delta = Matrix::Zero(d.dim, d.dim);
  d.eps_delta = Vector::Zero(d.dim);
  d.q_reference_delta = Vector::Zero(d.dim);
  return d;
}

}  // namespace detail

inline constexpr double experiment_delta = 1e-2;

/// The bundled systems and experiments; data/systems.json holds the same document.
inline ConfigDocument builtin_config() {
  using detail::vec;
  ConfigDocument doc;

  {
    const Matrix a = systems::integrable_5d_interaction();
    SystemDefinition d = detail::lv_definition("integrable-5d", a, -a * Vector::Ones(5), Vector::Ones(5));
    d.first_integrals = systems::integrable_5d_first_integrals();
    doc.systems.emplace(d.name, std::move(d));
  }
  {
    SystemDefinition d = detail::lv_definition("delta-system", systems::delta_system_interaction(0.0),
                                               systems::delta_system_environment(0.0),
                                               systems::delta_system_fixed_point(0.0));
    d.delta = experiment_delta;
    d.a_delta = systems::delta_system_interaction(1.0) - systems::delta_system_interaction(0.0);
    d.eps_delta = systems::delta_system_environment(1.0) - systems::delta_system_environment(0.0);
    d.q_reference_delta = systems::delta_system_fixed_point(1.0) - systems::delta_system_fixed_point(0.0);
    doc.systems.emplace(d.name, std::move(d));
  }
  {
    const LVSystem pp = systems::predator_prey_2d();
    SystemDefinition d = detail::lv_definition("predator-prey-2d", pp.interaction(), pp.environment(), std::nullopt);
    doc.systems.emplace(d.name, std::move(d));
  }
  {
    SystemDefinition d;
    d.name = "harmonic-oscillator";
    d.kind = SystemKind::Canonical;
    d.dim = 2;
    doc.systems.emplace(d.name, std::move(d));
  }

  const auto add = [&](ExperimentSpec s) { doc.experiments.emplace(s.name, std::move(s)); };
  {
    ExperimentSpec s;
    s.name = "fig1-integrable";
    s.description = "Integrable 5D system, large step: Casimir exact, bounded energy error";
    s.system = "integrable-5d";
    s.h = 1.0;
    s.n_steps = 100;
    s.x0 = vec({2, 2, 2, 2, 2});
    s.compare = {"rk4_fixed"};
    s.checks = {"casimir", "energy_bounded", "contrast"};
    add(std::move(s));
  }
  for (const bool above : {false, true}) {
    ExperimentSpec s;
    s.name = above ? "fig3-se-above" : "fig3-se-below";
    s.description = above ? "Symplectic Euler on the harmonic oscillator just above h = 2"
                          : "Symplectic Euler on the harmonic oscillator just below h = 2";
    s.system = "harmonic-oscillator";
    s.integrator = "symplectic_euler";
    s.h = above ? 2.0 + 1e-3 : 2.0 - 1e-3;
    s.n_steps = 100;
    s.extended_steps = 10000;
    s.x0 = vec({1, 0});
    s.checks = above ? std::vector<std::string>{"escapes", "se_hyperbolic"}
                     : std::vector<std::string>{"stays_bounded", "se_elliptic"};
    add(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "fig4-6-pi1";
    s.description = "Iterates near the family Pi^1 of the delta-system";
    s.system = "delta-system";
    s.n_steps = 500;
    s.seeds = SeedRecipe{1.0, vec({0, 0, 0, 1, 0}), vec({0, 0, 0, 0, 1}), {1, 2, 3}};
    s.checks = {"casimir", "energy_small", "stays_bounded"};
    add(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "fig7-pi2";
    s.description = "Iterates near the family Pi^2 of the delta-system";
    s.system = "delta-system";
    s.n_steps = 100;
    s.seeds = SeedRecipe{1.0, vec({1, 1, 2, 0, 0}), vec({1, -1, 0, 0, 0}), {1, 2, 3}};
    s.checks = {"casimir", "energy_small", "stays_bounded"};
    add(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "fig8-tilde-pi1";
    s.description = "Iterates near the Lyapunov family of the sqrt(3) frequency";
    s.system = "delta-system";
    s.n_steps = 100;
    s.seeds = SeedRecipe{0.1, vec({1, -2, -1, 0, 0}), vec({1, 0, 1, 1, 0}), {1, 2, 3}};
    s.checks = {"casimir", "energy_small", "stays_bounded"};
    add(std::move(s));
  }
  for (const auto& [_, spec] : doc.experiments) validate_experiment(spec, doc.systems);
  return doc;
}

struct ExperimentRun {
  std::string label;  // "hp1", "hp1_seed2", "hp1_extended", "rk4_fixed", ...
  std::string integrator;
  long steps = 0;
  std::optional<int> seed;
  bool extended = false;
  Vector x0;

  std::string file() const { return label + ".csv"; }
};

/// The trajectories an experiment produces, in a fixed order.
inline std::vector<ExperimentRun> planned_runs(const ExperimentSpec& spec, const ConfigDocument& doc) {
  std::vector<std::pair<std::optional<int>, Vector>> starts;
  if (spec.x0) {
    starts.emplace_back(std::nullopt, *spec.x0);
  } else {
    const Vector q = doc.system(spec.system).build().fixed_point();
    for (int i : spec.seeds->indices) {
      starts.emplace_back(i, q + (static_cast<double>(i) / 3.0) * spec.seeds->eta * (spec.seeds->u + spec.seeds->v));
    }
  }
  std::vector<ExperimentRun> runs;
  const auto add = [&](const std::string& integ, long steps, bool extended) {
    for (const auto& [seed, x0] : starts) {
      std::string label = integ;
      if (seed) label += "_seed" + std::to_string(*seed);
      if (extended) label += "_extended";
      runs.push_back({label, integ, steps, seed, extended, x0});
    }
  };
  add(spec.integrator, spec.n_steps, false);
  if (spec.extended_steps > 0) add(spec.integrator, spec.extended_steps, true);
  for (const auto& c : spec.compare) add(c, spec.n_steps, false);
  return runs;
}

inline Trajectory run_trajectory(const ExperimentSpec& spec, const ConfigDocument& doc, const ExperimentRun& run) {
  const SystemDefinition& def = doc.system(spec.system);
  if (run.integrator == "symplectic_euler") {
    return simulate_symplectic_euler(run.x0[0], run.x0[1], spec.h, run.steps);
  }
  SimulateOptions opts;
  opts.solver_tol = doc.tolerances.solver;
  opts.reference_tol = doc.tolerances.reference;
  return simulate(def.build(), parse_integrator(run.integrator), State(run.x0), spec.h, run.steps, def.first_integrals,
                  opts);
}

inline Json spec_to_json(const ExperimentSpec& spec) {
  Json j{{"name", spec.name}, {"description", spec.description}, {"system", spec.system},
         {"integrator", spec.integrator}, {"h", spec.h}, {"n_steps", spec.n_steps}};
  if (spec.extended_steps > 0) j["extended_steps"] = spec.extended_steps;
  if (spec.x0) j["x0"] = to_json(*spec.x0);
  if (spec.seeds) {
    j["seeds"] = {{"eta", spec.seeds->eta}, {"u", to_json(spec.seeds->u)}, {"v", to_json(spec.seeds->v)},
                  {"indices", spec.seeds->indices}};
  }
  if (!spec.compare.empty()) j["compare"] = spec.compare;
  j["checks"] = spec.checks;
  return j;
}

struct ArtifactSet {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
};

/// Runs every planned trajectory and writes <out>/<name>/*.csv and report.json.
inline ArtifactSet run_experiment(const ExperimentSpec& spec, const ConfigDocument& doc,
                                  const std::filesystem::path& out_root) {
  try {
    validate_experiment(spec, doc.systems);
    ArtifactSet art{out_root / spec.name, {}};
    Json report{{"experiment", spec_to_json(spec)}};
    Json runs = Json::array();
    for (const auto& run : planned_runs(spec, doc)) {
      const Trajectory traj = run_trajectory(spec, doc, run);
      const auto path = art.directory / run.file();
      write_trajectory(traj, path);
      art.files.push_back(path);
      Json stats = Json::array();
      for (const auto& s : drift_report(traj)) stats.push_back(to_json(s));
      Json r{{"label", run.label}, {"file", run.file()}, {"integrator", run.integrator}, {"steps", run.steps},
             {"x0", to_json(run.x0)}, {"drift", std::move(stats)}};
      runs.push_back(std::move(r));
    }
    report["runs"] = std::move(runs);
    const SystemDefinition& def = doc.system(spec.system);
    if (def.kind == SystemKind::LotkaVolterra) {
      const LVSystem sys = def.build();
      report["fixed_point"] = to_json(sys.fixed_point());
      report["spectrum_at_fixed_point"] = to_json(spectrum(linearize(sys, State(sys.fixed_point()))));
    } else {
      const SEModifiedHamiltonian m = se_modified_hamiltonian(spec.h);
      report["modified_hamiltonian"] = {{"uu", m.uu}, {"vv", m.vv}, {"uv", m.uv}, {"elliptic", m.elliptic}};
    }
    const auto rpath = art.directory / "report.json";
    write_json(report, rpath);
    art.files.push_back(rpath);
    return art;
  } catch (const Error& e) {
    throw e.with_context("experiment " + spec.name);
  }
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Verdict {
  std::string experiment;
  std::vector<CheckResult> checks;

  bool pass() const {
    if (checks.empty()) return false;
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

inline Json to_json(const Verdict& v) {
  Json checks = Json::array();
  for (const auto& c : v.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return Json{{"experiment", v.experiment}, {"pass", v.pass()}, {"checks", std::move(checks)}};
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline double sup_norm2(const Trajectory& t) {
  double m = 0.0;
  for (const auto& x : t.states) m = std::max(m, x.squaredNorm());
  return m;
}

}  // namespace detail

/// Reads the artifacts of a finished run and evaluates the spec's checks. Missing files
/// raise MissingArtifact; too-short trajectories produce a failing "data" check.
inline Verdict evaluate_experiment(const ExperimentSpec& spec, const ConfigDocument& doc,
                                   const std::filesystem::path& out_root) {
  const auto dir = out_root / spec.name;
  const std::vector<ExperimentRun> runs = planned_runs(spec, doc);
  std::vector<Trajectory> trajs;
  for (const auto& run : runs) {
    const auto path = dir / run.file();
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingArtifact, path.string());
    trajs.push_back(read_trajectory(path));
  }
  const Tolerances& tol = doc.tolerances;
  Verdict verdict{spec.name, {}};
  const auto add = [&](std::string name, bool pass, std::string detail) {
    verdict.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  bool enough = true;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const bool escaped = !trajs[k].empty() && trajs[k].states.back().squaredNorm() > escape_norm2;
    const long rows = static_cast<long>(trajs[k].size());
    if (rows < 3 || (rows != runs[k].steps + 1 && !(escaped && rows < runs[k].steps + 1))) {
      add("data", false,
          "insufficient data: " + runs[k].file() + " has " + std::to_string(trajs[k].size()) + " rows, expected " +
              std::to_string(runs[k].steps + 1));
      enough = false;
    }
  }
  if (!enough) return verdict;
  add("data", true, std::to_string(runs.size()) + " trajectories complete");

  // Diagnostics must agree with the recorded states.
  const SystemDefinition& def = doc.system(spec.system);
  if (def.kind == SystemKind::LotkaVolterra) {
    const LVSystem sys = def.build();
    const CasimirBasis cas = casimir_basis(sys);
    const auto names = diagnostic_names(cas, def.first_integrals);
    double worst = 0.0;
    bool layout = true;
    for (const auto& t : trajs) {
      if (t.diagnostic_names != names || t.dim() != sys.dim()) {
        layout = false;
        break;
      }
      for (std::size_t r = 0; r < t.size(); ++r) {
        const Vector expect = diagnostics_row(sys, cas, def.first_integrals, State(t.states[r]));
        const Vector diff = (expect - t.diagnostics[r]).cwiseAbs();
        for (Eigen::Index i = 0; i < diff.size(); ++i) {
          worst = std::max(worst, diff[i] / std::max(1.0, std::abs(expect[i])));
        }
      }
    }
    add("consistent", layout && worst <= 1e-10,
        layout ? "max relative mismatch of recorded diagnostics " + detail::fmt(worst) : "unexpected columns");
  }

  std::vector<std::size_t> primary;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (runs[k].integrator == spec.integrator && !runs[k].extended) primary.push_back(k);
  }
  const auto h_stats = [&](std::size_t k) { return find_stats(drift_report(trajs[k]), "H"); };

  for (const auto& check : spec.checks) {
    if (check == "casimir") {
      double worst = 0.0;
      std::size_t count = 0;
      for (std::size_t k : primary) {
        for (const auto& c : trajs[k].casimir_names()) {
          worst = std::max(worst, drift_stats(c, trajs[k].column(c)).max_rel);
          ++count;
        }
      }
      add(check, count > 0 && worst <= tol.casimir_rel,
          count ? "max relative Casimir deviation " + detail::fmt(worst) + " (limit " + detail::fmt(tol.casimir_rel) + ")"
                : "no Casimir columns");
    } else if (check == "energy_bounded") {
      bool ok = true;
      std::string msg;
      for (std::size_t k : primary) {
        const DriftStats s = h_stats(k);
        ok = ok && std::isfinite(s.max_abs) && s.slope_consistent_with_zero(tol.slope_sigma);
        msg += runs[k].label + ": max|dH| " + detail::fmt(s.max_abs) + ", slope " + detail::fmt(s.slope) + " +- " +
               detail::fmt(s.slope_stderr) + "; ";
      }
      add(check, ok, msg);
    } else if (check == "energy_small") {
      double worst = 0.0;
      for (std::size_t k : primary) worst = std::max(worst, h_stats(k).max_abs);
      add(check, worst <= tol.energy_abs,
          "max |H - H0| " + detail::fmt(worst) + " (limit " + detail::fmt(tol.energy_abs) + ")");
    } else if (check == "contrast") {
      if (spec.compare.empty()) {
        add(check, false, "no comparison integrator");
        continue;
      }
      double own = 0.0, other = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < runs.size(); ++k) {
        if (runs[k].extended) continue;
        const double s = std::abs(h_stats(k).slope);
        if (runs[k].integrator == spec.integrator) own = std::max(own, s);
        else if (runs[k].integrator == spec.compare.front()) other = std::min(other, s);
      }
      add(check, other >= tol.contrast_ratio * own,
          "|slope| " + spec.integrator + " " + detail::fmt(own) + " vs " + spec.compare.front() + " " +
              detail::fmt(other) + " (ratio needed " + detail::fmt(tol.contrast_ratio) + ")");
    } else if (check == "stays_bounded" || check == "escapes") {
      double sup = 0.0;
      for (std::size_t k = 0; k < runs.size(); ++k) {
        if (runs[k].integrator == spec.integrator) sup = std::max(sup, detail::sup_norm2(trajs[k]));
      }
      const bool bounded = std::isfinite(sup) && sup <= tol.norm_bound;
      add(check, check == "stays_bounded" ? bounded : !bounded,
          "sup |x|^2 " + detail::fmt(sup) + " (bound " + detail::fmt(tol.norm_bound) + ")");
    } else if (check == "se_elliptic" || check == "se_hyperbolic") {
      const bool elliptic = se_modified_hamiltonian(spec.h).elliptic;
      add(check, check == "se_elliptic" ? elliptic : !elliptic,
          std::string("modified Hamiltonian is ") + (elliptic ? "elliptic" : "not elliptic"));
    }
  }
  return verdict;
}

/// evaluate_experiment plus <out>/<name>/verdict.json.
inline Verdict verify_experiment(const ExperimentSpec& spec, const ConfigDocument& doc,
                                 const std::filesystem::path& out_root) {
  try {
    Verdict v = evaluate_experiment(spec, doc, out_root);
    write_json(to_json(v), out_root / spec.name / "verdict.json");
    return v;
  } catch (const Error& e) {
    throw e.with_context("experiment " + spec.name);
  }
}

}  // namespace lvp
