// lvp: command-line front end for simulations, spectra, periodic orbits and the canned
// experiments. Exit status: 0 pass, 1 fail, 2 error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lvpoisson/experiments.hpp"

namespace {

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_error = 2;

struct Globals {
  std::string config;
  std::string out = "out";
  std::optional<double> tol;
};

lvp::ConfigDocument load(const Globals& g) {
  lvp::ConfigDocument doc = g.config.empty() ? lvp::builtin_config() : lvp::load_config(g.config);
  if (g.tol) {
    if (!(*g.tol > 0.0)) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "--tol must be > 0");
    doc.tolerances.solver = *g.tol;
    doc.tolerances.reference = *g.tol;
  }
  return doc;
}

lvp::Vector to_vector(const std::vector<double>& xs) {
  return lvp::Vector::Map(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

lvp::LVSystem system_at(const lvp::SystemDefinition& def, std::optional<double> delta) {
  if (delta && !def.has_delta()) {
    throw lvp::Error(lvp::ErrorKind::InvalidArgument, "system '" + def.name + "' has no delta parameter");
  }
  return delta ? def.at(*delta) : def.build();
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    lvp::detail::write_file(output, text);
    std::cerr << "wrote " << output << "\n";
  }
}

struct SimulateArgs {
  std::string system;
  std::string integrator = "hp1";
  std::vector<double> x0;
  double h = 1e-2;
  long n = 100;
  std::optional<double> delta;
  std::string output;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const lvp::ConfigDocument doc = load(g);
  const lvp::SystemDefinition& def = doc.system(a.system);
  lvp::Trajectory traj;
  if (def.kind == lvp::SystemKind::Canonical) {
    if (a.integrator != "symplectic_euler") {
      throw lvp::Error(lvp::ErrorKind::InvalidArgument, "canonical systems run with --integrator symplectic_euler");
    }
    if (a.x0.size() != 2) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "--x0 needs 2 values");
    traj = lvp::simulate_symplectic_euler(a.x0[0], a.x0[1], a.h, a.n);
  } else {
    lvp::SimulateOptions opts;
    opts.solver_tol = doc.tolerances.solver;
    opts.reference_tol = doc.tolerances.reference;
    traj = lvp::simulate(system_at(def, a.delta), lvp::parse_integrator(a.integrator), lvp::State(to_vector(a.x0)),
                         a.h, a.n, def.first_integrals, opts);
  }
  emit(lvp::trajectory_to_csv(traj), a.output);
  return exit_pass;
}

struct SpectrumArgs {
  std::string system;
  std::optional<double> delta;
  std::vector<double> at;
  int bound = lvp::default_resonance_bound;
  bool model_matrix = false;
  std::string output;
};

int run_spectrum(const Globals& g, const SpectrumArgs& a) {
  lvp::Matrix m;
  if (a.model_matrix) {
    m = lvp::systems::delta_system_model_matrix(a.delta.value_or(lvp::experiment_delta));
  } else {
    const lvp::ConfigDocument doc = load(g);
    const lvp::LVSystem sys = system_at(doc.system(a.system), a.delta);
    const lvp::State x = a.at.empty() ? lvp::State(sys.fixed_point()) : lvp::State(to_vector(a.at));
    m = lvp::linearize(sys, x);
  }
  const lvp::SpectrumReport rep = lvp::spectrum(m, a.bound);
  emit(lvp::to_json(rep).dump(2) + "\n", a.output);
  return exit_pass;
}

struct OrbitArgs {
  std::string system;
  std::vector<double> seed;
  std::optional<double> period;
  std::optional<double> delta;
  std::optional<double> delta_to;
  double delta_step = 1e-3;
  std::optional<double> frequency;
  std::vector<double> etas;
  std::string name;
};

std::vector<double> delta_grid(double from, double to, double step) {
  if (!(step > 0.0)) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "--delta-step must be > 0");
  const long n = static_cast<long>(std::ceil(std::abs(to - from) / step - 1e-9));
  std::vector<double> out{from};
  for (long k = 1; k <= n; ++k) out.push_back(from + (to - from) * static_cast<double>(k) / static_cast<double>(n));
  return out;
}

int run_orbit(const Globals& g, const OrbitArgs& a) {
  const lvp::ConfigDocument doc = load(g);
  const lvp::SystemDefinition& def = doc.system(a.system);
  lvp::ShootOptions opts;
  opts.flow_tol = doc.tolerances.reference;
  lvp::OrbitFamily fam;
  std::string parameter;
  if (!a.etas.empty()) {
    const lvp::LVSystem sys = system_at(def, a.delta);
    if (!a.frequency) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "--etas needs --frequency");
    lvp::AmplitudeOptions ao;
    ao.shoot = opts;
    ao.shoot.delta = a.delta.value_or(def.delta.value_or(0.0));
    fam = lvp::amplitude_family(sys, lvp::tangent_for_frequency(sys, *a.frequency), a.etas, ao);
    parameter = "eta";
  } else {
    if (a.seed.empty()) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "--seed is required without --etas");
    const double d0 = a.delta.value_or(def.delta.value_or(0.0));
    const lvp::LVSystem sys0 = system_at(def, def.has_delta() ? std::optional<double>(d0) : std::nullopt);
    double period = 0.0;
    if (a.period) {
      period = *a.period;
    } else {
      const auto freqs = lvp::spectrum(lvp::linearize(sys0, lvp::State(sys0.fixed_point())), 1).frequencies();
      if (freqs.empty()) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "no linear frequency to seed --period");
      period = 2.0 * std::numbers::pi / freqs.back();
    }
    opts.delta = d0;
    const lvp::PeriodicOrbit orbit0 = lvp::shoot_orbit(sys0, lvp::State(to_vector(a.seed)), period, opts);
    parameter = "delta";
    if (a.delta_to) {
      if (!def.has_delta()) throw lvp::Error(lvp::ErrorKind::InvalidArgument, "continuation needs a delta system");
      fam = lvp::continue_in_delta([&](double d) { return def.at(d); }, orbit0, delta_grid(d0, *a.delta_to, a.delta_step),
                                   opts);
    } else {
      fam.members.push_back({d0, orbit0, ""});
    }
  }
  // Independent re-integration of every orbit at the oracle tolerance.
  bool verified = true;
  for (const auto& m : fam.members) {
    if (!m.orbit) continue;
    const lvp::LVSystem sys = parameter == "eta" ? system_at(def, a.delta)
                              : def.has_delta()  ? def.at(m.parameter)
                                                 : def.build();
    const double res = lvp::orbit_residual(sys, *m.orbit, doc.tolerances.oracle);
    if (res > doc.tolerances.orbit_residual) {
      std::cerr << "orbit at " << parameter << " = " << m.parameter << " re-integrates with residual " << res << "\n";
      verified = false;
    }
  }
  const std::filesystem::path dir = std::filesystem::path(g.out) / "orbit";
  const std::string stem = a.name.empty() ? a.system : a.name;
  lvp::write_json(lvp::to_json(fam, parameter), dir / (stem + ".json"));
  lvp::detail::write_file(dir / (stem + ".csv"), lvp::family_to_csv(fam, parameter));
  std::cout << lvp::family_to_csv(fam, parameter);
  return fam.complete() && verified ? exit_pass : exit_fail;
}

std::vector<std::string> experiment_names(const lvp::ConfigDocument& doc, const std::string& name) {
  std::vector<std::string> names;
  if (name == "all") {
    for (const auto& [n, _] : doc.experiments) names.push_back(n);
  } else {
    (void)doc.experiment(name);
    names.push_back(name);
  }
  return names;
}

int run_experiments(const Globals& g, const std::string& name) {
  const lvp::ConfigDocument doc = load(g);
  for (const auto& n : experiment_names(doc, name)) {
    const lvp::ArtifactSet art = lvp::run_experiment(doc.experiment(n), doc, g.out);
    std::cout << n << ": " << art.files.size() << " files in " << art.directory.string() << "\n";
  }
  return exit_pass;
}

int verify_experiments(const Globals& g, const std::string& name) {
  const lvp::ConfigDocument doc = load(g);
  bool all = true;
  for (const auto& n : experiment_names(doc, name)) {
    const lvp::Verdict v = lvp::verify_experiment(doc.experiment(n), doc, g.out);
    std::cout << (v.pass() ? "PASS " : "FAIL ") << n << "\n";
    for (const auto& c : v.checks) std::cout << "  " << (c.pass ? "ok   " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && v.pass();
  }
  return all ? exit_pass : exit_fail;
}

int list_experiments(const Globals& g) {
  const lvp::ConfigDocument doc = load(g);
  for (const auto& [n, spec] : doc.experiments) std::cout << n << "\t" << spec.description << "\n";
  return exit_pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson integrators for Lotka-Volterra systems", "lvp"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Config file (JSON); defaults to the bundled systems")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--tol", g.tol, "Override the stage-solver and reference-flow tolerances");

  int status = exit_pass;
  std::function<int()> action;

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Integrate a system and write the trajectory CSV");
  s->add_option("--system", sim.system, "System name")->required();
  s->add_option("--integrator", sim.integrator, "hp1 | reference | rk4_fixed | symplectic_euler")->capture_default_str();
  s->add_option("--x0", sim.x0, "Initial point")->required()->delimiter(',');
  s->add_option("--step", sim.h, "Time-step h")->capture_default_str();
  s->add_option("--n", sim.n, "Number of steps")->capture_default_str();
  s->add_option("--delta", sim.delta, "Parameter value for delta-dependent systems");
  s->add_option("-o,--output", sim.output, "CSV path (stdout if omitted)");
  s->callback([&] { action = [&] { return run_simulate(g, sim); }; });

  SpectrumArgs spec;
  auto* sp = app.add_subcommand("spectrum", "Linearization spectrum, ellipticity and resonances as JSON");
  sp->add_option("--system", spec.system, "System name");
  sp->add_option("--delta", spec.delta, "Parameter value for delta-dependent systems");
  sp->add_option("--at", spec.at, "Point of linearization (default: the fixed point)")->delimiter(',');
  sp->add_option("--bound", spec.bound, "Resonance search coefficient bound")->capture_default_str();
  sp->add_flag("--model-matrix", spec.model_matrix, "Use the closed-form matrix M_delta of the delta-system");
  sp->add_option("-o,--output", spec.output, "JSON path (stdout if omitted)");
  sp->callback([&] {
    if (spec.system.empty() && !spec.model_matrix) throw CLI::ValidationError("spectrum", "--system or --model-matrix required");
    action = [&] { return run_spectrum(g, spec); };
  });

  OrbitArgs orb;
  auto* o = app.add_subcommand("orbit", "Shoot a periodic orbit and continue it in delta or amplitude");
  o->add_option("--system", orb.system, "System name")->required();
  o->add_option("--seed", orb.seed, "Seed point")->delimiter(',');
  o->add_option("--period", orb.period, "Seed period (default 2 pi / largest linear frequency)");
  o->add_option("--delta", orb.delta, "Start value of delta");
  o->add_option("--delta-to", orb.delta_to, "Continue to this delta");
  o->add_option("--delta-step", orb.delta_step, "Continuation step (at most 1e-3)")->capture_default_str();
  o->add_option("--frequency", orb.frequency, "Linear frequency selecting the Lyapunov family");
  o->add_option("--etas", orb.etas, "Amplitudes for a Lyapunov family")->delimiter(',');
  o->add_option("--name", orb.name, "Output file stem (default: system name)");
  o->callback([&] { action = [&] { return run_orbit(g, orb); }; });

  auto* e = app.add_subcommand("experiment", "Canned experiments");
  e->require_subcommand(1);
  std::string run_name, verify_name;
  auto* er = e->add_subcommand("run", "Run an experiment (or 'all')");
  er->add_option("name", run_name, "Experiment name")->required();
  er->callback([&] { action = [&] { return run_experiments(g, run_name); }; });
  auto* ev = e->add_subcommand("verify", "Check a finished run and write verdict.json (or 'all')");
  ev->add_option("name", verify_name, "Experiment name")->required();
  ev->callback([&] { action = [&] { return verify_experiments(g, verify_name); }; });
  auto* el = e->add_subcommand("list", "List experiments");
  el->callback([&] { action = [&] { return list_experiments(g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return exit_error;
  }
  try {
    status = action();
  } catch (const lvp::Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return exit_error;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return exit_error;
  }
  return status;
}
