#pragma once

// Config documents (JSON), trajectory CSV files and JSON reports.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lvpoisson/analysis.hpp"
#include "lvpoisson/orbits.hpp"
#include "lvpoisson/system.hpp"
#include "lvpoisson/trajectory.hpp"

namespace lvp {

using Json = nlohmann::ordered_json;

enum class SystemKind { LotkaVolterra, Canonical };

/// A named system as written in a config. The LV coefficients may be affine in a
/// parameter delta: A = A + delta A_delta, likewise eps and q_reference.
struct SystemDefinition {
  std::string name;
  SystemKind kind = SystemKind::LotkaVolterra;
  Eigen::Index dim = 0;
  Matrix a;
  Vector eps;
  std::optional<Vector> q_reference;
  std::optional<double> delta;
  Matrix a_delta;
  Vector eps_delta;
  Vector q_reference_delta;
  std::vector<FirstIntegral> first_integrals;

  bool has_delta() const noexcept { return delta.has_value(); }

  LVSystem at(double d) const {
    if (kind != SystemKind::LotkaVolterra) {
      throw Error(ErrorKind::InvalidArgument, "system '" + name + "' is canonical, not Lotka-Volterra");
    }
    std::optional<Vector> qref = q_reference;
    if (qref && has_delta()) *qref += d * q_reference_delta;
    if (!has_delta()) return build_system(a, eps, qref);
    return build_system(a + d * a_delta, eps + d * eps_delta, qref);
  }

  LVSystem build() const { return at(delta.value_or(0.0)); }
};

/// Initial points q + (i/3) eta (u + v) for each i in indices.
struct SeedRecipe {
  double eta = 1.0;
  Vector u;
  Vector v;
  std::vector<int> indices{1, 2, 3};
};

struct ExperimentSpec {
  std::string name;
  std::string description;
  std::string system;
  std::string integrator = "hp1";
  double h = 1e-2;
  long n_steps = 100;
  long extended_steps = 0;
  std::optional<Vector> x0;
  std::optional<SeedRecipe> seeds;
  std::vector<std::string> compare;
  std::vector<std::string> checks;
};

struct Tolerances {
  double solver = 1e-12;          // implicit stage solve
  double reference = 1e-12;       // adaptive reference flow
  double oracle = 1e-13;          // convergence oracle / orbit re-integration
  double casimir_rel = 1e-9;
  double slope_sigma = 3.0;
  double contrast_ratio = 10.0;
  double norm_bound = 1e6;        // squared sup norm
  double energy_abs = 1e-3;
  double orbit_residual = 1e-9;
};

inline constexpr std::array<std::string_view, 4> integrator_names{"hp1", "reference", "rk4_fixed",
                                                                   "symplectic_euler"};

inline constexpr std::array<std::string_view, 8> check_names{
    "casimir", "energy_bounded", "energy_small", "contrast", "stays_bounded", "escapes", "se_elliptic",
    "se_hyperbolic"};

struct ConfigDocument {
  std::map<std::string, SystemDefinition> systems;
  std::map<std::string, ExperimentSpec> experiments;
  Tolerances tolerances;

  const SystemDefinition& system(const std::string& name) const {
    const auto it = systems.find(name);
    if (it == systems.end()) throw Error(ErrorKind::NotFound, "no system named '" + name + "'");
    return it->second;
  }

  const ExperimentSpec& experiment(const std::string& name) const {
    const auto it = experiments.find(name);
    if (it == experiments.end()) throw Error(ErrorKind::NotFound, "no experiment named '" + name + "'");
    return it->second;
  }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

/// Typed field access with a dotted path for error messages.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::ParseError, (path.empty() ? std::string("<root>") : path) + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& raw(const std::string& key) const {
    if (!has(key)) fail(at(key), "missing required field");
    return j_.at(key);
  }

  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(at(key), "unknown field");
    }
  }

  double number(const std::string& key) const { return as_number(raw(key), at(key)); }
  std::optional<double> opt_number(const std::string& key) const {
    return has(key) ? std::optional<double>(number(key)) : std::nullopt;
  }

  long integer(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<long>();
  }

  std::string string(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  Vector vector(const std::string& key) const { return as_vector(raw(key), at(key)); }
  Matrix matrix(const std::string& key) const { return as_matrix(raw(key), at(key)); }

  std::vector<std::string> strings(const std::string& key) const {
    const Json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  static Vector as_vector(const Json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = as_number(v[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  static Matrix as_matrix(const Json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      const std::string rp = path + "[" + std::to_string(r) + "]";
      const Vector row = as_vector(v[r], rp);
      if (static_cast<std::size_t>(row.size()) != cols) {
        throw Error(ErrorKind::ValidationError, "RaggedMatrix: " + rp + " has " + std::to_string(row.size()) +
                                                    " entries, expected " + std::to_string(cols));
      }
      out.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
};

[[noreturn]] inline void invalid(const std::string& invariant, const std::string& where, const std::string& what) {
  throw Error(ErrorKind::ValidationError, invariant + ": " + where + ": " + what);
}

inline void require_size(const std::string& where, Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    invalid("DimensionMismatch", where, "has size " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

inline SystemDefinition parse_system(const std::string& name, const Json& j, const std::string& path) {
  const Fields f(j, path);
  SystemDefinition def;
  def.name = name;
  const std::string kind = f.has("kind") ? f.string("kind") : "lotka_volterra";
  if (kind == "canonical") {
    f.only({"kind", "dim", "description"});
    def.kind = SystemKind::Canonical;
    def.dim = f.integer("dim");
    if (def.dim != 2) invalid("CanonicalDimension", f.at("dim"), "canonical systems are 2-dimensional");
    return def;
  }
  if (kind != "lotka_volterra") Fields::fail(f.at("kind"), "expected \"lotka_volterra\" or \"canonical\"");
  f.only({"kind", "dim", "A", "eps", "q_reference", "first_integrals", "delta", "A_delta", "eps_delta",
          "q_reference_delta", "description"});
  def.dim = f.integer("dim");
  if (def.dim < 1) invalid("PositiveDimension", f.at("dim"), "must be >= 1");
  def.a = f.matrix("A");
  if (def.a.rows() != def.a.cols()) invalid("SquareMatrix", f.at("A"), "interaction matrix must be square");
  require_size(f.at("A"), def.a.rows(), def.dim);
  def.eps = f.vector("eps");
  require_size(f.at("eps"), def.eps.size(), def.dim);
  if (f.has("q_reference")) {
    def.q_reference = f.vector("q_reference");
    require_size(f.at("q_reference"), def.q_reference->size(), def.dim);
  }
  def.a_delta = Matrix::Zero(def.dim, def.dim);
  def.eps_delta = Vector::Zero(def.dim);
  def.q_reference_delta = Vector::Zero(def.dim);
  if (f.has("delta")) {
    def.delta = f.number("delta");
    if (f.has("A_delta")) {
      def.a_delta = f.matrix("A_delta");
      require_size(f.at("A_delta") + " rows", def.a_delta.rows(), def.dim);
      require_size(f.at("A_delta") + " columns", def.a_delta.cols(), def.dim);
    }
    if (f.has("eps_delta")) {
      def.eps_delta = f.vector("eps_delta");
      require_size(f.at("eps_delta"), def.eps_delta.size(), def.dim);
    }
    if (f.has("q_reference_delta")) {
      if (!def.q_reference) invalid("MissingReference", f.at("q_reference_delta"), "requires q_reference");
      def.q_reference_delta = f.vector("q_reference_delta");
      require_size(f.at("q_reference_delta"), def.q_reference_delta.size(), def.dim);
    }
  } else if (f.has("A_delta") || f.has("eps_delta") || f.has("q_reference_delta")) {
    invalid("MissingParameter", path, "parameter-dependent coefficients need a delta value");
  }
  if (f.has("first_integrals")) {
    const Json& fi = f.raw("first_integrals");
    const Fields ff(fi, f.at("first_integrals"));
    for (const auto& [iname, body] : fi.items()) {
      const Fields g(body, ff.at(iname));
      g.only({"linear", "log"});
      FirstIntegral integral{iname, Vector::Zero(def.dim), Vector::Zero(def.dim)};
      if (g.has("linear")) integral.linear = g.vector("linear");
      if (g.has("log")) integral.log = g.vector("log");
      require_size(g.at("linear"), integral.linear.size(), def.dim);
      require_size(g.at("log"), integral.log.size(), def.dim);
      const auto indexed = [&](char c) {
        return iname.size() > 1 && iname[0] == c && std::all_of(iname.begin() + 1, iname.end(), ::isdigit);
      };
      if (iname == "H" || iname == "t" || iname == "stage_iters" || iname == "stage_residual" || indexed('C') ||
          indexed('x')) {
        invalid("ReservedName", ff.at(iname), "collides with a trajectory column");
      }
      def.first_integrals.push_back(std::move(integral));
    }
  }
  try {
    (void)def.build();
  } catch (const Error& e) {
    invalid(std::string(to_string(e.kind())), path, e.message());
  }
  return def;
}

inline ExperimentSpec parse_experiment(const std::string& name, const Json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"description", "system", "integrator", "h", "n_steps", "extended_steps", "x0", "seeds", "compare",
          "checks"});
  ExperimentSpec spec;
  spec.name = name;
  if (f.has("description")) spec.description = f.string("description");
  spec.system = f.string("system");
  if (f.has("integrator")) spec.integrator = f.string("integrator");
  spec.h = f.number("h");
  spec.n_steps = f.integer("n_steps");
  if (f.has("extended_steps")) spec.extended_steps = f.integer("extended_steps");
  if (f.has("x0")) spec.x0 = f.vector("x0");
  if (f.has("seeds")) {
    const Fields s(f.raw("seeds"), f.at("seeds"));
    s.only({"eta", "u", "v", "indices"});
    SeedRecipe r;
    r.eta = s.number("eta");
    r.u = s.vector("u");
    r.v = s.vector("v");
    if (s.has("indices")) {
      const Json& idx = s.raw("indices");
      if (!idx.is_array()) Fields::fail(s.at("indices"), "expected an array of integers");
      r.indices.clear();
      for (const auto& i : idx) {
        if (!i.is_number_integer()) Fields::fail(s.at("indices"), "expected an array of integers");
        r.indices.push_back(i.get<int>());
      }
    }
    spec.seeds = std::move(r);
  }
  if (f.has("compare")) spec.compare = f.strings("compare");
  if (f.has("checks")) spec.checks = f.strings("checks");
  return spec;
}

inline bool is_integrator_name(std::string_view s) {
  return std::find(integrator_names.begin(), integrator_names.end(), s) != integrator_names.end();
}

}  // namespace detail

/// Checks an experiment against the systems it references: known integrator and checks,
/// positive step data, and an initial point (explicit or seeded) inside the positive
/// quadrant with the right dimension.
inline void validate_experiment(const ExperimentSpec& spec, const std::map<std::string, SystemDefinition>& systems) {
  const std::string where = "experiments." + spec.name;
  const auto it = systems.find(spec.system);
  if (it == systems.end()) detail::invalid("UnresolvedReference", where + ".system", "no system '" + spec.system + "'");
  const SystemDefinition& def = it->second;
  if (!detail::is_integrator_name(spec.integrator)) {
    detail::invalid("UnknownIntegrator", where + ".integrator", "'" + spec.integrator + "'");
  }
  const bool canonical = def.kind == SystemKind::Canonical;
  const auto matches = [&](const std::string& integ) { return (integ == "symplectic_euler") == canonical; };
  if (!matches(spec.integrator)) {
    detail::invalid("IntegratorSystemMismatch", where + ".integrator",
                    "'" + spec.integrator + "' cannot run system '" + spec.system + "'");
  }
  for (const auto& c : spec.compare) {
    if (!detail::is_integrator_name(c)) detail::invalid("UnknownIntegrator", where + ".compare", "'" + c + "'");
    if (!matches(c)) detail::invalid("IntegratorSystemMismatch", where + ".compare", "'" + c + "'");
  }
  for (const auto& c : spec.checks) {
    if (std::find(check_names.begin(), check_names.end(), c) == check_names.end()) {
      detail::invalid("UnknownCheck", where + ".checks", "'" + c + "'");
    }
  }
  if (!(spec.h > 0.0) || !std::isfinite(spec.h)) detail::invalid("PositiveStep", where + ".h", "must be > 0");
  if (spec.n_steps < 1) detail::invalid("PositiveStepCount", where + ".n_steps", "must be >= 1");
  if (spec.extended_steps < 0) detail::invalid("PositiveStepCount", where + ".extended_steps", "must be >= 0");
  if (spec.x0.has_value() == spec.seeds.has_value()) {
    detail::invalid("InitialPoint", where, "exactly one of x0 and seeds is required");
  }
  if (spec.x0) {
    detail::require_size(where + ".x0", spec.x0->size(), def.dim);
    if (!canonical && !((spec.x0->array() > 0.0).all() && spec.x0->allFinite())) {
      detail::invalid("PositiveQuadrant", where + ".x0", "initial point is outside the positive quadrant");
    }
    return;
  }
  if (canonical) detail::invalid("InitialPoint", where + ".seeds", "seeding needs a Lotka-Volterra system");
  const SeedRecipe& r = *spec.seeds;
  detail::require_size(where + ".seeds.u", r.u.size(), def.dim);
  detail::require_size(where + ".seeds.v", r.v.size(), def.dim);
  if (r.indices.empty()) detail::invalid("InitialPoint", where + ".seeds.indices", "no seed indices");
  const Vector q = def.build().fixed_point();
  for (int i : r.indices) {
    const Vector x = q + (static_cast<double>(i) / 3.0) * r.eta * (r.u + r.v);
    if (!((x.array() > 0.0).all() && x.allFinite())) {
      detail::invalid("PositiveQuadrant", where + ".seeds", "seed " + std::to_string(i) + " leaves the positive quadrant");
    }
  }
}

inline Tolerances parse_tolerances(const Json& j, const std::string& path = "tolerances") {
  const detail::Fields f(j, path);
  f.only({"solver", "reference", "oracle", "casimir_rel", "slope_sigma", "contrast_ratio", "norm_bound",
          "energy_abs", "orbit_residual"});
  Tolerances t;
  const auto take = [&](const char* key, double& slot) {
    if (const auto v = f.opt_number(key)) {
      if (!(*v > 0.0)) detail::invalid("PositiveTolerance", f.at(key), "must be > 0");
      slot = *v;
    }
  };
  take("solver", t.solver);
  take("reference", t.reference);
  take("oracle", t.oracle);
  take("casimir_rel", t.casimir_rel);
  take("slope_sigma", t.slope_sigma);
  take("contrast_ratio", t.contrast_ratio);
  take("norm_bound", t.norm_bound);
  take("energy_abs", t.energy_abs);
  take("orbit_residual", t.orbit_residual);
  return t;
}

/// Parses and fully validates a config document. Syntax and type errors raise ParseError
/// (with line or field path); violated invariants raise ValidationError whose message
/// starts with the invariant name.
inline ConfigDocument parse_config(const std::string& text, const std::string& origin = "<config>") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(line) + ": " + e.what());
  }
  const detail::Fields root(j, "");
  root.only({"systems", "experiments", "tolerances"});
  ConfigDocument doc;
  if (root.has("systems")) {
    const Json& systems = root.raw("systems");
    const detail::Fields fs(systems, "systems");
    for (const auto& [name, body] : systems.items()) {
      doc.systems.emplace(name, detail::parse_system(name, body, fs.at(name)));
    }
  }
  if (root.has("experiments")) {
    const Json& exps = root.raw("experiments");
    const detail::Fields fe(exps, "experiments");
    for (const auto& [name, body] : exps.items()) {
      doc.experiments.emplace(name, detail::parse_experiment(name, body, fe.at(name)));
    }
  }
  if (root.has("tolerances")) doc.tolerances = parse_tolerances(root.raw("tolerances"));
  for (const auto& [_, spec] : doc.experiments) validate_experiment(spec, doc.systems);
  return doc;
}

inline ConfigDocument load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path), path.string());
}

// ---- trajectory CSV ----

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::FormatError, "line " + std::to_string(line) + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> trajectory_header(const Trajectory& traj) {
  std::vector<std::string> cols{"t"};
  for (Eigen::Index i = 0; i < traj.dim(); ++i) cols.push_back("x" + std::to_string(i + 1));
  cols.insert(cols.end(), traj.diagnostic_names.begin(), traj.diagnostic_names.end());
  cols.push_back("stage_iters");
  cols.push_back("stage_residual");
  return cols;
}

/// CSV text with header t,x1..xN,<diagnostics>,stage_iters,stage_residual and one row per
/// iterate. Non-finite values are rejected.
inline std::string trajectory_to_csv(const Trajectory& traj) {
  traj.validate();
  if (traj.empty()) throw Error(ErrorKind::FormatError, "empty trajectory");
  std::string out;
  const auto header = trajectory_header(traj);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  const auto put = [&](double v, std::size_t row, const std::string& col) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::FormatError, "non-finite value in column '" + col + "' at row " + std::to_string(row));
    }
    out += detail::format_double(v);
  };
  for (std::size_t r = 0; r < traj.size(); ++r) {
    std::size_t c = 0;
    put(traj.times[r], r, header[c++]);
    for (Eigen::Index i = 0; i < traj.dim(); ++i) {
      out += ',';
      put(traj.states[r][i], r, header[c++]);
    }
    for (Eigen::Index i = 0; i < traj.diagnostics[r].size(); ++i) {
      out += ',';
      put(traj.diagnostics[r][i], r, header[c++]);
    }
    out += ',';
    out += std::to_string(traj.stage_iterations[r]);
    out += ',';
    put(traj.stage_residuals[r], r, header.back());
    out += '\n';
  }
  return out;
}

inline void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  detail::write_file(path, trajectory_to_csv(traj));
}

/// Parses CSV text produced by trajectory_to_csv. When expected_diagnostics is given the
/// diagnostic columns must match it exactly.
inline Trajectory trajectory_from_csv(const std::string& text,
                                      const std::optional<std::vector<std::string>>& expected_diagnostics = {}) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw Error(ErrorKind::FormatError, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header_views = detail::split_csv(line);
  const std::vector<std::string> header(header_views.begin(), header_views.end());
  if (header.size() < 4 || header.front() != "t" || header[header.size() - 2] != "stage_iters" ||
      header.back() != "stage_residual") {
    throw Error(ErrorKind::FormatError, "header must be t,x1..xN,...,stage_iters,stage_residual");
  }
  std::size_t dim = 0;
  while (1 + dim < header.size() - 2 && header[1 + dim] == "x" + std::to_string(dim + 1)) ++dim;
  if (dim == 0) throw Error(ErrorKind::FormatError, "header has no state columns");
  Trajectory traj;
  traj.diagnostic_names.assign(header.begin() + 1 + static_cast<std::ptrdiff_t>(dim), header.end() - 2);
  if (expected_diagnostics && *expected_diagnostics != traj.diagnostic_names) {
    throw Error(ErrorKind::FormatError, "diagnostic columns do not match the expected header");
  }
  const std::size_t ndiag = traj.diagnostic_names.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::FormatError, "line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                              " fields, header has " + std::to_string(header.size()));
    }
    Vector x(static_cast<Eigen::Index>(dim)), d(static_cast<Eigen::Index>(ndiag));
    const double t = detail::parse_double(cells[0], lineno);
    for (std::size_t i = 0; i < dim; ++i) x[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[1 + i], lineno);
    for (std::size_t i = 0; i < ndiag; ++i) {
      d[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[1 + dim + i], lineno);
    }
    long iters = 0;
    const std::string_view it = cells[cells.size() - 2];
    const auto [ptr, ec] = std::from_chars(it.data(), it.data() + it.size(), iters);
    if (ec != std::errc() || ptr != it.data() + it.size()) {
      throw Error(ErrorKind::FormatError, "line " + std::to_string(lineno) + ": bad stage_iters");
    }
    traj.push_back(t, std::move(x), std::move(d), iters, detail::parse_double(cells.back(), lineno));
  }
  traj.validate();
  return traj;
}

inline Trajectory read_trajectory(const std::filesystem::path& path,
                                  const std::optional<std::vector<std::string>>& expected_diagnostics = {}) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoError, "no such file " + path.string());
  try {
    return trajectory_from_csv(detail::read_file(path), expected_diagnostics);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

// ---- JSON reports ----

inline Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

inline Json to_json(const SpectrumReport& rep) {
  Json eig = Json::array();
  for (const auto& l : rep.eigenvalues) eig.push_back(Json::array({l.real(), l.imag()}));
  Json j;
  j["matrix"] = to_json(rep.matrix);
  j["eigenvalues"] = std::move(eig);
  j["zero_count"] = rep.zero_count;
  j["elliptic"] = rep.elliptic;
  j["frequencies"] = rep.frequencies();
  j["resonance_search"] = {{"bound", rep.resonance_bound}};
  if (rep.resonance) {
    j["resonance_search"]["result"] = *rep.resonance;
  } else {
    j["resonance_search"]["result"] = nullptr;
    j["resonance_search"]["note"] = "none found up to bound";
  }
  return j;
}

inline Json to_json(const DriftStats& s) {
  return Json{{"name", s.name},           {"initial", s.initial}, {"max_abs", s.max_abs},
              {"max_rel", s.max_rel},     {"slope", s.slope},     {"slope_stderr", s.slope_stderr}};
}

inline Json to_json(const PeriodicOrbit& o) {
  return Json{{"anchor", to_json(o.anchor.values())}, {"period", o.period},     {"delta", o.delta},
              {"residual", o.residual},               {"energy", o.energy},     {"iterations", o.iterations}};
}

inline Json to_json(const TangentBasis& t) {
  return Json{{"u", to_json(t.u)}, {"v", to_json(t.v)}, {"frequency", t.frequency}};
}

/// Family records; parameter_name is "delta" or "eta".
inline Json to_json(const OrbitFamily& fam, const std::string& parameter_name) {
  Json members = Json::array();
  for (const auto& m : fam.members) {
    Json r{{parameter_name, m.parameter}};
    if (m.orbit) {
      r["orbit"] = to_json(*m.orbit);
    } else {
      r["orbit"] = nullptr;
      r["failure"] = m.failure;
    }
    members.push_back(std::move(r));
  }
  Json j{{"parameter", parameter_name}, {"complete", fam.complete()}, {"members", std::move(members)}};
  if (fam.tangent_at_singularity) j["tangent"] = to_json(*fam.tangent_at_singularity);
  return j;
}

/// CSV rows of (parameter, period, residual, energy, anchor...) for converged members.
inline std::string family_to_csv(const OrbitFamily& fam, const std::string& parameter_name) {
  std::string out = parameter_name + ",period,residual,energy";
  Eigen::Index dim = 0;
  for (const auto& m : fam.members) {
    if (m.orbit) {
      dim = m.orbit->anchor.size();
      break;
    }
  }
  for (Eigen::Index i = 0; i < dim; ++i) out += ",x" + std::to_string(i + 1);
  out += '\n';
  for (const auto& m : fam.members) {
    if (!m.orbit) continue;
    out += detail::format_double(m.parameter) + ',' + detail::format_double(m.orbit->period) + ',' +
           detail::format_double(m.orbit->residual) + ',' + detail::format_double(m.orbit->energy);
    for (Eigen::Index i = 0; i < dim; ++i) out += ',' + detail::format_double(m.orbit->anchor[i]);
    out += '\n';
  }
  return out;
}

inline void write_json(const Json& j, const std::filesystem::path& path) { detail::write_file(path, j.dump(2) + "\n"); }

inline Json read_json(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace lvp
