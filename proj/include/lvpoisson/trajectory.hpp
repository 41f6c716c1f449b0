#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "lvpoisson/system.hpp"

namespace lvp {

/// Iterates with per-row diagnostics. Diagnostic columns are named (H, C1..Ck, then
/// declared first integrals); stage columns are zero for non-implicit integrators.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<std::string> diagnostic_names;
  std::vector<Vector> diagnostics;
  std::vector<long> stage_iterations;
  std::vector<double> stage_residuals;

  std::size_t size() const noexcept { return times.size(); }
  bool empty() const noexcept { return times.empty(); }
  Eigen::Index dim() const noexcept { return states.empty() ? 0 : states.front().size(); }

  std::size_t column_index(const std::string& name) const {
    const auto it = std::find(diagnostic_names.begin(), diagnostic_names.end(), name);
    if (it == diagnostic_names.end()) throw Error(ErrorKind::NotFound, "no diagnostic column '" + name + "'");
    return static_cast<std::size_t>(it - diagnostic_names.begin());
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(size());
    for (const auto& row : diagnostics) out.push_back(row[static_cast<Eigen::Index>(c)]);
    return out;
  }

  /// Column names of the form C<k>.
  std::vector<std::string> casimir_names() const {
    std::vector<std::string> out;
    for (const auto& n : diagnostic_names) {
      if (n.size() > 1 && n[0] == 'C' && std::all_of(n.begin() + 1, n.end(), ::isdigit)) out.push_back(n);
    }
    return out;
  }

  void push_back(double t, Vector x, Vector diag, long iterations = 0, double residual = 0.0) {
    times.push_back(t);
    states.push_back(std::move(x));
    diagnostics.push_back(std::move(diag));
    stage_iterations.push_back(iterations);
    stage_residuals.push_back(residual);
  }

  /// Lengths agree, dimensions agree, times strictly increasing with uniform spacing.
  void validate() const {
    const std::size_t n = size();
    if (states.size() != n || diagnostics.size() != n || stage_iterations.size() != n ||
        stage_residuals.size() != n) {
      throw Error(ErrorKind::FormatError, "trajectory columns have different lengths");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (states[i].size() != dim()) throw Error(ErrorKind::FormatError, "state dimension changes along trajectory");
      if (diagnostics[i].size() != static_cast<Eigen::Index>(diagnostic_names.size())) {
        throw Error(ErrorKind::FormatError, "diagnostic row width does not match column names");
      }
    }
    if (n < 2) return;
    const double h = times[1] - times[0];
    if (!(h > 0.0)) throw Error(ErrorKind::FormatError, "times are not strictly increasing");
    for (std::size_t i = 1; i < n; ++i) {
      const double step = times[i] - times[i - 1];
      if (!(step > 0.0)) throw Error(ErrorKind::FormatError, "times are not strictly increasing");
      if (std::abs(step - h) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
        throw Error(ErrorKind::FormatError, "time spacing is not uniform");
      }
    }
  }
};

}  // namespace lvp
