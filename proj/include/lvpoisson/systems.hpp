#pragma once

// Lotka-Volterra systems used throughout the experiments.

#include "lvpoisson/system.hpp"

namespace lvp::systems {

/// Two uncoupled integrable blocks, (x1, x2) and (x3, x4, x5), with q = (1, ..., 1).
/// eps is taken as -A q so that q is a fixed point.
inline Matrix integrable_5d_interaction() {
  Matrix a(5, 5);
  a << 0, 1, 0, 0, 0,
      -1, 0, 0, 0, 0,
       0, 0, 0, 1, 1,
       0, 0, -1, 0, 0,
       0, 0, -1, 0, 0;
  return a;
}

inline LVSystem integrable_5d() {
  const Matrix a = integrable_5d_interaction();
  const Vector q = Vector::Ones(5);
  return build_system(a, -a * q, q);
}

/// I1 = x1 + x2 - log x1 - log x2 and I2 = x3 + x4 + x5 - log x3 - log x4 - log x5.
inline std::vector<FirstIntegral> integrable_5d_first_integrals() {
  Vector lin1(5), log1(5), lin2(5), log2(5);
  lin1 << 1, 1, 0, 0, 0;
  log1 << -1, -1, 0, 0, 0;
  lin2 << 0, 0, 1, 1, 1;
  log2 << 0, 0, -1, -1, -1;
  return {{"I1", lin1, log1}, {"I2", lin2, log2}};
}

inline Matrix delta_system_interaction(double delta) {
  Matrix a(5, 5);
  a << 0, -1, -1, 0, 0,
       1, 0, 1, delta, 0,
       1, -1, 0, 0, 0,
       0, -delta, 0, 0, 1,
       0, 0, 0, -1, 0;
  return a;
}

inline Vector delta_system_environment(double delta) {
  Vector eps(5);
  eps << 2, -2, delta, -1, 1;
  return eps;
}

/// q_delta = (1 - delta, 1, 1, 1, 1 + delta).
inline Vector delta_system_fixed_point(double delta) {
  Vector q(5);
  q << 1 - delta, 1, 1, 1, 1 + delta;
  return q;
}

/// The non-integrable perturbation family; integrable at delta = 0.
inline LVSystem delta_system(double delta) {
  return build_system(delta_system_interaction(delta), delta_system_environment(delta),
                      delta_system_fixed_point(delta));
}

/// H_delta written with unit log-coefficients: sum (x_i - log x_i) + delta log(x1 / x5).
inline double delta_system_hamiltonian(double delta, const State& x) {
  const Vector& v = x.values();
  return (v - x.log()).sum() + delta * std::log(v[0] / v[4]);
}

/// diag(1, 1, 1, 1, 1 + delta) A_delta. This is the linearization at q_delta except that
/// row 1 is not scaled by q_1 = 1 - delta. Its characteristic polynomial is
/// lambda (lambda^4 + (delta^2 + delta + 4) lambda^2 + (delta^2 + 3 delta + 3)).
inline Matrix delta_system_model_matrix(double delta) {
  Matrix m(5, 5);
  m << 0, -1, -1, 0, 0,
       1, 0, 1, delta, 0,
       1, -1, 0, 0, 0,
       0, -delta, 0, 0, 1,
       0, 0, 0, -1 - delta, 0;
  return m;
}

/// x1' = x1 (-1 + x2), x2' = x2 (1 - x1); fixed point (1, 1).
inline LVSystem predator_prey_2d() {
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  Vector eps(2);
  eps << -1, 1;
  return build_system(a, eps);
}

}  // namespace lvp::systems
