#pragma once

// Ground-state level structure of the NV center restricted to m_I in {1, 0}.
//
// Levels are labelled 1..6 as |m_S = +1, 0, -1> x |m_I = 1> (1, 2, 3) and
// |m_S = +1, 0, -1> x |m_I = 0> (4, 5, 6). Energies follow
//   H_NV / 2pi = D Sz^2 + w_e Sz + Q Iz^2 + w_n Iz + A Sz Iz
// with Zeeman splittings w_e = gamma_e * B and w_n = gamma_n * B.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "nhep/core.hpp"

namespace nhep {

struct NVConfig {
  double D_hz = 2.87e9;
  double Q_hz = -4.95e6;
  double A_hz = -2.16e6;
  double B_gauss = 500.0;
  // Not given by the experiment description; conventional values.
  double gamma_e_hz_per_gauss = 2.8025e6;
  double gamma_n_hz_per_gauss = 307.7;
};

/// Transition angular frequencies (rad/s), one ladder per nuclear manifold.
struct TransitionFrequencies {
  double w12 = 0, w23 = 0, w13 = 0;  // m_I = 1
  double w45 = 0, w56 = 0, w46 = 0;  // m_I = 0
};

struct NVLevels {
  NVConfig config;
  std::array<double, 6> energies_hz{};  // level energies, levels 1..6
  TransitionFrequencies omega;
};

inline double level_energy_hz(const NVConfig& c, int m_s, int m_i) {
  const double we = c.gamma_e_hz_per_gauss * c.B_gauss;
  const double wn = c.gamma_n_hz_per_gauss * c.B_gauss;
  return c.D_hz * m_s * m_s + we * m_s + c.Q_hz * m_i * m_i + wn * m_i + c.A_hz * m_s * m_i;
}

inline std::array<double, 6> level_energies_hz(const NVConfig& c) {
  return {level_energy_hz(c, 1, 1),  level_energy_hz(c, 0, 1), level_energy_hz(c, -1, 1),
          level_energy_hz(c, 1, 0),  level_energy_hz(c, 0, 0), level_energy_hz(c, -1, 0)};
}

/// Unvalidated |E_i - E_j| * 2pi for the six intra-manifold transitions.
inline TransitionFrequencies transition_frequencies(const NVConfig& c) {
  const auto e = level_energies_hz(c);
  auto w = [&](int i, int j) { return kTwoPi * std::abs(e[i - 1] - e[j - 1]); };
  return {w(1, 2), w(2, 3), w(1, 3), w(4, 5), w(5, 6), w(4, 6)};
}

/// In each three-level ladder the widest transition spans the other two.
inline double ladder_defect(const TransitionFrequencies& w) {
  auto defect = [](double a, double b, double c) {
    const double hi = std::max({a, b, c});
    return std::abs(hi - (a + b + c - hi));
  };
  return std::max(defect(w.w12, w.w23, w.w13), defect(w.w45, w.w56, w.w46));
}

inline NVLevels build_nv_levels(const NVConfig& config) {
  for (double v : {config.D_hz, config.Q_hz, config.A_hz, config.B_gauss, config.gamma_e_hz_per_gauss,
                   config.gamma_n_hz_per_gauss})
    if (!std::isfinite(v)) throw InvalidArgument("build_nv_levels: configuration values must be finite");

  NVLevels out;
  out.config = config;
  out.energies_hz = level_energies_hz(config);
  out.omega = transition_frequencies(config);
  const auto& w = out.omega;
  for (double f : {w.w12, w.w23, w.w13, w.w45, w.w56, w.w46}) {
    if (!(f > 0.0))
      throw NonPositiveTransition("build_nv_levels: transition frequency " + std::to_string(f) +
                                  " rad/s is not positive (degenerate levels)");
  }
  return out;
}

}  // namespace nhep
