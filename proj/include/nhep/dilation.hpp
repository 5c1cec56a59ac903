#pragma once

// Hermitian dilation of e^{-iHt}: metric M(t), eta(t) = sqrt(M - I), the two
// Hermitian blocks driving the nuclear-spin sectors, their compilation into
// six pulse channels, and time-stepping of the dilated six-level state.
//
// Six-level basis: index 0..2 = |m_S = +1, 0, -1> x |1>, 3..5 = same x |0>.
// Ancilla states in (|1>, |0>) components:
//   |->  = (-i, 1) / sqrt2      |+> = (-1, i) / sqrt2

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nhep/core.hpp"
#include "nhep/dynamics.hpp"
#include "nhep/nv_levels.hpp"

namespace nhep {

using Mat6 = Eigen::Matrix<cplx, 6, 6>;
using Vec6 = Eigen::Matrix<cplx, 6, 1>;

inline constexpr double kDefaultEta0 = 0.5477225575051661;  // sqrt(0.3)

/// M(t) = e^{-iH^dag t} M0 e^{iHt}, M0 = m0_scale * I.  Hs carries the s scaling.
inline Mat3 metric_m(const Mat3& hs, double t, double m0_scale) {
  if (!(m0_scale > 1.0)) throw InvalidArgument("metric_m: M0 scale (eta0^2 + 1) must be > 1");
  const Mat3 u = Mat3((kI * hs * t).exp());
  Mat3 m = m0_scale * u.adjoint() * u;
  return 0.5 * (m + m.adjoint());
}

inline double min_eig_m_minus_i(const Mat3& hs, double t, double eta0) {
  const Mat3 a = metric_m(hs, t, eta0 * eta0 + 1.0) - Mat3::Identity();
  Eigen::SelfAdjointEigenSolver<Mat3> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct EtaResult {
  Mat3 eta;
  bool valid = false;
  double min_eigenvalue = 0.0;
};

inline EtaResult eta_checked(const Mat3& hs, double t, double eta0) {
  if (!(eta0 > 0.0)) throw InvalidArgument("eta: eta0 must be > 0");
  const Mat3 a = metric_m(hs, t, eta0 * eta0 + 1.0) - Mat3::Identity();
  Eigen::SelfAdjointEigenSolver<Mat3> es(a);
  const double lmin = es.eigenvalues().minCoeff();
  EtaResult r;
  r.min_eigenvalue = lmin;
  r.valid = lmin >= -1e-12;
  const Eigen::Vector3d l = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  r.eta = es.eigenvectors() * l.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  return r;
}

/// Principal square root of M(t) - I; MetricNotPositive outside the window.
inline Mat3 eta(const Mat3& hs, double t, double eta0) {
  auto r = eta_checked(hs, t, eta0);
  if (!r.valid) throw MetricNotPositive(t, r.min_eigenvalue);
  return r.eta;
}

/// Solves eta X + X eta = dM/dt in the eigenbasis of eta.
inline Mat3 eta_dot(const Mat3& hs, double t, double eta0) {
  const Mat3 e = eta(hs, t, eta0);
  const Mat3 m = metric_m(hs, t, eta0 * eta0 + 1.0);
  const Mat3 mdot = -kI * hs.adjoint() * m + kI * m * hs;
  Eigen::SelfAdjointEigenSolver<Mat3> es(e);
  const Mat3& v = es.eigenvectors();
  Mat3 x = v.adjoint() * mdot * v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double den = es.eigenvalues()(i) + es.eigenvalues()(j);
      if (den < 1e-12) throw IllConditioned("eta_dot: eigenvalues of eta sum to < 1e-12 (window edge)");
      x(i, j) /= den;
    }
  return v * x * v.adjoint();
}

struct DilationFrame {
  double t = 0.0;
  Mat3 M;
  Mat3 eta;
  Mat3 eta_dot;
  Mat3 Gamma;   // |1> sector
  Mat3 Lambda;  // |0> sector
  std::array<double, 6> d{};
  double hermiticity_residual = 0.0;  // relative to the largest block entry
};

/// Blocks for the dimensionless H scaled by s (rad/s), t in seconds.
inline DilationFrame dilated_blocks(const Mat3& h, double t, double eta0, double s) {
  if (!(s > 0.0)) throw InvalidArgument("dilated_blocks: s must be > 0");
  const Mat3 hs = s * h;
  DilationFrame f;
  f.t = t;
  f.M = metric_m(hs, t, eta0 * eta0 + 1.0);
  f.eta = eta(hs, t, eta0);
  f.eta_dot = eta_dot(hs, t, eta0);
  const Mat3 minv = f.M.inverse();
  const Mat3 lam_hat = (hs + (kI * f.eta_dot + f.eta * hs) * f.eta) * minv;
  const Mat3 gam_hat = kI * (hs * f.eta - f.eta * hs - kI * f.eta_dot) * minv;
  f.Gamma = lam_hat + gam_hat;
  f.Lambda = lam_hat - gam_hat;
  const double scale = std::max({1.0, max_abs(f.Gamma), max_abs(f.Lambda)});
  f.hermiticity_residual =
      std::max(max_abs(Mat3(f.Gamma - f.Gamma.adjoint())), max_abs(Mat3(f.Lambda - f.Lambda.adjoint()))) / scale;
  for (int k = 0; k < 3; ++k) {
    f.d[k] = f.Gamma(k, k).real();
    f.d[k + 3] = f.Lambda(k, k).real();
  }
  return f;
}

inline DilationFrame dilated_blocks(const NHMatrix& h, double t, double eta0, double s) {
  return dilated_blocks(h.matrix(), t, eta0, s);
}

inline Mat6 total_hamiltonian(const DilationFrame& f) {
  Mat6 h = Mat6::Zero();
  h.topLeftCorner<3, 3>() = 0.5 * (f.Gamma + f.Gamma.adjoint());
  h.bottomRightCorner<3, 3>() = 0.5 * (f.Lambda + f.Lambda.adjoint());
  return h;
}

/// First time in (0, tmax] where M(t) - I loses positivity, or +inf.
/// Scans `samples` points and bisects the first bracket.
inline double max_admissible_time(const Mat3& h, double s, double eta0, double tmax, int samples = 2000) {
  if (!(tmax > 0.0) || samples < 1) throw InvalidArgument("max_admissible_time: need tmax > 0 and samples >= 1");
  const Mat3 hs = s * h;
  auto ok = [&](double t) { return min_eig_m_minus_i(hs, t, eta0) >= -1e-12; };
  double lo = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const double t = tmax * k / samples;
    if (!ok(t)) {
      double hi = t;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
      }
      return hi;
    }
    lo = t;
  }
  return std::numeric_limits<double>::infinity();
}

// Pulse compilation

enum class Channel { MW1, MW2, MW3, MW4, EF1, EF2 };
inline constexpr std::array<Channel, 6> kChannels{Channel::MW1, Channel::MW2, Channel::MW3,
                                                  Channel::MW4, Channel::EF1, Channel::EF2};

inline const char* to_string(Channel c) {
  static constexpr const char* names[] = {"MW1", "MW2", "MW3", "MW4", "EF1", "EF2"};
  return names[static_cast<int>(c)];
}

struct ChannelSpec {
  bool gamma_block;  // Gamma (|1>) or Lambda (|0>)
  int row, col;      // 0-based element in the block
  double phase_sign; // element = pi * Omega * e^{sign * i phi}
  int lo, hi;        // level labels (1-based) of the driven transition
};

/// Element-to-channel map; the carrier is omega_{lo,hi} + d_hi - d_lo with
/// (lo, hi) ordered as listed.
inline ChannelSpec channel_spec(Channel c) {
  switch (c) {
    case Channel::MW2: return {true, 0, 1, -1.0, 1, 2};
    case Channel::MW1: return {true, 1, 2, +1.0, 3, 2};
    case Channel::EF1: return {true, 0, 2, -1.0, 1, 3};
    case Channel::MW4: return {false, 0, 1, -1.0, 4, 5};
    case Channel::MW3: return {false, 1, 2, +1.0, 6, 5};
    default: return {false, 0, 2, -1.0, 4, 6};  // EF2
  }
}

inline double transition_omega(const TransitionFrequencies& w, int a, int b) {
  const int lo = std::min(a, b), hi = std::max(a, b);
  if (lo == 1 && hi == 2) return w.w12;
  if (lo == 2 && hi == 3) return w.w23;
  if (lo == 1 && hi == 3) return w.w13;
  if (lo == 4 && hi == 5) return w.w45;
  if (lo == 5 && hi == 6) return w.w56;
  if (lo == 4 && hi == 6) return w.w46;
  throw InvalidArgument("transition_omega: not an intra-manifold transition");
}

struct ChannelTrace {
  std::vector<double> omega_amp_hz;  // Omega >= 0
  std::vector<double> phase_rad;     // unwrapped
  std::vector<double> carrier_rad_s;
};

struct PulseSchedule {
  std::vector<double> times;
  std::array<ChannelTrace, 6> channels;  // indexed by Channel
  std::vector<std::array<double, 6>> d;  // diagonal phases per sample
  double eta0 = kDefaultEta0;
  double s = 1.0;
  NVLevels nv;

  const ChannelTrace& operator[](Channel c) const { return channels[static_cast<int>(c)]; }
};

inline PulseSchedule pulse_schedule(const Mat3& h, const std::vector<double>& times, const NVLevels& nv, double eta0,
                                    double s) {
  if (times.empty()) throw InvalidArgument("pulse_schedule: empty time grid");
  PulseSchedule ps;
  ps.times = times;
  ps.eta0 = eta0;
  ps.s = s;
  ps.nv = nv;
  std::array<double, 6> last_phase{};
  for (double t : times) {
    const DilationFrame f = dilated_blocks(h, t, eta0, s);
    ps.d.push_back(f.d);
    const double scale = std::max({1.0, max_abs(f.Gamma), max_abs(f.Lambda)});
    for (Channel c : kChannels) {
      const auto sp = channel_spec(c);
      const int k = static_cast<int>(c);
      const cplx x = sp.gamma_block ? f.Gamma(sp.row, sp.col) : f.Lambda(sp.row, sp.col);
      const double amp = std::abs(x);
      double phi = last_phase[k];
      if (amp > 1e-14 * scale) {
        const double raw = sp.phase_sign * std::arg(x);
        phi = raw + kTwoPi * std::round((last_phase[k] - raw) / kTwoPi);
      }
      last_phase[k] = phi;
      auto& ch = ps.channels[k];
      ch.omega_amp_hz.push_back(amp / std::numbers::pi);
      ch.phase_rad.push_back(phi);
      ch.carrier_rad_s.push_back(transition_omega(nv.omega, sp.lo, sp.hi) + f.d[sp.hi - 1] - f.d[sp.lo - 1]);
    }
  }
  return ps;
}

struct ReconstructedBlocks {
  Mat3 Gamma;
  Mat3 Lambda;
  double carrier_defect = 0.0;  // rad/s, closing relation of each ladder
};

/// Rebuilds the rotating-frame blocks at sample k from amplitudes, phases and
/// carriers.  Only d1 and d4 are taken from the schedule; the other
/// diagonal entries come from carrier - omega_ij.
inline ReconstructedBlocks reconstruct_blocks(const PulseSchedule& ps, std::size_t k) {
  if (k >= ps.times.size()) throw InvalidArgument("reconstruct_blocks: sample index out of range");
  auto elem = [&](Channel c) {
    const auto sp = channel_spec(c);
    const auto& ch = ps[c];
    return std::numbers::pi * ch.omega_amp_hz[k] * std::exp(kI * (sp.phase_sign * ch.phase_rad[k]));
  };
  auto dd = [&](Channel c) {
    const auto sp = channel_spec(c);
    return ps[c].carrier_rad_s[k] - transition_omega(ps.nv.omega, sp.lo, sp.hi);
  };
  std::array<double, 6> d{};
  d[0] = ps.d[k][0];
  d[1] = d[0] + dd(Channel::MW2);
  d[2] = d[0] + dd(Channel::EF1);
  d[3] = ps.d[k][3];
  d[4] = d[3] + dd(Channel::MW4);
  d[5] = d[3] + dd(Channel::EF2);

  ReconstructedBlocks r;
  r.carrier_defect = std::max(std::abs(dd(Channel::MW1) - (d[1] - d[2])), std::abs(dd(Channel::MW3) - (d[4] - d[5])));
  auto fill = [&](Channel a, Channel b, Channel c, int off) {
    Mat3 m = Mat3::Zero();
    for (int i = 0; i < 3; ++i) m(i, i) = d[off + i];
    m(0, 1) = elem(a);
    m(1, 2) = elem(b);
    m(0, 2) = elem(c);
    m(1, 0) = std::conj(m(0, 1));
    m(2, 1) = std::conj(m(1, 2));
    m(2, 0) = std::conj(m(0, 2));
    return m;
  };
  r.Gamma = fill(Channel::MW2, Channel::MW1, Channel::EF1, 0);
  r.Lambda = fill(Channel::MW4, Channel::MW3, Channel::EF2, 3);
  return r;
}

// Dilated evolution

inline Vec6 embed(const Vec3& psi, const Mat3& eta_m) {
  const double r = 1.0 / std::numbers::sqrt2;
  const Vec3 ep = eta_m * psi;
  Vec6 out;
  out.head<3>() = (-kI * r) * psi + (-r) * ep;
  out.tail<3>() = r * psi + (kI * r) * ep;
  return out;
}

/// <-|Psi> and <+|Psi> on the electron space.
inline Vec3 project_minus(const Vec6& x) {
  return (kI * x.head<3>() + x.tail<3>()) / std::numbers::sqrt2;
}
inline Vec3 project_plus(const Vec6& x) { return (-x.head<3>() - kI * x.tail<3>()) / std::numbers::sqrt2; }

/// Unitary taking phi to |m_S = 0> (level 2) on the electron, and the ancilla
/// |-> to |1>, |+> to |0>.  Population of level 2 over levels 1..3 is then P0.
inline Mat6 measurement_unitary(const Vec3& phi) {
  Mat3 b = Mat3::Identity();
  b.col(0) = phi.normalized();
  Eigen::HouseholderQR<Mat3> qr(b);
  Mat3 q = qr.householderQ();
  // q.col(0) is phi up to phase; fix it exactly.
  const cplx ph = q.col(0).dot(phi.normalized());
  q.col(0) *= ph / std::abs(ph);
  Mat3 cols;
  cols.col(0) = q.col(1);
  cols.col(1) = q.col(0);
  cols.col(2) = q.col(2);
  const Mat3 w = cols.adjoint();  // w * phi = e2
  const double r = 1.0 / std::numbers::sqrt2;
  // rows: new |1>, new |0>; columns: old |1>, old |0>
  Eigen::Matrix2cd anc;
  anc << cplx(0, r), cplx(r, 0), cplx(-r, 0), cplx(0, -r);
  Mat6 u;
  for (int a = 0; a < 2; ++a)
    for (int b2 = 0; b2 < 2; ++b2) u.block<3, 3>(3 * a, 3 * b2) = anc(a, b2) * w;
  return u;
}

struct DilatedTrace {
  std::vector<double> times;
  std::vector<Vec6> states;
  std::vector<double> norm;
  std::vector<std::array<double, 6>> populations;  // after the measurement unitary
  std::vector<double> p0;
  std::vector<Vec3> plus_component;  // sqrt(1 + eta0^2) <+|Psi>
  double max_hermiticity_residual = 0.0;
  double step = 0.0;
};

struct DilatedEvolution {
  DilatedTrace dilated;
  EvolutionTrace projected;
};

namespace detail {

inline Mat6 step_propagator(const Mat3& h, double t_mid, double dt, double eta0, double s, double* herm) {
  const DilationFrame f = dilated_blocks(h, t_mid, eta0, s);
  if (herm) *herm = std::max(*herm, f.hermiticity_residual);
  Eigen::SelfAdjointEigenSolver<Mat6> es(total_hamiltonian(f));
  const Eigen::Matrix<cplx, 6, 1> ph = (-kI * dt * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

inline std::vector<Vec6> integrate(const Mat3& h, const Vec6& x0, const std::vector<double>& times, double step,
                                   double eta0, double s, double* herm) {
  std::vector<Vec6> out{x0};
  Vec6 x = x0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const int n = std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
    const double dt = span / n;
    for (int j = 0; j < n; ++j) x = step_propagator(h, times[k - 1] + (j + 0.5) * dt, dt, eta0, s, herm) * x;
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Integrates i d/dt Psi = H_tot(t) Psi with exponential-midpoint steps of at
/// most `step` seconds, then repeats with step/2 and compares endpoints.
/// H is dimensionless; the generator is s * H.
inline DilatedEvolution evolve_dilated(const Mat3& h, double s, const Vec3& psi0, const Vec3& phi, double eta0,
                                       const std::vector<double>& times, double step) {
  require_unit(psi0, "evolve_dilated: psi0");
  require_unit(phi, "evolve_dilated: phi");
  if (!(s > 0.0)) throw InvalidArgument("evolve_dilated: s must be > 0");
  if (!(eta0 > 0.0)) throw InvalidArgument("evolve_dilated: eta0 must be > 0");
  if (times.empty() || times.front() != 0.0) throw InvalidArgument("evolve_dilated: grid must start at t=0");
  double spacing = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw InvalidArgument("evolve_dilated: grid must be increasing");
    spacing = std::min(spacing, times[k] - times[k - 1]);
  }
  if (!(step > 0.0) || (times.size() > 1 && step > spacing * (1 + 1e-12)))
    throw InvalidArgument("evolve_dilated: need 0 < step <= grid spacing");

  // Fail fast on the dilation window.
  const Mat3 hs = s * h;
  double prev_ok = 0.0;
  for (double t : times) {
    const double lmin = min_eig_m_minus_i(hs, t, eta0);
    if (lmin < -1e-12) {
      double lo = prev_ok, hi = t;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (min_eig_m_minus_i(hs, mid, eta0) >= -1e-12 ? lo : hi) = mid;
      }
      throw MetricNotPositive(hi, lmin);
    }
    prev_ok = t;
  }

  const double norm0 = std::sqrt(1.0 + eta0 * eta0);
  const Vec6 x0 = embed(psi0, eta0 * Mat3::Identity()) / norm0;
  double herm = 0.0;
  const auto coarse = detail::integrate(h, x0, times, step, eta0, s, nullptr);
  const auto fine = detail::integrate(h, x0, times, step / 2, eta0, s, &herm);
  const double diff = (coarse.back() - fine.back()).norm() / fine.back().norm();
  if (diff > 1e-6)
    throw StepTooCoarse("evolve_dilated: halving the step changed the endpoint by " + std::to_string(diff) +
                        "; reduce --step");

  const Mat6 um = measurement_unitary(phi);
  DilatedEvolution out;
  auto& d = out.dilated;
  d.times = times;
  d.step = step / 2;
  d.max_hermiticity_residual = herm;
  auto& pr = out.projected;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Vec6& x = fine[k];
    d.states.push_back(x);
    d.norm.push_back(x.norm());
    const Vec6 y = um * x;
    std::array<double, 6> pop{};
    for (int i = 0; i < 6; ++i) pop[i] = std::norm(y(i));
    d.populations.push_back(pop);
    d.p0.push_back(pop[1] / (pop[0] + pop[1] + pop[2]));
    d.plus_component.push_back(norm0 * project_plus(x));

    const Vec3 sys = norm0 * project_minus(x);
    pr.times.push_back(times[k]);
    pr.raw_states.push_back(sys);
    pr.norm.push_back(sys.squaredNorm());
    pr.p0.push_back(std::clamp(std::norm(phi.dot(sys)) / sys.squaredNorm(), 0.0, 1.0));
  }
  return out;
}

}  // namespace nhep
