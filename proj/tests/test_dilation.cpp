#include <gtest/gtest.h>

#include "nhep/dilation.hpp"
#include "oracles.hpp"

using namespace nhep;

namespace {

const double kS = kTwoPi * 40e3;
const double kEta0 = std::sqrt(0.3);

Mat3 H(double g, double h = 0, double mu = 0, double nu = 0) { return build_hamiltonian({g, h, mu, nu}).matrix(); }

std::vector<double> grid(double tmax, int n) {
  std::vector<double> t;
  for (int k = 0; k <= n; ++k) t.push_back(tmax * k / n);
  return t;
}

}  // namespace

TEST(Metric, InitialAndHermitian) {
  const Mat3 m0 = metric_m(kS * H(0.5), 0.0, 1.3);
  EXPECT_LT(max_abs(Mat3(m0 - 1.3 * Mat3::Identity())), 1e-15);
  for (double t : {1e-7, 1e-6, 1e-5}) {
    const Mat3 m = metric_m(kS * H(0, 0.4), t, 1.3);
    EXPECT_LT(max_abs(Mat3(m - 1.3 * Mat3::Identity())), 1e-12);
  }
  EXPECT_THROW(metric_m(H(1), 0.0, 1.0), InvalidArgument);
}

TEST(Metric, BrokenPhaseCrossesAtOracleTime) {
  const Mat3 hs = kS * H(1.5);
  double prev = min_eig_m_minus_i(hs, 0.0, kEta0);
  EXPECT_NEAR(prev, 0.3, 1e-12);
  // monotone decrease over the first microsecond
  for (double t = 0.05e-6; t < 0.4e-6; t += 0.05e-6) {
    const double v = min_eig_m_minus_i(hs, t, kEta0);
    EXPECT_LT(v, prev);
    prev = v;
  }
  const double t_star = oracle::dilation_window(oracle::hamiltonian(1.5, 0, 0, 0) * kS, 1.3, 30e-6);
  ASSERT_TRUE(std::isfinite(t_star));
  EXPECT_NEAR(max_admissible_time(H(1.5), kS, kEta0, 30e-6), t_star, 1e-6 * t_star);
  EXPECT_THROW(eta(hs, 1.01 * t_star, kEta0), MetricNotPositive);
  EXPECT_NO_THROW(eta(hs, 0.99 * t_star, kEta0));
}

TEST(Eta, ScalarCases) {
  EXPECT_LT(max_abs(Mat3(eta(kS * H(0.7), 0.0, kEta0) - kEta0 * Mat3::Identity())), 1e-14);
  EXPECT_LT(max_abs(Mat3(eta(kS * H(0, 0.5), 3e-6, kEta0) - kEta0 * Mat3::Identity())), 1e-12);
  EXPECT_LT(max_abs(eta_dot(kS * H(0, 0.5), 3e-6, kEta0)) / kS, 1e-12);
  EXPECT_THROW(eta_checked(H(1), 0.0, 0.0), InvalidArgument);
}

TEST(Eta, SquareRootOfMetric) {
  const Mat3 hs = kS * H(0.5, 0.2, 0.1, 0.05);
  const double t = 0.3e-6;
  const Mat3 e = eta(hs, t, kEta0);
  EXPECT_LT(max_abs(Mat3(e * e - (metric_m(hs, t, 1.3) - Mat3::Identity()))), 1e-12);
  EXPECT_LT(max_abs(Mat3(e - e.adjoint())), 1e-13);
}

TEST(EtaDot, FirstOrderAtZero) {
  const Mat3 hs = kS * H(0.5, 0.3, 0.1, 0.05);
  const Mat3 m0 = 1.3 * Mat3::Identity();
  const Mat3 mdot = -kI * hs.adjoint() * m0 + kI * m0 * hs;
  EXPECT_LT(max_abs(Mat3(eta_dot(hs, 0.0, kEta0) - mdot / (2 * kEta0))) / kS, 1e-12);
}

TEST(EtaDot, FiniteDifferenceOracle) {
  for (double g : {0.5, 1.0, 1.2}) {
    const Mat3 hs = kS * H(g, 0.2, 0.05, 0.02);
    const double tw = max_admissible_time(H(g, 0.2, 0.05, 0.02), kS, kEta0, 30e-6);
    for (double frac : {0.1, 0.4, 0.7}) {
      const double t = std::max(frac * std::min(tw, 20e-6), 3e-3 / kS);
      // five-point stencil: near the window edge eta'' grows fast enough that
      // the plain central difference sits at ~1e-6
      const double dt = 1e-3 / kS;
      auto e = [&](double x) { return oracle::M3(eta(hs, x, kEta0)); };
      const Mat3 fd = (8.0 * (e(t + dt) - e(t - dt)) - (e(t + 2 * dt) - e(t - 2 * dt))) / (12.0 * dt);
      EXPECT_LT(max_abs(Mat3(fd - oracle::central_diff(e, t, dt / 10))) / kS, 1e-5);
      EXPECT_LT(max_abs(Mat3(eta_dot(hs, t, kEta0) - fd)) / kS, 1e-6) << g << " " << t;
    }
  }
}

TEST(Blocks, HermitianLimitDegenerates) {
  const auto f = dilated_blocks(H(0, 0.4), 2e-6, kEta0, kS);
  EXPECT_LT(max_abs(Mat3(f.Gamma - kS * H(0, 0.4))) / kS, 1e-12);
  EXPECT_LT(max_abs(Mat3(f.Lambda - kS * H(0, 0.4))) / kS, 1e-12);
}

TEST(Blocks, HermitianOnValidFrames) {
  for (double g : {0.3, 0.5, 1.0, 1.06})
    for (double frac : {0.0, 0.3, 0.8}) {
      const double tw = max_admissible_time(H(g, 0.35), kS, kEta0, 30e-6);
      const auto f = dilated_blocks(H(g, 0.35), frac * std::min(tw, 30e-6), kEta0, kS);
      EXPECT_LT(f.hermiticity_residual, 1e-10);
    }
}

TEST(Blocks, ReproduceNonHermitianGenerator) {
  // at t = 0 eta is scalar, so the half-sum and half-difference of the blocks
  // have a closed form in H and eta_dot
  const Mat3 h = H(0.5, 0.2, 0.1, 0.05);
  const auto f = dilated_blocks(h, 0.0, kEta0, kS);
  const Mat3 lam_hat = 0.5 * (f.Gamma + f.Lambda), gam_hat = 0.5 * (f.Gamma - f.Lambda);
  // with eta = eta0 I: Lambda-hat (1 + eta0^2) = sH + i eta_dot eta0 + eta0^2 sH
  const Mat3 hs = kS * h;
  const Mat3 ed = eta_dot(hs, 0.0, kEta0);
  EXPECT_LT(max_abs(Mat3(lam_hat * 1.3 - (hs + kI * ed * kEta0 + 0.3 * hs))) / kS, 1e-12);
  EXPECT_LT(max_abs(Mat3(gam_hat * 1.3 - kI * (-kI * ed))) / kS, 1e-12);
}

TEST(Pulses, CarrierRelationsAndReconstruction) {
  const auto nv = build_nv_levels(NVConfig{});
  const Mat3 h = H(0.5);
  const auto ps = pulse_schedule(h, grid(0.9e-6, 30), nv, kEta0, kS);
  for (std::size_t k = 0; k < ps.times.size(); ++k) {
    const auto& d = ps.d[k];
    const auto& w = nv.omega;
    EXPECT_NEAR(ps[Channel::MW2].carrier_rad_s[k], w.w12 + d[1] - d[0], 1e-5);
    EXPECT_NEAR(ps[Channel::MW1].carrier_rad_s[k], w.w23 + d[1] - d[2], 1e-5);
    EXPECT_NEAR(ps[Channel::EF1].carrier_rad_s[k], w.w13 + d[2] - d[0], 1e-5);
    EXPECT_NEAR(ps[Channel::MW4].carrier_rad_s[k], w.w45 + d[4] - d[3], 1e-5);
    EXPECT_NEAR(ps[Channel::MW3].carrier_rad_s[k], w.w56 + d[4] - d[5], 1e-5);
    EXPECT_NEAR(ps[Channel::EF2].carrier_rad_s[k], w.w46 + d[5] - d[3], 1e-5);
    for (Channel c : kChannels) EXPECT_GE(ps[c].omega_amp_hz[k], 0.0);
    // blocks rebuilt from amplitudes, phases and carriers; relative to the
    // block scale, absolute error limited by carriers of ~1e10 rad/s
    const auto r = reconstruct_blocks(ps, k);
    const Mat6 tot = total_hamiltonian(dilated_blocks(h, ps.times[k], kEta0, kS));
    EXPECT_LT(max_abs(Mat3(r.Gamma - tot.topLeftCorner<3, 3>())) / kS, 1e-9);
    EXPECT_LT(max_abs(Mat3(r.Lambda - tot.bottomRightCorner<3, 3>())) / kS, 1e-9);
  }
}

TEST(Pulses, PhaseContinuity) {
  const auto nv = build_nv_levels(NVConfig{});
  const auto ps = pulse_schedule(H(1.0), grid(0.45e-6, 200), nv, kEta0, kS);
  for (Channel c : kChannels)
    for (std::size_t k = 1; k < ps.times.size(); ++k)
      EXPECT_LT(std::abs(ps[c].phase_rad[k] - ps[c].phase_rad[k - 1]), std::numbers::pi) << to_string(c);
}

TEST(Pulses, ZeroElementHasZeroAmplitude) {
  // Hermitian H: Gamma = sH has no EF1 (0,2) element
  const auto nv = build_nv_levels(NVConfig{});
  const auto ps = pulse_schedule(H(0, 0.3), grid(1e-6, 5), nv, kEta0, kS);
  for (std::size_t k = 0; k < ps.times.size(); ++k) {
    EXPECT_LT(ps[Channel::EF1].omega_amp_hz[k], 1e-10 * kS);
  }
  EXPECT_THROW(pulse_schedule(H(0.5), {}, nv, kEta0, kS), InvalidArgument);
}

TEST(Pulses, FirstSampleFrozen) {
  // gamma = 0.5 at t = 0: eta_dot is diagonal, so the (0,1) element of Gamma is s/sqrt2
  const auto nv = build_nv_levels(NVConfig{});
  const auto ps = pulse_schedule(H(0.5), {0.0}, nv, kEta0, kS);
  const auto f = dilated_blocks(H(0.5), 0.0, kEta0, kS);
  EXPECT_NEAR(ps[Channel::MW2].omega_amp_hz[0], std::abs(f.Gamma(0, 1)) / std::numbers::pi, 1e-9);
  EXPECT_NEAR(ps[Channel::MW2].omega_amp_hz[0], kS / std::sqrt(2.0) / std::numbers::pi, 1e-6 * kS);
}

TEST(Dilated, EquivalenceAndNorm) {
  const Vec3 psi(0, 1, 0);
  for (double g : {0.5, 1.0}) {
    const double tw = max_admissible_time(H(g), kS, kEta0, 30e-6);
    const double tend = 0.9 * tw;
    const auto t = grid(tend, 60);
    const auto r = evolve_dilated(H(g), kS, psi, psi, kEta0, t, tend / 600);
    const auto direct = population_trace(Mat3(kS * H(g)), psi, psi, t);
    for (std::size_t k = 0; k < t.size(); ++k) {
      EXPECT_NEAR(r.dilated.norm[k], 1.0, 1e-8);
      const oracle::V3 o = oracle::expm_taylor(oracle::hamiltonian(g, 0, 0, 0) * kS, t[k]) * psi;
      EXPECT_LT((r.projected.raw_states[k] - o).norm() / o.norm(), 1e-6);
      EXPECT_NEAR(r.dilated.p0[k], direct.p0[k], 1e-6);
      EXPECT_NEAR(r.projected.p0[k], direct.p0[k], 1e-6);
      // ancilla-weight identity: <+|Psi> = eta <-|Psi>
      const Mat3 e = eta(Mat3(kS * H(g)), t[k], kEta0);
      EXPECT_LT((r.dilated.plus_component[k] - e * r.projected.raw_states[k]).norm(), 1e-6);
    }
    EXPECT_LT((r.projected.raw_states[0] - psi).norm(), 1e-14);
  }
}

TEST(Dilated, WindowAndInputErrors) {
  const Vec3 psi(0, 1, 0);
  const auto t = grid(30e-6, 300);
  try {
    evolve_dilated(H(0.5), kS, psi, psi, kEta0, t, 1e-7);
    FAIL() << "expected MetricNotPositive";
  } catch (const MetricNotPositive& e) {
    const double ref = oracle::dilation_window(oracle::hamiltonian(0.5, 0, 0, 0) * kS, 1.3, 30e-6);
    EXPECT_NEAR(e.time, ref, 1e-6 * ref);
    EXPECT_LT(e.min_eigenvalue, 0.0);
  }
  EXPECT_THROW(evolve_dilated(H(0.5), kS, Vec3(1, 1, 0), psi, kEta0, grid(1e-7, 2), 1e-8), InvalidArgument);
  EXPECT_THROW(evolve_dilated(H(0.5), kS, psi, psi, kEta0, grid(1e-7, 2), 1e-7), InvalidArgument);
  EXPECT_THROW(evolve_dilated(H(0.5), kS, psi, psi, kEta0, {1e-8, 2e-8}, 1e-9), InvalidArgument);
}

TEST(Dilated, StepTooCoarse) {
  const Vec3 psi(0, 1, 0);
  EXPECT_THROW(evolve_dilated(H(0.5), kS, psi, psi, kEta0, {0.0, 0.9e-6}, 0.9e-6), StepTooCoarse);
}

TEST(Dilated, MeasurementUnitary) {
  const Vec3 phi = Vec3(cplx(1, 0), cplx(1, 0), 0).normalized();
  const Mat6 u = measurement_unitary(phi);
  EXPECT_LT(max_abs(Mat6(u * u.adjoint() - Mat6::Identity())), 1e-14);
  // |phi> (x) |-> goes to level 2
  Vec6 x = embed(phi, Mat3::Zero());
  const Vec6 y = u * x;
  EXPECT_NEAR(std::norm(y(1)), 1.0, 1e-14);
}
