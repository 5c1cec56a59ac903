#include <gtest/gtest.h>

#include <random>

#include "nhep/retrieval.hpp"

using namespace nhep;

TEST(FitSlope, ExactOnPolynomials) {
  std::vector<double> t, y, y3;
  for (int k = 0; k <= 20; ++k) {
    t.push_back(1e-6 * k);
    y.push_back(0.5 + 3e3 * t.back());
    y3.push_back(0.5 - 2e3 * t.back() + 4e8 * t.back() * t.back() - 1e14 * std::pow(t.back(), 3));
  }
  const auto f = fit_slope(t, y);
  EXPECT_EQ(f.degree, 1);
  EXPECT_NEAR(f.slope, 3e3, 1e-6);
  const auto g = fit_slope(t, y3);
  EXPECT_NEAR(g.slope, -2e3, 1e-3);
  EXPECT_GE(g.degree, 2);
}

TEST(FitSlope, WindowTooWideAndBadInput) {
  std::vector<double> t, y;
  for (int k = 0; k <= 40; ++k) {
    t.push_back(0.1 * k);
    y.push_back(0.5 + 0.3 * std::sin(5 * t.back()));
  }
  EXPECT_THROW(fit_slope(t, y), WindowTooWide);
  EXPECT_THROW(fit_slope({0, 1}, {0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(fit_slope({0, 1, 2}, {0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(fit_slope({0, 0, 0}, {0.5, 0.5, 0.5}), InvalidArgument);
}

TEST(FitSlope, NoisySigmaScales) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> n(0, 1e-3);
  std::vector<double> t, y;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(1e-8 * k);
    y.push_back(0.5 + 1e4 * t.back() + n(g));
  }
  const auto f = fit_slope(t, y, 0.5, 1e-3);
  EXPECT_NEAR(f.slope, 1e4, 5 * f.sigma);
  EXPECT_GT(f.sigma, 0.0);
}

TEST(Slopes, NuAndMuNoiseless) {
  const auto d = simulate_experiment({0.8, 0.2, 0.1, 0.05}, ExperimentConfig{}, ReadoutModel{});
  EXPECT_NEAR(estimate_nu(d.c_pt.times, d.c_pt.p0, d.s1).value, 0.05, 1e-4);
  EXPECT_NEAR(estimate_mu(d.c_psch.times, d.c_psch.p0, d.s2).value, 0.1, 1e-4);
  const auto z = simulate_experiment({0.8, 0.2, 0, 0}, ExperimentConfig{}, ReadoutModel{});
  EXPECT_NEAR(estimate_nu(z.c_pt.times, z.c_pt.p0, z.s1).value, 0.0, 1e-6);
  EXPECT_NEAR(estimate_mu(z.c_psch.times, z.c_psch.p0, z.s2).value, 0.0, 1e-6);
}

TEST(TraceFit, RecoversGammaH) {
  for (auto p : {ModelParams{1, 0, 0, 0}, ModelParams{1.06, -0.35, 0, 0}}) {
    const auto d = simulate_experiment(p, ExperimentConfig{}, ReadoutModel{});
    const auto f = fit_gamma_h(d.traces, 0, 0, d.s);
    EXPECT_NEAR(f.gamma.value, p.gamma, 1e-3);
    EXPECT_NEAR(f.h.value, p.h, 1e-3);
    EXPECT_GT(f.starts_converged, 0);
  }
}

TEST(TraceFit, InputChecks) {
  std::array<TraceData, 2> d;
  EXPECT_THROW(fit_gamma_h(d, 0, 0, 1.0), InvalidArgument);
  d[0] = {{0, 1e-6}, {1, 0.9}, {}};
  d[1] = {{0, 1e-6}, {1, 0.9}, {0.1, -0.1}};
  EXPECT_THROW(fit_gamma_h(d, 0, 0, 1.0), InvalidArgument);
}

TEST(Retrieval, ClosedLoop) {
  for (auto p : {ModelParams{0.5, 0.2, 0.1, 0.05}, ModelParams{1.06, 0.35, 0, 0}, ModelParams{0.96, 0, 0.2, 0.05}}) {
    const auto d = simulate_experiment(p, ExperimentConfig{}, ReadoutModel{});
    const auto r = retrieve_parameters(d);
    EXPECT_NEAR(r.gamma.value, p.gamma, 1e-3) << p.gamma;
    EXPECT_NEAR(r.h.value, p.h, 1e-3) << p.gamma;
    EXPECT_NEAR(r.mu.value, p.mu, 1e-3) << p.gamma;
    EXPECT_NEAR(r.nu.value, p.nu, 1e-3) << p.gamma;
  }
}

TEST(Simulate, NoiseIsSeeded) {
  ReadoutModel m;
  m.shot_noise = true;
  m.seed = 9;
  const auto a = simulate_experiment({1, 0, 0, 0}, ExperimentConfig{}, m);
  const auto b = simulate_experiment({1, 0, 0, 0}, ExperimentConfig{}, m);
  EXPECT_EQ(a.traces[0].p0, b.traces[0].p0);
  EXPECT_EQ(a.traces[0].sigma.size(), a.traces[0].p0.size());
  m.seed = 10;
  const auto c = simulate_experiment({1, 0, 0, 0}, ExperimentConfig{}, m);
  EXPECT_NE(a.traces[0].p0, c.traces[0].p0);
  // t = 0 of the first probe is P0 = 1 up to readout noise
  EXPECT_NEAR(a.traces[0].p0[0], 1.0, 5 * a.traces[0].sigma[0] + 1e-12);
}

TEST(MonteCarlo, ZeroSigmaGivesZeroSpread) {
  const std::array<ParamEstimate, 4> est{{{0.5, 0}, {0.2, 0}, {0.1, 0}, {0.05, 0}}};
  const auto st = eigenvalues_with_errors(est, 200, 1);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(st.re_std[k], 0.0);
    EXPECT_EQ(st.im_std[k], 0.0);
    EXPECT_NEAR(std::abs(st.mean[k] - st.nominal[k]), 0.0, 1e-12);
  }
  EXPECT_FALSE(st.degenerate);
}

TEST(MonteCarlo, DeterministicAndStable) {
  const std::array<ParamEstimate, 4> est{{{0.5, 0.01}, {0.2, 0.01}, {0.1, 0.002}, {0.05, 0.002}}};
  const auto a = eigenvalues_with_errors(est, 2000, 42);
  const auto b = eigenvalues_with_errors(est, 2000, 42);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(a.mean[k], b.mean[k]);
    EXPECT_EQ(a.re_std[k], b.re_std[k]);
  }
  const auto c = eigenvalues_with_errors(est, 4000, 42);
  for (int k = 0; k < 3; ++k) {
    const double sa = std::hypot(a.re_std[k], a.im_std[k]), sc = std::hypot(c.re_std[k], c.im_std[k]);
    EXPECT_NEAR(sa, sc, 0.1 * sc) << k;
    EXPECT_GT(sc, 0.0);
  }
}

TEST(MonteCarlo, FlagsDegenerateAtEP3) {
  const std::array<ParamEstimate, 4> est{{{1, 0.01}, {0, 0.01}, {0, 0.001}, {0, 0.001}}};
  EXPECT_TRUE(eigenvalues_with_errors(est, 500, 3).degenerate);
}

TEST(MonteCarlo, RejectsBadInput) {
  const std::array<ParamEstimate, 4> est{{{1, 0.01}, {0, 0.01}, {0, 0.001}, {0, 0.001}}};
  EXPECT_THROW(eigenvalues_with_errors(est, 99, 0), InvalidArgument);
  auto bad = est;
  bad[1].sigma = -1;
  EXPECT_THROW(eigenvalues_with_errors(bad, 200, 0), InvalidArgument);
}
