#pragma once

// Parameter retrieval: initial slopes of the conserved quantities give
// (mu, nu); a simultaneous fit of two population traces gives (gamma, h);
// Monte-Carlo sampling turns the four error bars into eigenvalue error bars.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nhep/core.hpp"
#include "nhep/dynamics.hpp"
#include "nhep/polynomial.hpp"
#include "nhep/readout.hpp"

namespace nhep {

struct ParamEstimate {
  double value = 0.0;
  double sigma = 0.0;
  std::string method = "linear_slope";
};

// Slope fits

struct SlopeFit {
  double slope = 0.0;
  double sigma = 0.0;
  int degree = 1;        // polynomial order that was needed
  double rms_residual = 0.0;
};

/// Model-truncation floor used when no noise level is given.
inline constexpr double kSlopeFloor = 1e-6;

/// Small-t window for the slope fits.
inline double slope_window(double s, double gamma) { return 0.1 / (s * std::max(1.0, std::abs(gamma))); }

/// Fits y - intercept = a1 t + a2 t^2 + a3 t^3 (intercept fixed), using the
/// lowest order whose RMS residual stays within 3x the noise floor.
/// `noise_sigma` is the per-sample standard deviation (0 = noiseless).
inline SlopeFit fit_slope(const std::vector<double>& t, const std::vector<double>& y, double intercept = 0.5,
                          double noise_sigma = 0.0) {
  if (t.size() != y.size()) throw InvalidArgument("fit_slope: t and y differ in length");
  if (t.size() < 3) throw InvalidArgument("fit_slope: need at least 3 samples");
  for (std::size_t k = 0; k < t.size(); ++k)
    if (!std::isfinite(t[k]) || !std::isfinite(y[k])) throw InvalidArgument("fit_slope: samples must be finite");
  const auto n = static_cast<Eigen::Index>(t.size());
  const double tmax = *std::max_element(t.begin(), t.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (tmax == 0.0) throw InvalidArgument("fit_slope: all samples at t = 0");
  const double floor = noise_sigma > 0.0 ? noise_sigma : kSlopeFloor;

  Eigen::VectorXd b(n);
  for (Eigen::Index k = 0; k < n; ++k) b(k) = y[static_cast<std::size_t>(k)] - intercept;
  SlopeFit best;
  const int max_deg = static_cast<int>(std::min<Eigen::Index>(3, n - 1));
  for (int deg = 1; deg <= max_deg; ++deg) {
    // Columns scaled by tmax for conditioning.
    Eigen::MatrixXd a(n, deg);
    for (Eigen::Index k = 0; k < n; ++k)
      for (int j = 0; j < deg; ++j) a(k, j) = std::pow(t[static_cast<std::size_t>(k)] / tmax, j + 1);
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd r = a * c - b;
    const double ssr = r.squaredNorm();
    const double rms = std::sqrt(ssr / static_cast<double>(n));
    const double dof = static_cast<double>(n - deg);
    const double s2 = noise_sigma > 0.0 ? noise_sigma * noise_sigma : (dof > 0 ? ssr / dof : 0.0);
    const Eigen::MatrixXd cov = s2 * (a.transpose() * a).inverse();
    best = {c(0) / tmax, std::sqrt(std::max(cov(0, 0), 0.0)) / std::abs(tmax), deg, rms};
    if (rms <= 3.0 * floor) return best;
  }
  throw WindowTooWide("fit_slope: RMS residual " + std::to_string(best.rms_residual) +
                      " of the cubic model exceeds 3x the noise floor; shrink the fit window");
}

inline ParamEstimate estimate_nu(const std::vector<double>& t, const std::vector<double>& c_pt, double s1,
                                 double noise_sigma = 0.0) {
  const auto f = fit_slope(t, c_pt, 0.5, noise_sigma);
  return {f.slope / s1, f.sigma / s1, "linear_slope"};
}

inline ParamEstimate estimate_mu(const std::vector<double>& t, const std::vector<double>& c_psch, double s2,
                                 double noise_sigma = 0.0) {
  const auto f = fit_slope(t, c_psch, 0.5, noise_sigma);
  return {f.slope / (2.0 * s2), f.sigma / (2.0 * s2), "linear_slope"};
}

// Trace fit

/// The two (initial state, measurement basis) pairs used for the (gamma, h) fit.
inline std::array<ProbePair, 2> trace_probes() {
  const double r = 1.0 / std::numbers::sqrt2;
  return {ProbePair{Vec3(0, 1, 0), Vec3(0, 1, 0)}, ProbePair{Vec3(-kI * r, r, 0), Vec3(r, r, 0)}};
}

/// A measured P0 series; sigma empty means uniform weights.
struct TraceData {
  std::vector<double> times;  // s
  std::vector<double> p0;
  std::vector<double> sigma;
};

struct GammaHFit {
  ParamEstimate gamma{0.0, 0.0, "trace_fit"};
  ParamEstimate h{0.0, 0.0, "trace_fit"};
  double ssr = 0.0;
  int starts_converged = 0;
};

namespace detail {

inline std::vector<double> trace_residuals(const std::array<TraceData, 2>& data, double gamma, double h, double mu,
                                           double nu, double s) {
  const auto probes = trace_probes();
  const Mat3 hs = s * build_hamiltonian({gamma, h, mu, nu}).matrix();
  std::vector<double> r;
  for (int k = 0; k < 2; ++k) {
    const auto tr = population_trace(hs, probes[k].psi, probes[k].phi, data[k].times);
    for (std::size_t j = 0; j < tr.p0.size(); ++j) {
      const double w = data[k].sigma.empty() ? 1.0 : 1.0 / data[k].sigma[j];
      r.push_back(w * (tr.p0[j] - data[k].p0[j]));
    }
  }
  return r;
}

struct NMContext {
  std::function<double(double, double)> f;
};

inline double nm_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NMContext*>(params);
  return ctx->f(gsl_vector_get(x, 0), gsl_vector_get(x, 1));
}

struct NMResult {
  double x0, x1, fval;
  bool converged;
};

inline NMResult nelder_mead(NMContext& ctx, double x0, double x1, double step, int max_iter, double size_tol) {
  gsl_multimin_function fn{&nm_objective, 2, &ctx};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* ss = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, x0);
  gsl_vector_set(x, 1, x1);
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(m, &fn, x, ss);
  bool conv = false;
  for (int it = 0; it < max_iter; ++it) {
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), size_tol) == GSL_SUCCESS) {
      conv = true;
      break;
    }
  }
  NMResult r{gsl_vector_get(m->x, 0), gsl_vector_get(m->x, 1), m->fval, conv};
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return r;
}

}  // namespace detail

/// Least-squares (gamma, h) with (mu, nu) fixed.  Nelder-Mead from a 3x3
/// grid of starts spaced `spread` around `init`; covariance from the
/// residual Jacobian, sigma^2 = SSR / (N - 2).
inline GammaHFit fit_gamma_h(const std::array<TraceData, 2>& data, double mu_hat, double nu_hat, double s,
                             std::array<double, 2> init = {1.0, 0.0}, double spread = 0.4) {
  for (const auto& d : data) {
    if (d.times.size() != d.p0.size() || (!d.sigma.empty() && d.sigma.size() != d.p0.size()))
      throw InvalidArgument("fit_gamma_h: trace columns differ in length");
    if (d.times.empty()) throw InvalidArgument("fit_gamma_h: empty trace");
    for (double sg : d.sigma)
      if (!(sg > 0.0)) throw InvalidArgument("fit_gamma_h: sigmas must be > 0");
  }
  if (!(s > 0.0)) throw InvalidArgument("fit_gamma_h: s must be > 0");
  const std::size_t n_total = data[0].p0.size() + data[1].p0.size();
  if (n_total < 3) throw InvalidArgument("fit_gamma_h: need at least 3 samples");

  auto ssr = [&](double g, double h) {
    if (!std::isfinite(g) || !std::isfinite(h)) return 1e30;
    try {
      double acc = 0.0;
      for (double r : detail::trace_residuals(data, g, h, mu_hat, nu_hat, s)) acc += r * r;
      return acc;
    } catch (const NumericalOverflow&) {
      return 1e30;
    }
  };
  detail::NMContext ctx{ssr};

  detail::NMResult best{0, 0, std::numeric_limits<double>::infinity(), false};
  int converged = 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) {
      auto r = detail::nelder_mead(ctx, init[0] + i * spread, init[1] + j * spread, 0.1, 4000, 1e-10);
      if (!r.converged) continue;
      // Polish from the converged point with a fresh simplex.
      r = detail::nelder_mead(ctx, r.x0, r.x1, 1e-3, 4000, 1e-12);
      ++converged;
      if (r.fval < best.fval) best = r;
    }
  if (converged == 0) throw NoConvergence("fit_gamma_h: no start converged within the iteration budget");

  const auto r0 = detail::trace_residuals(data, best.x0, best.x1, mu_hat, nu_hat, s);
  const auto m = static_cast<Eigen::Index>(r0.size());
  Eigen::MatrixXd J(m, 2);
  const double d = 1e-6;
  for (int c = 0; c < 2; ++c) {
    const double gp = best.x0 + (c == 0 ? d : 0), hp = best.x1 + (c == 1 ? d : 0);
    const double gm = best.x0 - (c == 0 ? d : 0), hm = best.x1 - (c == 1 ? d : 0);
    const auto rp = detail::trace_residuals(data, gp, hp, mu_hat, nu_hat, s);
    const auto rm = detail::trace_residuals(data, gm, hm, mu_hat, nu_hat, s);
    for (Eigen::Index k = 0; k < m; ++k)
      J(k, c) = (rp[static_cast<std::size_t>(k)] - rm[static_cast<std::size_t>(k)]) / (2 * d);
  }
  const Eigen::Matrix2d jtj = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(jtj);
  const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(1);
  if (!(lmin > 1e-12 * lmax) || !(lmax > 0.0))
    throw DegenerateFit("fit_gamma_h: residual Hessian is singular at the optimum; (gamma, h) not identifiable");
  double ssr_min = 0.0;
  for (double r : r0) ssr_min += r * r;
  const double s2 = ssr_min / static_cast<double>(m - 2);
  const Eigen::Matrix2d cov = s2 * jtj.inverse();

  GammaHFit out;
  out.gamma = {best.x0, std::sqrt(std::max(cov(0, 0), 0.0)), "trace_fit"};
  out.h = {best.x1, std::sqrt(std::max(cov(1, 1), 0.0)), "trace_fit"};
  out.ssr = ssr_min;
  out.starts_converged = converged;
  return out;
}

// Monte-Carlo eigenvalue error bars

struct EigenvalueStats {
  std::array<cplx, 3> mean{};
  std::array<double, 3> re_std{};
  std::array<double, 3> im_std{};
  std::array<cplx, 3> nominal{};
  int samples = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;  // nominal roots closer than the spread: stats over sorted roots
};

namespace detail {

struct ShiftedMoments {
  double shift = 0.0, sum = 0.0, sum2 = 0.0;
  int n = 0;
  void add(double x) {
    if (n == 0) shift = x;
    const double d = x - shift;
    sum += d;
    sum2 += d * d;
    ++n;
  }
  double mean() const { return shift + sum / n; }
  double std() const {
    if (n < 2) return 0.0;
    const double v = (sum2 - sum * sum / n) / (n - 1);
    return v > 0.0 ? std::sqrt(v) : 0.0;
  }
};

}  // namespace detail

/// estimates in the order gamma, h, mu, nu.  Draw i uses an mt19937_64 seeded
/// with seed_seq{seed, i}, so results do not depend on evaluation order.
inline EigenvalueStats eigenvalues_with_errors(const std::array<ParamEstimate, 4>& est, int n, std::uint64_t seed) {
  if (n < 100) throw InvalidArgument("eigenvalues_with_errors: need n >= 100 samples");
  for (const auto& e : est)
    if (!std::isfinite(e.value) || !(e.sigma >= 0.0)) throw InvalidArgument("eigenvalues_with_errors: bad estimate");

  EigenvalueStats st;
  st.samples = n;
  st.seed = seed;
  const Roots3 nominal = eigenvalues_cubic(char_poly_closed_form({est[0].value, est[1].value, est[2].value, est[3].value}));
  for (int k = 0; k < 3; ++k) st.nominal[k] = nominal[k];

  std::vector<Roots3> draws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(i)};
    std::mt19937_64 gen(ss);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::array<double, 4> v{};
    for (int k = 0; k < 4; ++k) {
      const double z = nd(gen);
      v[k] = est[k].sigma > 0.0 ? est[k].value + est[k].sigma * z : est[k].value;
    }
    draws[static_cast<std::size_t>(i)] = eigenvalues_cubic(char_poly_closed_form({v[0], v[1], v[2], v[3]}));
  }

  auto stats_of = [&](bool matched) {
    std::array<detail::ShiftedMoments, 3> re, im;
    for (const auto& r : draws) {
      Roots3 x = r;
      if (matched) {
        const auto p = detail::best_match(nominal, r);
        x = {r[p[0]], r[p[1]], r[p[2]]};
      }
      for (int k = 0; k < 3; ++k) {
        re[k].add(x[k].real());
        im[k].add(x[k].imag());
      }
    }
    for (int k = 0; k < 3; ++k) {
      st.mean[k] = {re[k].mean(), im[k].mean()};
      st.re_std[k] = re[k].std();
      st.im_std[k] = im[k].std();
    }
  };

  stats_of(true);
  double spread = 0.0;
  for (int k = 0; k < 3; ++k) spread = std::max(spread, std::hypot(st.re_std[k], st.im_std[k]));
  double gap = std::numeric_limits<double>::infinity(), scale = 1.0;
  for (int a = 0; a < 3; ++a) {
    scale = std::max(scale, std::abs(nominal[a]));
    for (int b = a + 1; b < 3; ++b) gap = std::min(gap, std::abs(nominal[a] - nominal[b]));
  }
  if (gap < 1e-9 * scale || (spread > 0.0 && gap <= 2.0 * spread)) {
    st.degenerate = true;
    stats_of(false);
  }
  return st;
}

// Synthetic experiment for closed-loop checks

struct ExperimentConfig {
  double s = kTwoPi * 40e3;   // trace scaling
  double s1 = kTwoPi * 30e3;  // C_PT scaling
  double s2 = kTwoPi * 20e3;  // C_psCh scaling
  double trace_tmax = 30e-6;
  int trace_samples = 16;  // every 2 us over 30 us
  int slope_samples = 101;
};

struct ExperimentData {
  std::array<TraceData, 2> traces;
  TraceData c_pt;
  TraceData c_psch;
  double s = 0, s1 = 0, s2 = 0;
};

/// P0 read out through the count model: levels 1..3 carry the normalized
/// measured-basis populations, counts are (optionally) Poisson-noised, and
/// the population solve gives P0 back.  The sigma is the linearized shot-noise
/// spread of that estimate.
inline std::pair<double, double> read_p0(const std::array<double, 3>& pops, const ReadoutModel& model,
                                         std::mt19937_64* rng) {
  Vec6d p = Vec6d::Zero();
  const double tot = pops[0] + pops[1] + pops[2];
  for (int k = 0; k < 3; ++k) p(k) = std::max(pops[k] / tot, 0.0);
  p /= p.sum();
  const auto seqs = measurement_sequences();
  const auto counts = simulate_counts(p, model, seqs, rng);
  const auto sol = solve_populations(counts, model);

  const Mat6d ainv = population_system(model).inverse();
  const double scale = static_cast<double>(model.averages) * model.readout_window_s;
  auto p0_of = [](const Vec6d& q) { return q(1) / (q(0) + q(1) + q(2)); };
  Vec6d b;
  for (int m = 0; m < 5; ++m) b(m) = counts[static_cast<std::size_t>(m)];
  b(5) = 1.0;
  double var = 0.0;
  for (int m = 0; m < 5; ++m) {
    const double h = 1e-6 * std::max(1.0, std::abs(b(m)));
    Vec6d bp = b, bm = b;
    bp(m) += h;
    bm(m) -= h;
    const double g = (p0_of(ainv * bp) - p0_of(ainv * bm)) / (2 * h);
    const double mean_c = to_vec(model.L).dot(sequence_permutation(seqs[static_cast<std::size_t>(m)]) * p);
    var += g * g * mean_c / scale;
  }
  return {sol.p0, std::sqrt(var)};
}

inline std::array<double, 3> measured_populations(const Vec3& state, const Vec3& phi) {
  // Basis with phi as the second vector: level 2 <-> phi.
  Mat3 b = Mat3::Identity();
  b.col(0) = phi.normalized();
  Eigen::HouseholderQR<Mat3> qr(b);
  const Mat3 q = qr.householderQ();
  const Vec3 u = state / state.norm();
  return {std::norm(q.col(1).dot(u)), std::norm(q.col(0).dot(u)), std::norm(q.col(2).dot(u))};
}

inline ExperimentData simulate_experiment(const ModelParams& p, const ExperimentConfig& cfg, const ReadoutModel& model) {
  p.validate();
  model.validate();
  std::mt19937_64 rng(model.seed);
  std::mt19937_64* g = model.shot_noise ? &rng : nullptr;
  const Mat3 h = build_hamiltonian(p).matrix();
  ExperimentData out;
  out.s = cfg.s;
  out.s1 = cfg.s1;
  out.s2 = cfg.s2;

  const auto probes = trace_probes();
  for (int k = 0; k < 2; ++k) {
    auto& d = out.traces[k];
    for (int j = 0; j < cfg.trace_samples; ++j) {
      const double t = cfg.trace_tmax * j / std::max(1, cfg.trace_samples - 1);
      const Vec3 st = propagate(Mat3(cfg.s * h), t, probes[k].psi);
      const auto [v, sg] = read_p0(measured_populations(st, probes[k].phi), model, g);
      d.times.push_back(t);
      d.p0.push_back(v);
      if (model.shot_noise) d.sigma.push_back(sg);
    }
  }

  auto conserved = [&](TraceData& d, double s, auto fn) {
    const double tw = slope_window(s, p.gamma);
    for (int j = 0; j < cfg.slope_samples; ++j) {
      const double t = tw * j / (cfg.slope_samples - 1);
      const double c = std::clamp(fn(h, s, t), 0.0, 1.0);
      const auto [v, sg] = read_p0({(1.0 - c) / 2.0, c, (1.0 - c) / 2.0}, model, g);
      d.times.push_back(t);
      d.p0.push_back(v);
      if (model.shot_noise) d.sigma.push_back(sg);
    }
  };
  conserved(out.c_pt, cfg.s1, conserved_pt_at);
  conserved(out.c_psch, cfg.s2, conserved_psch_at);
  return out;
}

inline double mean_sigma(const TraceData& d) {
  if (d.sigma.empty()) return 0.0;
  double acc = 0.0;
  for (double s : d.sigma) acc += s * s;
  return std::sqrt(acc / static_cast<double>(d.sigma.size()));
}

struct Retrieval {
  ParamEstimate gamma, h, mu, nu;
};

/// Full chain: slopes first, then the trace fit with (mu, nu) held fixed.
inline Retrieval retrieve_parameters(const ExperimentData& d, std::array<double, 2> init = {1.0, 0.0}) {
  Retrieval r;
  r.nu = estimate_nu(d.c_pt.times, d.c_pt.p0, d.s1, mean_sigma(d.c_pt));
  r.mu = estimate_mu(d.c_psch.times, d.c_psch.p0, d.s2, mean_sigma(d.c_psch));
  const auto f = fit_gamma_h(d.traces, r.mu.value, r.nu.value, d.s, init);
  r.gamma = f.gamma;
  r.h = f.h;
  return r;
}

}  // namespace nhep
