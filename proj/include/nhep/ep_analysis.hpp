#pragma once

// Exceptional-point classification from resultants, EP3 locus tracing,
// Riemann-sheet sweeps, cube-root dispersion and the winding-type invariant.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nhep/core.hpp"
#include "nhep/polynomial.hpp"

namespace nhep {

enum class EPKind { Regular, EP2, EP3 };

inline const char* to_string(EPKind k) {
  switch (k) {
    case EPKind::EP2: return "EP2";
    case EPKind::EP3: return "EP3";
    default: return "Regular";
  }
}

struct EPClass {
  EPKind kind = EPKind::Regular;
  double gamma = 0.0;
  double h = 0.0;
  double r1_abs = 0.0;
  double r2_abs = 0.0;
};

inline constexpr double kEPTolerance = 1e-8;

/// |r1| and |r2| are compared against tol scaled by the coefficient size
/// (r1 is cubic in the coefficients).
inline EPKind classify_coeffs(const CubicCoeffs& c_in, double tol = kEPTolerance) {
  if (!(tol > 0.0)) throw InvalidArgument("classify: tol must be > 0");
  const CubicCoeffs c = depress(c_in);
  const auto r = resultants(c);
  const bool z1 = std::abs(r.r1) < tol * r1_scale(c);
  const bool z2 = std::abs(r.r2) < tol * r2_scale(c);
  if (!z1) return EPKind::Regular;
  return z2 ? EPKind::EP3 : EPKind::EP2;
}

inline EPClass classify_point(const ModelParams& p, double tol = kEPTolerance) {
  p.validate();
  const auto c = char_poly(build_hamiltonian(p));
  const auto r = resultants(c);
  return {classify_coeffs(c, tol), p.gamma, p.h, std::abs(r.r1), std::abs(r.r2)};
}

inline cplx r1_at(double gamma, double h, double mu, double nu) {
  return resultants(char_poly_closed_form({gamma, h, mu, nu})).r1;
}

struct Region {
  double gamma_min = -2.0, gamma_max = 2.0;
  double h_min = -2.0, h_max = 2.0;

  void validate() const {
    for (double v : {gamma_min, gamma_max, h_min, h_max})
      if (!std::isfinite(v)) throw InvalidArgument("Region: bounds must be finite");
    if (!(gamma_min <= gamma_max) || !(h_min <= h_max)) throw InvalidArgument("Region: min > max");
  }
  bool contains(double g, double h) const {
    return g >= gamma_min && g <= gamma_max && h >= h_min && h <= h_max;
  }
};

struct LocusPoint {
  double gamma = 0.0;
  double h = 0.0;
  double r1_residual = 0.0;
};

inline double axis_node(double lo, double hi, int i, int cells) {
  return cells == 0 ? lo : lo + (hi - lo) * static_cast<double>(i) / cells;
}

/// Root of f on [a, b] by bisection, given a sign change.
inline double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
  double fa = f(a);
  for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

namespace detail {

// Zeros of f on the node grid of [lo, hi]: exact node zeros plus one
// bisection per sign change.
inline std::vector<double> scan_line(const std::function<double(double)>& f, double lo, double hi, int cells) {
  std::vector<double> out;
  double prev = f(lo);
  double xprev = lo;
  if (prev == 0.0) out.push_back(lo);
  for (int i = 1; i <= cells; ++i) {
    const double x = axis_node(lo, hi, i, cells);
    const double v = f(x);
    if (v == 0.0)
      out.push_back(x);
    else if (prev != 0.0 && (v < 0.0) != (prev < 0.0))
      out.push_back(bisect(f, xprev, x));
    prev = v;
    xprev = x;
  }
  return out;
}

}  // namespace detail

/// EP3 points of the model family for fixed (mu, nu) inside `region`.
/// `resolution` is the number of grid cells per axis.
///   mu = nu = 0: f0 vanishes identically and r1 = 4 f1^3 changes sign across
///                gamma^2 - h^2 = 1; rows and columns are scanned and bisected.
///   nu = 0:      f0 = 0 forces h = 0 or gamma = 0; f1 is scanned on those lines.
///   nu != 0:     Im f1 = -2 gamma nu forces gamma = 0, then mu h = 0; only the
///                origin can qualify.
inline std::vector<LocusPoint> trace_ep3_locus(double mu, double nu, const Region& region, int resolution) {
  region.validate();
  if (!std::isfinite(mu) || !std::isfinite(nu)) throw InvalidArgument("trace_ep3_locus: mu, nu must be finite");
  if (resolution < 1) throw InvalidArgument("trace_ep3_locus: resolution must be >= 1");

  std::vector<LocusPoint> pts;
  auto add = [&](double g, double h) { pts.push_back({g, h, std::abs(r1_at(g, h, mu, nu))}); };
  const Region& R = region;

  if (mu == 0.0 && nu == 0.0) {
    for (int j = 0; j <= resolution; ++j) {
      const double h = axis_node(R.h_min, R.h_max, j, resolution);
      auto f = [&](double g) { return r1_at(g, h, 0.0, 0.0).real(); };
      for (double g : detail::scan_line(f, R.gamma_min, R.gamma_max, resolution)) add(g, h);
    }
    for (int i = 0; i <= resolution; ++i) {
      const double g = axis_node(R.gamma_min, R.gamma_max, i, resolution);
      auto f = [&](double h) { return r1_at(g, h, 0.0, 0.0).real(); };
      for (double h : detail::scan_line(f, R.h_min, R.h_max, resolution)) {
        // Nodes already found by the row scan.
        const bool dup = std::any_of(pts.begin(), pts.end(), [&](const LocusPoint& q) {
          return std::abs(q.gamma - g) < 1e-12 && std::abs(q.h - h) < 1e-12;
        });
        if (!dup) add(g, h);
      }
    }
  } else if (nu == 0.0) {
    auto f1 = [&](double g, double h) { return char_poly_closed_form({g, h, mu, 0.0}).f1.real(); };
    if (R.h_min <= 0.0 && R.h_max >= 0.0)
      for (double g : detail::scan_line([&](double g) { return f1(g, 0.0); }, R.gamma_min, R.gamma_max, resolution))
        add(g, 0.0);
    if (R.gamma_min <= 0.0 && R.gamma_max >= 0.0)
      for (double h : detail::scan_line([&](double h) { return f1(0.0, h); }, R.h_min, R.h_max, resolution))
        if (h != 0.0) add(0.0, h);
  } else if (R.contains(0.0, 0.0) &&
             classify_point({0.0, 0.0, mu, nu}).kind == EPKind::EP3) {
    add(0.0, 0.0);
  }

  std::sort(pts.begin(), pts.end(), [](const LocusPoint& a, const LocusPoint& b) {
    return a.h != b.h ? a.h < b.h : a.gamma < b.gamma;
  });
  return pts;
}

/// Isolated EP3s of an arbitrary (gamma, h) family: coarse minimum search of
/// |f1|^2 + |f0|^2 (depressed) followed by Gauss-Newton on (Re, Im) of (f1, f0).
inline std::vector<LocusPoint> find_ep3_points(const std::function<Mat3(double, double)>& family, const Region& region,
                                               int resolution, double tol = 1e-10) {
  region.validate();
  if (resolution < 2) throw InvalidArgument("find_ep3_points: resolution must be >= 2");
  auto residual = [&](double g, double h) {
    const auto c = depress(char_poly(family(g, h)));
    return Eigen::Vector4d(c.f1.real(), c.f1.imag(), c.f0.real(), c.f0.imag());
  };
  const int n = resolution + 1;
  std::vector<double> cost(static_cast<std::size_t>(n * n));
  auto at = [&](int i, int j) -> double& { return cost[static_cast<std::size_t>(j * n + i)]; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      at(i, j) = residual(axis_node(region.gamma_min, region.gamma_max, i, resolution),
                          axis_node(region.h_min, region.h_max, j, resolution))
                     .squaredNorm();

  std::vector<LocusPoint> found;
  const double step = std::max((region.gamma_max - region.gamma_min), (region.h_max - region.h_min)) / resolution;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      bool local_min = true;
      for (int dj = -1; dj <= 1 && local_min; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if ((di || dj) && ii >= 0 && jj >= 0 && ii < n && jj < n && at(ii, jj) < at(i, j)) {
            local_min = false;
            break;
          }
        }
      if (!local_min) continue;

      Eigen::Vector2d x(axis_node(region.gamma_min, region.gamma_max, i, resolution),
                        axis_node(region.h_min, region.h_max, j, resolution));
      bool ok = false;
      for (int it = 0; it < 60; ++it) {
        const Eigen::Vector4d r = residual(x(0), x(1));
        if (r.norm() < tol) {
          ok = true;
          break;
        }
        Eigen::Matrix<double, 4, 2> J;
        const double d = 1e-7;
        J.col(0) = (residual(x(0) + d, x(1)) - residual(x(0) - d, x(1))) / (2 * d);
        J.col(1) = (residual(x(0), x(1) + d) - residual(x(0), x(1) - d)) / (2 * d);
        const Eigen::Vector2d dx = J.colPivHouseholderQr().solve(-r);
        if (!dx.allFinite()) break;
        x += dx;
        if (std::abs(x(0) - axis_node(region.gamma_min, region.gamma_max, i, resolution)) > 3 * step ||
            std::abs(x(1) - axis_node(region.h_min, region.h_max, j, resolution)) > 3 * step)
          break;
      }
      if (!ok || !region.contains(x(0), x(1))) continue;
      const bool dup = std::any_of(found.begin(), found.end(), [&](const LocusPoint& q) {
        return std::hypot(q.gamma - x(0), q.h - x(1)) < 1e-6;
      });
      if (!dup) found.push_back({x(0), x(1), residual(x(0), x(1)).norm()});
    }
  }
  return found;
}

/// Three continuity-sorted eigenvalue sheets on a (gamma, h) grid.
/// Node (i, j) sits at gammas[i], hs[j]; flat index j * gammas.size() + i.
struct SheetGrid {
  std::vector<double> gammas;
  std::vector<double> hs;
  std::array<std::vector<cplx>, 3> sheets;
  std::vector<int> branch_flag;

  std::size_t index(std::size_t i, std::size_t j) const { return j * gammas.size() + i; }
};

namespace detail {

inline constexpr std::array<std::array<int, 3>, 6> kPerms{
    {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

// Permutation perm with new[perm[k]] closest (sum of moduli) to ref[k].
// The identity wins ties.
inline std::array<int, 3> best_match(const Roots3& ref, const Roots3& cur) {
  std::array<int, 3> best = kPerms[0];
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& p : kPerms) {
    double c = 0.0;
    for (int k = 0; k < 3; ++k) c += std::abs(cur[p[k]] - ref[k]);
    if (c < best_cost) {
      best_cost = c;
      best = p;
    }
  }
  return best;
}

}  // namespace detail

/// `resolution` is the number of nodes per axis (1 gives a single node).
inline SheetGrid sweep_sheets(const Region& region, int resolution, double mu, double nu) {
  region.validate();
  if (resolution < 1) throw InvalidArgument("sweep_sheets: resolution must be >= 1");
  if (!std::isfinite(mu) || !std::isfinite(nu)) throw InvalidArgument("sweep_sheets: mu, nu must be finite");
  SheetGrid g;
  const int n = resolution;
  for (int i = 0; i < n; ++i) g.gammas.push_back(axis_node(region.gamma_min, region.gamma_max, i, n - 1));
  for (int j = 0; j < n; ++j) g.hs.push_back(axis_node(region.h_min, region.h_max, j, n - 1));
  const std::size_t total = static_cast<std::size_t>(n) * n;
  std::vector<Roots3> raw(total);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      raw[g.index(i, j)] = eigenvalues_cubic(char_poly_closed_form({g.gammas[i], g.hs[j], mu, nu}));

  // Serpentine pass: each node is matched against the one visited before it.
  std::vector<Roots3> sorted(total);
  g.branch_flag.assign(total, 0);
  bool first = true;
  Roots3 prev{};
  for (int j = 0; j < n; ++j) {
    for (int step = 0; step < n; ++step) {
      const int i = (j % 2 == 0) ? step : n - 1 - step;
      const auto idx = g.index(i, j);
      Roots3 cur = raw[idx];
      if (!first) {
        const auto p = detail::best_match(prev, cur);
        cur = {raw[idx][p[0]], raw[idx][p[1]], raw[idx][p[2]]};
        // A branch cut shows up as disagreement with the row below.
        if (j > 0) {
          const auto& below = sorted[g.index(i, j - 1)];
          const auto q = detail::best_match(below, cur);
          if (q != detail::kPerms[0]) g.branch_flag[idx] = 1;
        }
      }
      sorted[idx] = cur;
      prev = cur;
      first = false;
    }
  }
  for (int k = 0; k < 3; ++k) {
    g.sheets[k].resize(total);
    for (std::size_t idx = 0; idx < total; ++idx) g.sheets[k][idx] = sorted[idx][k];
  }
  return g;
}

struct DispersionScan {
  double h0 = 0.0;
  double gamma0 = 0.0;
  std::vector<double> mu_samples;
  std::vector<double> splittings;
  std::vector<cplx> eps_plus;
  std::vector<cplx> eps_minus;
  double fitted_exponent = 0.0;
};

inline double max_pairwise_distance(const Roots3& r) {
  return std::max({std::abs(r[0] - r[1]), std::abs(r[0] - r[2]), std::abs(r[1] - r[2])});
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

inline DispersionScan dispersion_scan(double h0, double gamma0, const std::vector<double>& mu_list) {
  if (!std::isfinite(h0) || !std::isfinite(gamma0)) throw InvalidArgument("dispersion_scan: anchor must be finite");
  if (std::abs(gamma0 * gamma0 - 1.0 - h0 * h0) > 1e-9)
    throw InvalidArgument("dispersion_scan: anchor is not on gamma^2 - h^2 = 1");
  if (mu_list.size() < 2) throw InvalidArgument("dispersion_scan: need at least two mu samples to fit an exponent");
  for (double m : mu_list)
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("dispersion_scan: mu samples must be positive");
  const auto [lo, hi] = std::minmax_element(mu_list.begin(), mu_list.end());
  if (*hi < 100.0 * *lo * (1.0 - 1e-9)) throw InvalidArgument("dispersion_scan: mu samples must span two decades");

  DispersionScan out;
  out.h0 = h0;
  out.gamma0 = gamma0;
  out.mu_samples = mu_list;
  std::vector<double> lx, ly;
  const double r2 = std::numbers::sqrt2;
  for (double mu : mu_list) {
    const auto roots = eigenvalues_cubic(char_poly_closed_form({gamma0, h0, mu, 0.0}));
    const double split = max_pairwise_distance(roots);
    out.splittings.push_back(split);
    const double a = -r2 * h0 * mu * gamma0;
    const cplx b = std::sqrt(cplx(2.0 * h0 * h0 * mu * mu * gamma0 * gamma0 + 8.0 * std::pow(mu, 6) / 27.0));
    out.eps_plus.push_back(a + b);
    out.eps_minus.push_back(a - b);
    lx.push_back(std::log(mu));
    ly.push_back(std::log(split));
  }
  out.fitted_exponent = ls_slope(lx, ly);
  return out;
}

/// W = (sgn Re r1(plus) - sgn Re r1(minus)) / 2.
inline int topological_invariant(std::array<double, 2> pt_plus, std::array<double, 2> pt_minus, double mu, double nu,
                                 double tol = kEPTolerance) {
  auto sign_at = [&](const std::array<double, 2>& pt) {
    const ModelParams p{pt[0], pt[1], mu, nu};
    p.validate();
    const auto c = char_poly_closed_form(p);
    const double re = resultants(c).r1.real();
    if (std::abs(re) <= tol * r1_scale(c))
      throw OnLocus("topological_invariant: point (gamma=" + std::to_string(pt[0]) + ", h=" +
                    std::to_string(pt[1]) + ") lies on the exceptional locus; sign of Re r1 undefined");
    return re > 0.0 ? 1 : -1;
  };
  return (sign_at(pt_plus) - sign_at(pt_minus)) / 2;
}

}  // namespace nhep
