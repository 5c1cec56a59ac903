#pragma once

// Characteristic polynomial, Sylvester resultants and the closed-form cubic
// solver.  Polynomials are coefficient lists in descending powers.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "nhep/core.hpp"

namespace nhep {

/// det(lambda I - H) = f3 l^3 + f2 l^2 + f1 l + f0.
struct CubicCoeffs {
  cplx f3{1.0, 0.0};
  cplx f2{};
  cplx f1{};
  cplx f0{};
};

struct ResultantPair {
  cplx r1{};  // R_{P,P'}
  cplx r2{};  // R_{P',P''}
};

using Poly = std::vector<cplx>;

/// Coefficients are snapped to zero (per real/imaginary part) when they are
/// within a few ulps of the matrix scale raised to their degree, so exact
/// cancellations such as 1/sqrt2 * 1/sqrt2 - 1/2 do not leave 1e-16 residue.
inline CubicCoeffs char_poly(const Mat3& h) {
  const cplx tr = h.trace();
  const cplx minors = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0) + h(0, 0) * h(2, 2) - h(0, 2) * h(2, 0) +
                      h(1, 1) * h(2, 2) - h(1, 2) * h(2, 1);
  const double scale = 3.0 * max_abs(h);
  const double eps = 8.0 * std::numeric_limits<double>::epsilon();
  auto snap = [&](cplx z, int degree) {
    const double tol = eps * std::pow(scale, degree);
    return cplx(std::abs(z.real()) <= tol ? 0.0 : z.real(), std::abs(z.imag()) <= tol ? 0.0 : z.imag());
  };
  return {1.0, snap(-tr, 1), snap(minors, 2), snap(-h.determinant(), 3)};
}

inline CubicCoeffs char_poly(const NHMatrix& h) { return char_poly(h.matrix()); }

/// Closed forms for the model family (f3 = 1, f2 = 0).
inline CubicCoeffs char_poly_closed_form(const ModelParams& p) {
  const double g = p.gamma, h = p.h, mu = p.mu, nu = p.nu;
  const cplx f1 = cplx(g * g - 1.0 - h * h - nu * nu + 2.0 * mu * mu, -2.0 * g * nu);
  const cplx f0 = 2.0 * std::numbers::sqrt2 * mu * h * cplx(g, -nu);
  return {1.0, 0.0, f1, f0};
}

/// Monic depressed form x^3 + f1 x + f0 under lambda = x - f2/(3 f3).
inline CubicCoeffs depress(const CubicCoeffs& c) {
  if (c.f3 == cplx(0.0)) throw InvalidArgument("depress: leading coefficient is zero");
  const cplx a = c.f2 / c.f3, b = c.f1 / c.f3, d = c.f0 / c.f3;
  const cplx p = b - a * a / 3.0;
  const cplx q = d - a * b / 3.0 + 2.0 * a * a * a / 27.0;
  return {1.0, 0.0, p, q};
}

inline Poly to_poly(const CubicCoeffs& c) { return {c.f3, c.f2, c.f1, c.f0}; }

inline Poly derivative(const Poly& p) {
  Poly d;
  const auto n = static_cast<int>(p.size()) - 1;
  for (int k = 0; k < n; ++k) d.push_back(p[k] * static_cast<double>(n - k));
  if (d.empty()) d.push_back(0.0);
  return d;
}

/// Drop leading zero coefficients.
inline Poly trim(const Poly& p) {
  auto it = std::find_if(p.begin(), p.end(), [](cplx z) { return z != cplx(0.0); });
  return Poly(it, p.end());
}

/// Rows of p (deg q of them) first, then rows of q (deg p of them).
inline Eigen::MatrixXcd sylvester_matrix(const Poly& p_in, const Poly& q_in) {
  const Poly p = trim(p_in), q = trim(q_in);
  if (p.empty() || q.empty()) throw InvalidArgument("sylvester_matrix: zero polynomial");
  const int m = static_cast<int>(p.size()) - 1, n = static_cast<int>(q.size()) - 1;
  if (m < 1 || n < 1) throw InvalidArgument("sylvester_matrix: both polynomials need degree >= 1");
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(m + n, m + n);
  for (int r = 0; r < n; ++r)
    for (int k = 0; k <= m; ++k) s(r, r + k) = p[k];
  for (int r = 0; r < m; ++r)
    for (int k = 0; k <= n; ++k) s(n + r, r + k) = q[k];
  return s;
}

inline cplx sylvester_resultant(const Poly& p, const Poly& q) {
  return sylvester_matrix(p, q).fullPivLu().determinant();
}

/// (4 f1^3 + 27 f0^2, 36 f0) of the monic depressed cubic; inputs with f3 != 1
/// or f2 != 0 are depressed first.
inline ResultantPair resultants(const CubicCoeffs& c_in) {
  const CubicCoeffs c = (c_in.f3 == cplx(1.0) && c_in.f2 == cplx(0.0)) ? c_in : depress(c_in);
  return {4.0 * c.f1 * c.f1 * c.f1 + 27.0 * c.f0 * c.f0, 36.0 * c.f0};
}

/// Scale of r1 used by relative tolerances.
inline double r1_scale(const CubicCoeffs& c) { return 1.0 + std::pow(std::abs(c.f1), 3) + std::norm(c.f0); }
inline double r2_scale(const CubicCoeffs& c) { return 1.0 + std::abs(c.f0); }

using Roots3 = std::array<cplx, 3>;

/// Sort by real part, ties (within tol) by imaginary part.
inline void sort_roots(Roots3& r, double tol = 1e-12) {
  double scale = 1.0;
  for (auto z : r) scale = std::max(scale, std::abs(z));
  std::sort(r.begin(), r.end(), [&](cplx a, cplx b) {
    if (std::abs(a.real() - b.real()) > tol * scale) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

inline Roots3 companion_roots(const CubicCoeffs& c_in) {
  const CubicCoeffs c = depress(c_in);
  Mat3 comp = Mat3::Zero();
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  comp(0, 2) = -c.f0;
  comp(1, 2) = -c.f1;
  Eigen::ComplexEigenSolver<Mat3> es(comp, false);
  const cplx shift = c_in.f2 / c_in.f3 / 3.0;
  Roots3 r{es.eigenvalues()(0) - shift, es.eigenvalues()(1) - shift, es.eigenvalues()(2) - shift};
  sort_roots(r);
  return r;
}

inline constexpr double kCardanoDiscriminantFloor = 1e-20;

/// Roots of the cubic by Cardano's formula, sorted by (Re, Im).
inline Roots3 eigenvalues_cubic(const CubicCoeffs& c_in) {
  const bool depressed = c_in.f3 == cplx(1.0) && c_in.f2 == cplx(0.0);
  const CubicCoeffs c = depressed ? c_in : depress(c_in);
  const cplx shift = depressed ? cplx(0.0) : c_in.f2 / c_in.f3 / 3.0;
  const cplx p = c.f1, q = c.f0;

  // Near a multiple root the two Cardano terms cancel; let the eigensolver do it.
  const cplx disc = -(4.0 * p * p * p + 27.0 * q * q);
  if (std::abs(disc) < kCardanoDiscriminantFloor) return companion_roots(c_in);

  const cplx sq = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
  cplx u3 = -q / 2.0 + sq;
  const cplx alt = -q / 2.0 - sq;
  if (std::abs(alt) > std::abs(u3)) u3 = alt;
  const cplx u = std::pow(u3, 1.0 / 3.0);
  const cplx w(-0.5, std::sqrt(3.0) / 2.0);

  auto val = [&](cplx x) { return (x * x + p) * x + q; };
  Roots3 r;
  cplx uk = u;
  for (int k = 0; k < 3; ++k, uk *= w) {
    cplx x = uk - p / (3.0 * uk);
    // One guarded Newton polish.
    const cplx dp = 3.0 * x * x + p;
    if (std::abs(dp) > 0.0) {
      const cplx y = x - val(x) / dp;
      if (std::abs(val(y)) < std::abs(val(x))) x = y;
    }
    r[k] = x - shift;
  }
  sort_roots(r);
  return r;
}

}  // namespace nhep
