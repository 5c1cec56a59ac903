#pragma once

// Independent reference computations for the tests.  Nothing here calls the
// library's numerics: Hamiltonians are rebuilt from raw entries, polynomials
// come from determinant sampling, exponentials from eigen-decomposition.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using M3 = Eigen::Matrix3cd;
using V3 = Eigen::Vector3cd;
inline constexpr cplx I{0.0, 1.0};

/// Model Hamiltonian written out entry by entry.
inline M3 hamiltonian(double g, double h, double mu, double nu) {
  const double r = 1.0 / std::sqrt(2.0);
  M3 m;
  m << I * g + nu, r - I * h * r + mu, 0.0,  //
      r + I * h * r - mu, 0.0, r - I * h * r - mu,  //
      0.0, r + I * h * r + mu, -I * g - nu;
  return m;
}

/// Coefficients (c3, c2, c1, c0) of det(lambda I - H) by sampling the
/// determinant at four points and solving the Vandermonde system.
inline std::array<cplx, 4> char_poly_by_sampling(const M3& h) {
  const std::array<double, 4> xs{0.0, 1.0, -1.0, 2.0};
  Eigen::Matrix4cd v;
  Eigen::Vector4cd y;
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) v(k, j) = std::pow(xs[k], 3 - j);
    y(k) = (xs[k] * M3::Identity() - h).determinant();
  }
  const Eigen::Vector4cd c = v.fullPivLu().solve(y);
  return {c(0), c(1), c(2), c(3)};
}

/// Eigenvalues of the companion matrix of l^3 + c2 l^2 + c1 l + c0.
inline std::array<cplx, 3> companion_roots(cplx c2, cplx c1, cplx c0) {
  M3 m = M3::Zero();
  m(0, 0) = -c2;
  m(0, 1) = -c1;
  m(0, 2) = -c0;
  m(1, 0) = 1.0;
  m(2, 1) = 1.0;
  Eigen::ComplexEigenSolver<M3> es(m);
  return {es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
}

/// Smallest total distance between two root triples over all pairings.
inline double multiset_distance(const std::array<cplx, 3>& a, const std::array<cplx, 3>& b) {
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  double best = std::numeric_limits<double>::infinity();
  for (auto& p : perms) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(a[k] - b[p[k]]));
    best = std::min(best, d);
  }
  return best;
}

/// Res(p, p') for monic cubic p = prod (l - r_i): prod p'(r_i).
inline cplx resultant_from_roots(const std::array<cplx, 3>& r) {
  cplx acc = 1.0;
  for (int i = 0; i < 3; ++i) {
    cplx d = 1.0;
    for (int j = 0; j < 3; ++j)
      if (j != i) d *= r[i] - r[j];
    acc *= d;
  }
  return acc;
}

/// e^{-iHt} via eigen-decomposition (valid away from exceptional points).
inline M3 expm_spectral(const M3& h, double t) {
  Eigen::ComplexEigenSolver<M3> es(h);
  const M3 v = es.eigenvectors();
  Eigen::Vector3cd d;
  for (int k = 0; k < 3; ++k) d(k) = std::exp(-I * es.eigenvalues()(k) * t);
  return v * d.asDiagonal() * v.inverse();
}

/// e^{-iHt} via a long Taylor series with scaling and squaring.
inline M3 expm_taylor(const M3& h, double t) {
  const M3 a = -I * h * t;
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int sq = 0;
  double scale = 1.0;
  while (nrm * scale > 0.25) {
    scale *= 0.5;
    ++sq;
  }
  const M3 b = a * scale;
  M3 term = M3::Identity(), sum = M3::Identity();
  for (int k = 1; k < 30; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < sq; ++k) sum = sum * sum;
  return sum;
}

/// First t in (0, tmax] with sigma_max(e^{-iHt})^2 > m0, or +inf.  This is
/// where M(t) - I = m0 e^{-iH^dag t} e^{iHt} - I stops being positive.
inline double dilation_window(const M3& hs, double m0, double tmax, int samples = 4000) {
  auto smax2 = [&](double t) {
    Eigen::JacobiSVD<M3> svd(expm_taylor(hs, t));
    const double s = svd.singularValues()(0);
    return s * s;
  };
  double lo = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const double t = tmax * k / samples;
    if (smax2(t) > m0) {
      double hi = t;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (smax2(mid) > m0 ? hi : lo) = mid;
      }
      return hi;
    }
    lo = t;
  }
  return std::numeric_limits<double>::infinity();
}

/// Level energies (Hz) of D Sz^2 + we Sz + Q Iz^2 + wn Iz + A Sz Iz on the
/// 9-dimensional spin-1 x spin-1 space, read off by projecting onto
/// |mS, mI> basis states (the operator is diagonal there).
inline double nv_energy(double D, double Q, double A, double we, double wn, int ms, int mi) {
  Eigen::Matrix3d sz = Eigen::Matrix3d::Zero();
  sz(0, 0) = 1;
  sz(2, 2) = -1;
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  auto kron = [](const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    Eigen::Matrix<double, 9, 9> k;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) k.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
    return k;
  };
  const Eigen::Matrix<double, 9, 9> h = D * kron(sz * sz, id) + we * kron(sz, id) + Q * kron(id, sz * sz) +
                                        wn * kron(id, sz) + A * kron(sz, sz);
  const int i = 1 - ms, j = 1 - mi;
  Eigen::Matrix<double, 9, 1> e = Eigen::Matrix<double, 9, 1>::Zero();
  e(3 * i + j) = 1.0;
  return e.dot(h * e);
}

/// Central-difference derivative.
inline M3 central_diff(const std::function<M3(double)>& f, double t, double dt) {
  return (f(t + dt) - f(t - dt)) / (2.0 * dt);
}

}  // namespace oracle
