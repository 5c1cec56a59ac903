#pragma once

// Complex-matrix substrate, spin-1 operators, the symmetry-tunable
// non-Hermitian Hamiltonian family and its two symmetry operators.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "nhep/error.hpp"

namespace nhep {

using cplx = std::complex<double>;
using Mat3 = Eigen::Matrix3cd;
using Vec3 = Eigen::Vector3cd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Largest entry modulus.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  const auto e = m.eval();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const auto z = e.data()[i];
    if (!std::isfinite(std::real(z)) || !std::isfinite(std::imag(z))) return false;
  }
  return true;
}

/// Coordinates of every computation: the four real knobs plus the
/// angular-frequency scale s (rad/s) that maps dimensionless time to seconds.
struct ModelParams {
  double gamma = 0.0;
  double h = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  double s = 1.0;

  void validate() const {
    if (!std::isfinite(gamma) || !std::isfinite(h) || !std::isfinite(mu) || !std::isfinite(nu))
      throw InvalidArgument("ModelParams: gamma, h, mu, nu must be finite");
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("ModelParams: s must be finite and > 0");
  }
  bool pt_symmetric() const { return nu == 0.0; }
  // nu enters the diagonal as a real shift, which U_psCh cannot map to -H^dag.
  bool pseudo_chiral() const { return mu == 0.0 && nu == 0.0; }
};

enum class Symmetry { PT, PseudoChirality };

inline const char* to_string(Symmetry s) { return s == Symmetry::PT ? "PT" : "PseudoChirality"; }

struct SymmetryClaims {
  bool pt = false;
  bool pseudo_chirality = false;
  bool operator==(const SymmetryClaims&) const = default;
};

inline constexpr double kSymmetryTolerance = 1e-10;

/// U_PT: swaps m_S = +1 and -1.
inline Mat3 pt_operator() {
  Mat3 u = Mat3::Zero();
  u(0, 2) = 1.0;
  u(1, 1) = 1.0;
  u(2, 0) = 1.0;
  return u;
}

/// U_psCh = diag(1, -1, 1).
inline Mat3 pseudo_chirality_operator() {
  Mat3 u = Mat3::Zero();
  u(0, 0) = 1.0;
  u(1, 1) = -1.0;
  u(2, 2) = 1.0;
  return u;
}

/// Defect of the symmetry relation, max-norm.
///   PT:              U H U^-1 - conj(H)
///   PseudoChirality: U H U^-1 + H^dagger
inline double symmetry_defect(const Mat3& h, Symmetry kind) {
  // Both operators are real, symmetric and involutory, so U^-1 == U.
  if (kind == Symmetry::PT) {
    const Mat3 u = pt_operator();
    return max_abs(Mat3(u * h * u - h.conjugate()));
  }
  const Mat3 u = pseudo_chirality_operator();
  return max_abs(Mat3(u * h * u + h.adjoint()));
}

inline bool symmetry_holds(const Mat3& h, Symmetry kind, double tol = kSymmetryTolerance) {
  return symmetry_defect(h, kind) < tol * std::max(1.0, max_abs(h));
}

/// A 3x3 complex matrix tagged with the symmetries it is claimed to satisfy.
/// Immutable; claims are verified on construction.
class NHMatrix {
 public:
  NHMatrix() : m_(Mat3::Zero()) {}

  explicit NHMatrix(const Mat3& m, SymmetryClaims claims = {}) : m_(m), claims_(claims) {
    if (!all_finite(m_)) throw InvalidArgument("NHMatrix: entries must be finite");
    if (claims_.pt && !symmetry_holds(m_, Symmetry::PT))
      throw InvalidArgument("NHMatrix: PT symmetry claimed but the relation fails");
    if (claims_.pseudo_chirality && !symmetry_holds(m_, Symmetry::PseudoChirality))
      throw InvalidArgument("NHMatrix: pseudo-chirality claimed but the relation fails");
  }

  const Mat3& matrix() const { return m_; }
  const SymmetryClaims& claims() const { return claims_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

  NHMatrix scaled(double factor) const { return NHMatrix(Mat3(m_ * factor), claims_); }

 private:
  Mat3 m_;
  SymmetryClaims claims_;
};

struct SpinOperators {
  NHMatrix sx;
  NHMatrix sy;
  NHMatrix sz;
};

/// Standard spin-1 matrices in the basis m = +1, 0, -1.
inline SpinOperators spin1_operators() {
  const double r = 1.0 / std::numbers::sqrt2;
  Mat3 sx = Mat3::Zero();
  sx(0, 1) = sx(1, 0) = sx(1, 2) = sx(2, 1) = r;
  Mat3 sy = Mat3::Zero();
  sy(0, 1) = -kI * r;
  sy(1, 0) = kI * r;
  sy(1, 2) = -kI * r;
  sy(2, 1) = kI * r;
  Mat3 sz = Mat3::Zero();
  sz(0, 0) = 1.0;
  sz(2, 2) = -1.0;
  return {NHMatrix(sx), NHMatrix(sy), NHMatrix(sz)};
}

/// The mu-perturbation [[0,1,0],[-1,0,-1],[0,1,0]] (anti-Hermitian).
inline Mat3 mu_perturbation() {
  Mat3 k = Mat3::Zero();
  k(0, 1) = 1.0;
  k(1, 0) = -1.0;
  k(1, 2) = -1.0;
  k(2, 1) = 1.0;
  return k;
}

/// H = Sx + (i*gamma + nu) Sz + h Sy + mu K. Dimensionless (s is not applied).
inline NHMatrix build_hamiltonian(const ModelParams& p) {
  if (!std::isfinite(p.gamma) || !std::isfinite(p.h) || !std::isfinite(p.mu) || !std::isfinite(p.nu))
    throw InvalidArgument("build_hamiltonian: parameters must be finite");
  const auto ops = spin1_operators();
  const Mat3 m = ops.sx.matrix() + (kI * p.gamma + p.nu) * ops.sz.matrix() + p.h * ops.sy.matrix() +
                 p.mu * mu_perturbation();
  return NHMatrix(m, SymmetryClaims{p.pt_symmetric(), p.pseudo_chiral()});
}

/// H^x = Sx + i*gamma Sz + h Sy + x [[0,1,0],[1,-i,0],[0,0,0]]: keeps
/// pseudo-chirality and breaks PT for x != 0.
inline NHMatrix build_x_hamiltonian(double gamma, double h, double x) {
  if (!std::isfinite(gamma) || !std::isfinite(h) || !std::isfinite(x))
    throw InvalidArgument("build_x_hamiltonian: parameters must be finite");
  const auto ops = spin1_operators();
  Mat3 extra = Mat3::Zero();
  extra(0, 1) = 1.0;
  extra(1, 0) = 1.0;
  extra(1, 1) = -kI;
  const Mat3 m = ops.sx.matrix() + kI * gamma * ops.sz.matrix() + h * ops.sy.matrix() + x * extra;
  return NHMatrix(m, SymmetryClaims{x == 0.0, true});
}

struct SymmetryCheck {
  bool holds;
  double residual;
};

/// residual = max-norm of the relation's defect; holds when it is below
/// `tol` relative to max(1, largest entry).
inline SymmetryCheck check_symmetry(const NHMatrix& h, Symmetry kind, double tol = kSymmetryTolerance) {
  const double r = symmetry_defect(h.matrix(), kind);
  return {r < tol * std::max(1.0, max_abs(h.matrix())), r};
}

}  // namespace nhep
