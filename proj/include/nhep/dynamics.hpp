#pragma once

// Non-unitary evolution, normalized populations, the two conserved
// quantities, steady-state eigenstate filtering and state fidelity.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nhep/core.hpp"
#include "nhep/ep_analysis.hpp"
#include "nhep/polynomial.hpp"

namespace nhep {

inline constexpr double kOverflowGuard = 1e12;

inline Mat3 evolution_operator(const Mat3& h, double t) { return Mat3(-kI * h * t).exp(); }

/// e^{-iHt} psi0, not normalized.
inline Vec3 propagate(const Mat3& h, double t, const Vec3& psi0) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("propagate: t must be finite and >= 0");
  if (t == 0.0) return psi0;
  const Vec3 out = evolution_operator(h, t) * psi0;
  const double n0 = psi0.norm();
  if (!all_finite(out) || out.norm() > kOverflowGuard * std::max(n0, std::numeric_limits<double>::min()))
    throw NumericalOverflow("propagate: state norm grew beyond 1e12 x initial at t=" + std::to_string(t) +
                            "; shorten the time window");
  return out;
}

inline Vec3 propagate(const NHMatrix& h, double t, const Vec3& psi0) { return propagate(h.matrix(), t, psi0); }

struct EvolutionTrace {
  std::vector<double> times;  // s
  std::vector<Vec3> raw_states;
  std::vector<double> norm;
  std::vector<double> p0;
};

inline void require_unit(const Vec3& v, const char* what) {
  if (!all_finite(v) || std::abs(v.norm() - 1.0) > 1e-9)
    throw InvalidArgument(std::string(what) + " must be a unit vector");
}

/// P0(t) = |<phi|psi(t)>|^2 / <psi(t)|psi(t)> with psi(t) = e^{-iHt} psi.
/// H must already carry the s scaling when `times` are in seconds.
inline EvolutionTrace population_trace(const Mat3& h, const Vec3& psi, const Vec3& phi,
                                       const std::vector<double>& times) {
  require_unit(psi, "population_trace: psi");
  require_unit(phi, "population_trace: phi");
  EvolutionTrace tr;
  for (double t : times) {
    const Vec3 st = propagate(h, t, psi);
    const double n = st.squaredNorm();
    const double p = std::norm(phi.dot(st)) / n;
    tr.times.push_back(t);
    tr.raw_states.push_back(st);
    tr.norm.push_back(n);
    tr.p0.push_back(std::clamp(p, 0.0, 1.0));
  }
  return tr;
}

inline EvolutionTrace population_trace(const NHMatrix& h, const Vec3& psi, const Vec3& phi,
                                       const std::vector<double>& times) {
  return population_trace(h.matrix(), psi, phi, times);
}

struct ProbePair {
  Vec3 psi;
  Vec3 phi;
};

inline ProbePair pt_probe() {
  const double r = 1.0 / std::numbers::sqrt2;
  return {Vec3(0.0, cplx(0.5, 0.5), r), Vec3(cplx(0.5, 0.5), r, 0.0)};
}

inline ProbePair psch_probe() {
  const double r = 1.0 / std::numbers::sqrt2;
  return {Vec3(0.0, 1.0, 0.0), Vec3(0.0, r, kI * r)};
}

/// C_PT(t) = |<phi| e^{+i s1 H* t} U_PT e^{-i s1 H t} |psi>|^2.  H dimensionless.
inline double conserved_pt_at(const Mat3& h, double s1, double t) {
  const auto pr = pt_probe();
  const Vec3 a = propagate(h * s1, t, pr.psi);
  const Vec3 b = Mat3((kI * s1 * t * h.conjugate()).exp()) * (pt_operator() * a);
  return std::norm(pr.phi.dot(b));
}

/// C_psCh(t) = |<phi| e^{-i s2 H^dag t} U_psCh e^{-i s2 H t} |psi>|^2.
inline double conserved_psch_at(const Mat3& h, double s2, double t) {
  const auto pr = psch_probe();
  const Vec3 a = propagate(h * s2, t, pr.psi);
  const Vec3 b = Mat3((-kI * s2 * t * h.adjoint()).exp()) * (pseudo_chirality_operator() * a);
  return std::norm(pr.phi.dot(b));
}

inline std::vector<double> conserved_pt(const NHMatrix& h, double s1, const std::vector<double>& times) {
  if (!(s1 > 0.0)) throw InvalidArgument("conserved_pt: s1 must be > 0");
  std::vector<double> out;
  for (double t : times) out.push_back(conserved_pt_at(h.matrix(), s1, t));
  return out;
}

inline std::vector<double> conserved_psch(const NHMatrix& h, double s2, const std::vector<double>& times) {
  if (!(s2 > 0.0)) throw InvalidArgument("conserved_psch: s2 must be > 0");
  std::vector<double> out;
  for (double t : times) out.push_back(conserved_psch_at(h.matrix(), s2, t));
  return out;
}

/// Hermitian, unit-trace, positive semidefinite 3x3 matrix.
class DensityMatrix3 {
 public:
  explicit DensityMatrix3(const Mat3& rho) : rho_(rho) {
    if (!all_finite(rho_)) throw InvalidArgument("DensityMatrix3: entries must be finite");
    if (max_abs(Mat3(rho_ - rho_.adjoint())) > 1e-12) throw InvalidArgument("DensityMatrix3: not Hermitian");
    if (std::abs(rho_.trace() - cplx(1.0)) > 1e-12) throw InvalidArgument("DensityMatrix3: trace != 1");
    Eigen::SelfAdjointEigenSolver<Mat3> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw InvalidArgument("DensityMatrix3: not positive semidefinite");
  }

  static DensityMatrix3 pure(const Vec3& v) {
    const Vec3 u = v / v.norm();
    Mat3 r = u * u.adjoint();
    r = 0.5 * (r + r.adjoint());
    return DensityMatrix3(r);
  }

  const Mat3& matrix() const { return rho_; }

 private:
  Mat3 rho_;
};

// Eigenvalues at rounding level are dropped: sqrt(1e-17) would otherwise leak
// ~3e-9 into fidelities of pure states.
inline double drop_tiny(double l, double top) { return l > 1e-13 * top ? l : 0.0; }

inline Mat3 psd_sqrt(const Mat3& a) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(a);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::Vector3d l;
  for (int k = 0; k < 3; ++k) l(k) = std::sqrt(drop_tiny(es.eigenvalues()(k), top));
  return es.eigenvectors() * l.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

/// F = [Tr sqrt(sqrt(rho_i) rho_j sqrt(rho_i))]^2.
inline double fidelity(const DensityMatrix3& a, const DensityMatrix3& b) {
  const Mat3 sa = psd_sqrt(a.matrix());
  Mat3 m = sa * b.matrix() * sa;
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  double tr = 0.0;
  for (int k = 0; k < 3; ++k) tr += std::sqrt(drop_tiny(es.eigenvalues()(k), top));
  return std::clamp(tr * tr, 0.0, 1.0);
}

enum class Filter { Top, Middle, Bottom };

inline const char* to_string(Filter f) {
  switch (f) {
    case Filter::Top: return "top";
    case Filter::Bottom: return "bottom";
    default: return "middle";
  }
}

struct EigenstateResult {
  DensityMatrix3 rho = DensityMatrix3::pure(Vec3(1, 0, 0));
  Vec3 vector;
  cplx eigenvalue;  // matching root of H
  long steps = 0;
};

/// g(H) = H (top), -H (bottom) or -i (H - alpha)^-1 (middle).
inline Mat3 filter_generator(const Mat3& h, Filter which, cplx alpha) {
  if (which == Filter::Top) return h;
  if (which == Filter::Bottom) return -h;
  const auto roots = eigenvalues_cubic(char_poly(h));
  double scale = 1.0;
  for (auto z : roots) scale = std::max(scale, std::abs(z));
  for (auto z : roots)
    if (std::abs(z - alpha) < 1e-12 * scale)
      throw SingularShift("extract_eigenstate: alpha coincides with an eigenvalue of H");
  const Mat3 shifted = h - alpha * Mat3::Identity();
  return -kI * shifted.fullPivLu().inverse();
}

inline constexpr long kMaxFilterSteps = 1000000;

/// Steady state of the renormalized evolution under g(H).  T is the step
/// length; T <= 0 picks 5 / (Im gap of g).
inline EigenstateResult extract_eigenstate(const Mat3& h, Filter which, cplx alpha = 1.5, double T = 0.0,
                                           double tol = 1e-10) {
  if (!all_finite(h)) throw InvalidArgument("extract_eigenstate: H must be finite");
  if (!(tol > 0.0)) throw InvalidArgument("extract_eigenstate: tol must be > 0");
  const Mat3 g = filter_generator(h, which, alpha);

  Eigen::ComplexEigenSolver<Mat3> es(g);
  std::array<double, 3> im{es.eigenvalues()(0).imag(), es.eigenvalues()(1).imag(), es.eigenvalues()(2).imag()};
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return im[a] > im[b]; });
  const double gap = im[order[0]] - im[order[1]];
  if (!(gap > 1e-9))
    throw NoConvergence("extract_eigenstate: the two largest Im parts of g(H) are within 1e-9 (degenerate filter)");
  const double top = im[order[0]];
  if (!(T > 0.0)) T = 5.0 / gap;

  // Left eigenvector of the dominant mode decides whether the start vector sees it.
  const Mat3 v = es.eigenvectors();
  const Mat3 vinv = v.inverse();
  Vec3 x = Vec3(1.0, 1.0, 1.0) / std::sqrt(3.0);
  if (std::abs(cplx(vinv.row(order[0]) * x)) < 1e-8 * vinv.row(order[0]).norm()) {
    x = Vec3(1.0, cplx(1.0, 1e-3), 1.0 - 2e-3);
    x.normalize();
  }

  const Mat3 step = Mat3((-kI * (g - kI * top * Mat3::Identity()) * T).exp());
  long n = 0;
  for (; n < kMaxFilterSteps; ++n) {
    Vec3 y = step * x;
    const double ny = y.norm();
    if (!(ny > 0.0) || !std::isfinite(ny)) throw NoConvergence("extract_eigenstate: iteration lost the state");
    y /= ny;
    const cplx ov = x.dot(y);
    if (std::abs(ov) > 0.0) y *= std::conj(ov) / std::abs(ov);
    const double change = (y - x).norm();
    x = y;
    if (change < tol) break;
  }
  if (n == kMaxFilterSteps) throw NoConvergence("extract_eigenstate: no steady state within 1e6 steps");

  const auto roots = eigenvalues_cubic(char_poly(h));
  cplx best = roots[0];
  double best_res = std::numeric_limits<double>::infinity();
  for (auto z : roots) {
    const double r = (h * x - z * x).norm();
    if (r < best_res) {
      best_res = r;
      best = z;
    }
  }
  return {DensityMatrix3::pure(x), x, best, n + 1};
}

inline EigenstateResult extract_eigenstate(const NHMatrix& h, Filter which, cplx alpha = 1.5, double T = 0.0,
                                           double tol = 1e-10) {
  return extract_eigenstate(h.matrix(), which, alpha, T, tol);
}

/// Eigenstates labelled E1, E2, E3 by descending real part (ties: descending
/// imaginary part) with their pairwise fidelities.
struct EigenstateTable {
  std::array<cplx, 3> eigenvalues{};
  std::array<Filter, 3> filters{};
  std::array<cplx, 3> alphas{};
  std::vector<EigenstateResult> states;
  std::array<std::array<double, 3>, 3> F{};
  bool degenerate = false;
};

inline std::array<cplx, 3> label_eigenvalues(const Roots3& r, double tol = 1e-9) {
  std::array<cplx, 3> e{r[0], r[1], r[2]};
  std::sort(e.begin(), e.end(), [&](cplx a, cplx b) {
    if (std::abs(a.real() - b.real()) > tol) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return e;
}

inline EigenstateTable eigenstate_table(const ModelParams& p, double tol = 1e-10) {
  p.validate();
  const Mat3 h = build_hamiltonian(p).matrix();
  EigenstateTable t;
  t.eigenvalues = label_eigenvalues(eigenvalues_cubic(char_poly(h)));
  const auto& e = t.eigenvalues;
  double scale = 1.0;
  for (auto z : e) scale = std::max(scale, std::abs(z));
  double dmin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) dmin = std::min(dmin, std::abs(e[a] - e[b]));
  for (auto& row : t.F) row.fill(std::numeric_limits<double>::quiet_NaN());
  if (dmin < 1e-6 * scale) {
    t.degenerate = true;
    return t;
  }

  for (int k = 0; k < 3; ++k) {
    bool top = true, bottom = true;
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) {
      if (j == k) continue;
      if (!(e[k].imag() > e[j].imag() + 1e-9)) top = false;
      if (!(e[k].imag() < e[j].imag() - 1e-9)) bottom = false;
      d = std::min(d, std::abs(e[k] - e[j]));
    }
    t.filters[k] = top ? Filter::Top : bottom ? Filter::Bottom : Filter::Middle;
    t.alphas[k] = e[k] + d / 4.0;
    t.states.push_back(extract_eigenstate(h, t.filters[k], t.alphas[k], 0.0, tol));
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) t.F[a][b] = fidelity(t.states[a].rho, t.states[b].rho);
  return t;
}

}  // namespace nhep
