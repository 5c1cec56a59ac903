#pragma once

// Fluorescence-count model over the six levels: counts C = L^T M p for a
// sequence of pi pulses M, and the linear / polarization inversions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nhep/error.hpp"

namespace nhep {

using Vec6d = Eigen::Matrix<double, 6, 1>;
using Mat6d = Eigen::Matrix<double, 6, 6>;

struct ReadoutModel {
  // Synthetic rates, counts/s; m_S = 0 bright.  Not measured values.
  std::array<double, 6> L{0.72 * 150000, 1.00 * 150000, 0.68 * 150000, 0.62 * 150000, 0.90 * 150000, 0.58 * 150000};
  double S = 0.98;
  bool shot_noise = false;
  long long averages = 1000000;
  std::uint64_t seed = 0;
  double readout_window_s = 300e-9;

  void validate() const {
    for (double l : L)
      if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("ReadoutModel: L must be finite and > 0");
    if (!(S > 0.0 && S <= 1.0)) throw InvalidArgument("ReadoutModel: S must lie in (0, 1]");
    if (averages < 1) throw InvalidArgument("ReadoutModel: averages must be >= 1");
    if (!(readout_window_s > 0.0)) throw InvalidArgument("ReadoutModel: readout window must be > 0");
  }
};

/// pi pulse swapping two levels (1-based labels).
struct Transition {
  int a, b;
  bool operator==(const Transition&) const = default;
};

inline const std::array<Transition, 5> kAllowedTransitions{{{1, 2}, {2, 3}, {2, 5}, {3, 6}, {4, 5}}};

/// Pulses in application order; empty = identity.
using PulseSeq = std::vector<Transition>;

inline Transition make_transition(int a, int b) {
  const Transition t{std::min(a, b), std::max(a, b)};
  if (std::find(kAllowedTransitions.begin(), kAllowedTransitions.end(), t) == kAllowedTransitions.end())
    throw InvalidArgument("transition R" + std::to_string(a) + std::to_string(b) + " is not available");
  return t;
}

/// "I", "R12", "R23+R36" (left to right = application order).
inline PulseSeq parse_sequence(const std::string& text) {
  PulseSeq seq;
  if (text == "I" || text.empty()) return seq;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    if (tok.size() != 3 || tok[0] != 'R' || !std::isdigit(tok[1]) || !std::isdigit(tok[2]))
      throw InvalidArgument("parse_sequence: bad token '" + tok + "'");
    seq.push_back(make_transition(tok[1] - '0', tok[2] - '0'));
  }
  return seq;
}

inline std::string to_string(const PulseSeq& seq) {
  if (seq.empty()) return "I";
  std::string s;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (k) s += "+";
    s += "R" + std::to_string(seq[k].a) + std::to_string(seq[k].b);
  }
  return s;
}

inline Mat6d sequence_permutation(const PulseSeq& seq) {
  Mat6d m = Mat6d::Identity();
  for (const auto& tr : seq) {
    const Transition t = make_transition(tr.a, tr.b);
    Mat6d p = Mat6d::Identity();
    p(t.a - 1, t.a - 1) = p(t.b - 1, t.b - 1) = 0.0;
    p(t.a - 1, t.b - 1) = p(t.b - 1, t.a - 1) = 1.0;
    m = p * m;
  }
  return m;
}

inline std::vector<PulseSeq> measurement_sequences() {
  return {parse_sequence("I"), parse_sequence("R12"), parse_sequence("R23"), parse_sequence("R36+R23"),
          parse_sequence("R25")};
}

inline std::vector<PulseSeq> normalization_sequences() {
  return {parse_sequence("I"),       parse_sequence("R12"), parse_sequence("R23"),
          parse_sequence("R23+R36"), parse_sequence("R25"), parse_sequence("R25+R45")};
}

inline std::vector<PulseSeq> polarization_sequences() {
  return {parse_sequence("I"), parse_sequence("R23"), parse_sequence("R25"), parse_sequence("R23+R36"),
          parse_sequence("R23+R25")};
}

/// (1-S)/2 in levels 1 and 3, S in level 2.
inline Vec6d polarized_state(double S) {
  const double q = (1.0 - S) / 2.0;
  Vec6d p;
  p << q, S, q, 0, 0, 0;
  return p;
}

inline Vec6d to_vec(const std::array<double, 6>& a) { return Eigen::Map<const Vec6d>(a.data()); }

/// Mean count rate L^T M p (counts/s); with shot noise, a Poisson draw of the
/// photon number over averages x window, rescaled to counts/s.
inline double simulate_counts(const Vec6d& p, const ReadoutModel& model, const PulseSeq& seq,
                              std::mt19937_64* rng = nullptr) {
  model.validate();
  if (!p.allFinite() || p.minCoeff() < -1e-12 || std::abs(p.sum() - 1.0) > 1e-9)
    throw InvalidArgument("simulate_counts: populations must be >= 0 and sum to 1");
  const double c = to_vec(model.L).dot(sequence_permutation(seq) * p);
  if (!model.shot_noise) return c;
  if (!rng) throw InvalidArgument("simulate_counts: shot noise needs a seeded generator");
  const double scale = static_cast<double>(model.averages) * model.readout_window_s;
  std::poisson_distribution<long long> pois(c * scale);
  return static_cast<double>(pois(*rng)) / scale;
}

inline std::vector<double> simulate_counts(const Vec6d& p, const ReadoutModel& model, const std::vector<PulseSeq>& seqs,
                                           std::mt19937_64* rng = nullptr) {
  std::vector<double> out;
  for (const auto& s : seqs) out.push_back(simulate_counts(p, model, s, rng));
  return out;
}

inline double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
}

inline constexpr double kMaxCondition = 1e10;

/// L from the six normalization sequences applied to the polarized state.
inline std::array<double, 6> solve_normalization(const std::vector<double>& counts, double S) {
  if (counts.size() != 6) throw InvalidArgument("solve_normalization: need 6 counts");
  const auto seqs = normalization_sequences();
  const Vec6d p = polarized_state(S);
  Mat6d a;
  Vec6d b;
  for (int m = 0; m < 6; ++m) {
    a.row(m) = (sequence_permutation(seqs[m]) * p).transpose();
    b(m) = counts[m];
  }
  if (condition_number(a) > kMaxCondition) throw SingularSystem("solve_normalization: equations are dependent");
  const Vec6d l = a.fullPivLu().solve(b);
  std::array<double, 6> out{};
  for (int i = 0; i < 6; ++i) out[i] = l(i);
  return out;
}

struct PolarizationSolution {
  double S = 0.0;
  double L2 = 0.0, L3 = 0.0, L5 = 0.0, L6 = 0.0;
  double condition = 0.0;  // 5x5 Jacobian at the solution
};

/// Solves the five polarization equations for (L2, L3, L5, L6, S).  Level 1
/// keeps (1-S)/2 * L1 in every sequence; L1 is taken as known.
inline PolarizationSolution solve_polarization(const std::vector<double>& counts, double L1) {
  if (counts.size() != 5) throw InvalidArgument("solve_polarization: need 5 counts");
  for (double c : counts)
    if (!std::isfinite(c)) throw InvalidArgument("solve_polarization: counts must be finite");
  const double c1 = counts[0], c2 = counts[1], c3 = counts[2], c4 = counts[3], c5 = counts[4];

  struct Partial {
    double L2, L3, L5, L6, r;
  };
  auto eval = [&](double S) {
    const double q = (1.0 - S) / 2.0;
    const double k = L1 * q;
    const double det = S * S - q * q;
    Partial z{};
    z.L2 = (S * (c1 - k) - q * (c2 - k)) / det;
    z.L3 = (S * (c2 - k) - q * (c1 - k)) / det;
    z.L5 = (c3 - k - z.L3 * q) / S;
    z.L6 = (c4 - k - z.L2 * q) / S;
    z.r = z.L3 * S + z.L5 * q - (c5 - k);
    return z;
  };

  const double scale = std::max({std::abs(c1), std::abs(c2), std::abs(c3), std::abs(c4), std::abs(c5), 1.0});
  std::vector<double> roots;
  const double lo = 1.0 / 3.0 + 1e-9;
  const int n = 4000;
  double xprev = lo, rprev = eval(lo).r;
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (1.0 - lo) * i / n;
    const double r = eval(x).r;
    if (r == 0.0) {
      roots.push_back(x);
    } else if (rprev != 0.0 && (r < 0.0) != (rprev < 0.0)) {
      double a = xprev, b = x, fa = rprev;
      for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = eval(m).r;
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    xprev = x;
    rprev = r;
  }
  if (roots.empty() && std::abs(eval(1.0).r) <= 1e-12 * scale) roots.push_back(1.0);

  std::vector<PolarizationSolution> ok;
  for (double S : roots) {
    const auto z = eval(S);
    if (z.L2 > 0 && z.L3 > 0 && z.L5 > 0 && z.L6 > 0) {
      const double q = (1.0 - S) / 2.0;
      Eigen::Matrix<double, 5, 5> j;
      j << S, q, 0, 0, -L1 / 2 + z.L2 - z.L3 / 2,  //
          q, S, 0, 0, -L1 / 2 - z.L2 / 2 + z.L3,   //
          0, q, S, 0, -L1 / 2 - z.L3 / 2 + z.L5,   //
          q, 0, 0, S, -L1 / 2 - z.L2 / 2 + z.L6,   //
          0, S, q, 0, -L1 / 2 + z.L3 - z.L5 / 2;
      ok.push_back({S, z.L2, z.L3, z.L5, z.L6, condition_number(j)});
    }
  }
  if (ok.empty()) throw NoSolution("solve_polarization: no S in (1/3, 1] with positive rates fits the counts");
  if (ok.size() > 1) {
    for (std::size_t k = 1; k < ok.size(); ++k)
      if (std::abs(ok[k].S - ok[0].S) > 1e-9)
        throw NoSolution("solve_polarization: counts admit several polarizations");
  }
  return ok.front();
}

struct PopulationSolution {
  Vec6d p;
  double p0 = 0.0;  // p2 / (p1 + p2 + p3)
  double condition = 0.0;
};

inline Mat6d population_system(const ReadoutModel& model) {
  const auto seqs = measurement_sequences();
  Mat6d a;
  for (int m = 0; m < 5; ++m) a.row(m) = to_vec(model.L).transpose() * sequence_permutation(seqs[m]);
  a.row(5).setOnes();
  return a;
}

/// Populations from the five measurement sequences plus sum(p) = 1.
inline PopulationSolution solve_populations(const std::vector<double>& counts, const ReadoutModel& model) {
  if (counts.size() != 5) throw InvalidArgument("solve_populations: need 5 counts");
  model.validate();
  const Mat6d a = population_system(model);
  const double cond = condition_number(a);
  if (cond > kMaxCondition)
    throw SingularSystem("solve_populations: rates make the measurement equations dependent (cond " +
                         std::to_string(cond) + ")");
  Vec6d b;
  for (int m = 0; m < 5; ++m) b(m) = counts[m];
  b(5) = 1.0;
  PopulationSolution out;
  out.p = a.fullPivLu().solve(b);
  out.p0 = out.p(1) / (out.p(0) + out.p(1) + out.p(2));
  out.condition = cond;
  return out;
}

}  // namespace nhep
