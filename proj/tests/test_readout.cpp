#include <gtest/gtest.h>

#include <random>

#include "nhep/readout.hpp"

using namespace nhep;

namespace {

// apply swaps by hand, independent of the permutation matrices
Vec6d swapped(Vec6d p, const std::vector<std::pair<int, int>>& swaps) {
  for (auto [a, b] : swaps) std::swap(p(a - 1), p(b - 1));
  return p;
}

double dotL(const ReadoutModel& m, const Vec6d& p) {
  double c = 0;
  for (int i = 0; i < 6; ++i) c += m.L[i] * p(i);
  return c;
}

Vec6d random_pop(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0, 1);
  Vec6d p;
  for (int i = 0; i < 6; ++i) p(i) = u(g);
  return p / p.sum();
}

}  // namespace

TEST(Sequences, PermutationsAreOrthogonal) {
  for (const auto& set : {measurement_sequences(), normalization_sequences(), polarization_sequences()})
    for (const auto& s : set) {
      const Mat6d m = sequence_permutation(s);
      EXPECT_LT((m * m.transpose() - Mat6d::Identity()).norm(), 1e-15);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) EXPECT_TRUE(m(i, j) == 0.0 || m(i, j) == 1.0);
    }
}

TEST(Sequences, CompositionOrder) {
  // R23 first, then R36: level 2 ends up in 6
  Vec6d e = Vec6d::Zero();
  e(1) = 1;
  const Vec6d out = sequence_permutation(parse_sequence("R23+R36")) * e;
  EXPECT_EQ(out(5), 1.0);
  const Vec6d other = sequence_permutation(parse_sequence("R36+R23")) * e;
  EXPECT_EQ(other(2), 1.0);
}

TEST(Sequences, ParseAndPrint) {
  EXPECT_EQ(to_string(parse_sequence("R23+R36")), "R23+R36");
  EXPECT_EQ(to_string(parse_sequence("I")), "I");
  EXPECT_EQ(parse_sequence("R21")[0], (Transition{1, 2}));
  EXPECT_THROW(parse_sequence("R14"), InvalidArgument);
  EXPECT_THROW(parse_sequence("X12"), InvalidArgument);
  EXPECT_THROW(parse_sequence("R2"), InvalidArgument);
}

TEST(Counts, Examples) {
  ReadoutModel m;
  Vec6d e2 = Vec6d::Zero();
  e2(1) = 1;
  EXPECT_DOUBLE_EQ(simulate_counts(e2, m, parse_sequence("I")), m.L[1]);
  EXPECT_DOUBLE_EQ(simulate_counts(e2, m, parse_sequence("R25")), m.L[4]);
  const Vec6d p = polarized_state(0.98);
  EXPECT_NEAR(simulate_counts(p, m, parse_sequence("I")), 0.01 * m.L[0] + 0.98 * m.L[1] + 0.01 * m.L[2], 1e-9);
  EXPECT_THROW(simulate_counts(Vec6d::Constant(0.5), m, parse_sequence("I")), InvalidArgument);
  ReadoutModel noisy;
  noisy.shot_noise = true;
  EXPECT_THROW(simulate_counts(p, noisy, parse_sequence("I")), InvalidArgument);
}

TEST(Counts, MatchHandPermutedOracle) {
  std::mt19937_64 g(12);
  ReadoutModel m;
  const std::vector<std::vector<std::pair<int, int>>> swaps{{}, {{1, 2}}, {{2, 3}}, {{3, 6}, {2, 3}}, {{2, 5}}};
  const auto seqs = measurement_sequences();
  for (int k = 0; k < 50; ++k) {
    const Vec6d p = random_pop(g);
    for (std::size_t s = 0; s < seqs.size(); ++s)
      EXPECT_NEAR(simulate_counts(p, m, seqs[s]), dotL(m, swapped(p, swaps[s])), 1e-9);
  }
}

TEST(Counts, LinearInPopulations) {
  std::mt19937_64 g(13);
  ReadoutModel m;
  for (int k = 0; k < 20; ++k) {
    const Vec6d a = random_pop(g), b = random_pop(g);
    const double w = 0.3;
    for (const auto& s : measurement_sequences())
      EXPECT_NEAR(simulate_counts(Vec6d(w * a + (1 - w) * b), m, s),
                  w * simulate_counts(a, m, s) + (1 - w) * simulate_counts(b, m, s), 1e-8);
  }
}

TEST(Counts, ShotNoiseDeterministicAndUnbiased) {
  ReadoutModel m;
  m.shot_noise = true;
  const Vec6d p = polarized_state(0.98);
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(simulate_counts(p, m, measurement_sequences(), &a), simulate_counts(p, m, measurement_sequences(), &b));
  std::mt19937_64 g(6);
  double mean = 0;
  const int n = 400;
  for (int k = 0; k < n; ++k) mean += simulate_counts(p, m, parse_sequence("I"), &g) / n;
  const double exact = simulate_counts(p, ReadoutModel{}, parse_sequence("I"));
  const double sd = std::sqrt(exact / (m.averages * m.readout_window_s));
  EXPECT_NEAR(mean, exact, 5 * sd / std::sqrt(n));
}

TEST(Populations, Roundtrip) {
  std::mt19937_64 g(14);
  ReadoutModel m;
  for (int k = 0; k < 100; ++k) {
    const Vec6d p = random_pop(g);
    const auto sol = solve_populations(simulate_counts(p, m, measurement_sequences()), m);
    EXPECT_LT((sol.p - p).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(sol.p0, p(1) / (p(0) + p(1) + p(2)), 1e-10);
  }
}

TEST(Populations, EqualRatesAreSingular) {
  ReadoutModel m;
  m.L.fill(1e5);
  EXPECT_THROW(solve_populations({1e5, 1e5, 1e5, 1e5, 1e5}, m), SingularSystem);
  EXPECT_THROW(solve_populations({1, 2, 3}, ReadoutModel{}), InvalidArgument);
}

TEST(Populations, ValidateModel) {
  ReadoutModel m;
  m.S = 1.5;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = ReadoutModel{};
  m.L[2] = -1;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Polarization, RecoversSAndRates) {
  ReadoutModel m;
  for (double S : {0.98, 0.9, 0.7, 1.0}) {
    const auto c = simulate_counts(polarized_state(S), m, polarization_sequences());
    const auto sol = solve_polarization(c, m.L[0]);
    EXPECT_NEAR(sol.S, S, 1e-9) << S;
    EXPECT_NEAR(sol.L2, m.L[1], 1e-6 * m.L[1]);
    EXPECT_NEAR(sol.L3, m.L[2], 1e-6 * m.L[2]);
    EXPECT_NEAR(sol.L5, m.L[4], 1e-6 * m.L[4]);
    EXPECT_NEAR(sol.L6, m.L[5], 1e-6 * m.L[5]);
    EXPECT_TRUE(std::isfinite(sol.condition));
  }
}

TEST(Polarization, NoisyCountsStayClose) {
  ReadoutModel m;
  m.shot_noise = true;
  m.averages = 1000000000;
  std::mt19937_64 g(77);
  for (int rep = 0; rep < 5; ++rep) {
    const auto c = simulate_counts(polarized_state(0.98), m, polarization_sequences(), &g);
    EXPECT_NEAR(solve_polarization(c, m.L[0]).S, 0.98, 0.01);
  }
}

TEST(Polarization, RejectsBadInput) {
  EXPECT_THROW(solve_polarization({1, 2, 3}, 1e5), InvalidArgument);
  EXPECT_THROW(solve_polarization({-1e5, -1e5, -1e5, -1e5, -1e5}, 1e5), NoSolution);
}

TEST(Normalization, RecoversRates) {
  ReadoutModel m;
  const auto c = simulate_counts(polarized_state(0.98), m, normalization_sequences());
  const auto l = solve_normalization(c, 0.98);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(l[i], m.L[i], 1e-6 * m.L[i]);
  EXPECT_THROW(solve_normalization({1, 2}, 0.98), InvalidArgument);
}

TEST(Readout, PipelineReturnsP0) {
  // populations after a known electron state, read back through counts
  ReadoutModel m;
  Vec6d p = Vec6d::Zero();
  p(0) = 0.2;
  p(1) = 0.5;
  p(2) = 0.3;
  const auto c = simulate_counts(p, m, measurement_sequences());
  const auto l = solve_normalization(simulate_counts(polarized_state(m.S), m, normalization_sequences()), m.S);
  ReadoutModel fitted = m;
  fitted.L = l;
  EXPECT_NEAR(solve_populations(c, fitted).p0, 0.5, 1e-9);
}
