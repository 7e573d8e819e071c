#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "polylab/error.hpp"
#include "polylab/renewal.hpp"
#include "polylab/rng.hpp"

using namespace polylab;

namespace {

OpenContour random_path(CounterRng& rng, int max_len) {
  for (;;) {
    int len = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_len));
    std::vector<Step> steps;
    for (int i = 0; i < len; ++i) {
      // Biased towards E and N so that break points are common.
      std::uint64_t r = rng.next() % 8;
      Step s = r < 3 ? Step::E : r < 6 ? Step::N : r == 6 ? Step::W : Step::S;
      steps.push_back(s);
    }
    if (is_valid_contour({0, 0}, steps)) return OpenContour({0, 0}, steps);
  }
}

std::vector<std::size_t> break_points_oracle(const OpenContour& g) {
  const auto& v = g.vertices();
  std::vector<std::size_t> out;
  for (std::size_t l = 1; l < g.length(); ++l) {
    bool ok = true;
    for (std::size_t j = 0; j < v.size() && ok; ++j) {
      if (j < l) ok = in_cone(v[l], v[j]);
      if (j > l) ok = in_cone(v[j], v[l]);
    }
    if (ok) out.push_back(l);
  }
  return out;
}

std::set<std::string> bare_words(const AnimalTable& t) {
  std::set<std::string> out;
  for (const auto& e : t.entries) {
    if (!e.decorated) out.insert(format_steps(e.steps));
  }
  return out;
}

}  // namespace

TEST(BreakPoints, Examples) {
  EXPECT_EQ(break_points(OpenContour({0, 0}, parse_steps("EEE"))), (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(break_points(OpenContour({0, 0}, parse_steps("EESEE"))).empty());
  EXPECT_TRUE(break_points(OpenContour({0, 0}, parse_steps("E"))).empty());
  EXPECT_TRUE(is_irreducible(OpenContour({0, 0}, parse_steps("NNWNN"))));
}

TEST(BreakPoints, MatchQuadraticOracle) {
  CounterRng rng(7, 1);
  for (int i = 0; i < 2000; ++i) {
    auto g = random_path(rng, 14);
    EXPECT_EQ(break_points(g), break_points_oracle(g)) << format_steps(g.steps());
  }
}

TEST(Decompose, StraightLineIsAllLetters) {
  auto d = decompose(OpenContour({0, 0}, parse_steps("EEEE")));
  EXPECT_FALSE(d.left);
  EXPECT_FALSE(d.right);
  ASSERT_EQ(d.middle.size(), 4u);
  for (const auto& m : d.middle) EXPECT_EQ(format_steps(m.steps()), "E");
}

TEST(Decompose, TwoBasicAnimals) {
  auto d = decompose(OpenContour({0, 0}, parse_steps("EESEEEESEE")));
  EXPECT_EQ(d.break_indices, (std::vector<std::size_t>{5}));
  ASSERT_EQ(d.middle.size(), 2u);
  EXPECT_EQ(format_steps(d.middle[0].steps()), "EESEE");
  EXPECT_EQ(format_steps(d.middle[1].steps()), "EESEE");
}

TEST(Decompose, RoundTripAndLetters) {
  CounterRng rng(11, 2);
  for (int i = 0; i < 1000; ++i) {
    auto g = random_path(rng, 14);
    auto d = decompose(g);
    auto back = d.concatenate();
    EXPECT_EQ(back.steps(), g.steps());
    EXPECT_EQ(back.start(), g.start());
    for (const auto& m : d.middle) {
      EXPECT_TRUE(in_diamond_class(m));
      EXPECT_TRUE(is_irreducible(m));
    }
  }
}

TEST(Animals, LengthOneIsTheTwoSteps) {
  AnimalTableSettings s;
  s.len_cap = 1;
  auto t = enumerate_irreducible_animals(s);
  EXPECT_EQ(bare_words(t), (std::set<std::string>{"E", "N"}));
}

TEST(Animals, BasicShapesAndBareIrreducible) {
  AnimalTableSettings s;
  s.len_cap = 5;
  auto t = enumerate_irreducible_animals(s);
  auto words = bare_words(t);
  EXPECT_TRUE(words.count("EESEE"));
  EXPECT_TRUE(words.count("NNWNN"));
  for (const auto& e : t.entries) {
    auto g = t.contour(&e - t.entries.data());
    EXPECT_TRUE(in_diamond_class(g));
    if (!e.decorated) EXPECT_EQ(e.break_points, 0);
    EXPECT_TRUE(std::isfinite(e.log_q));
  }
}

TEST(Animals, ExtensionMatchesFilteredFullTable) {
  AnimalTableSettings ext;
  ext.len_cap = 6;
  ext.extended_len_cap = 11;
  ext.max_excess = 3;
  AnimalTableSettings full;
  full.len_cap = 11;
  auto a = enumerate_irreducible_animals(ext);
  auto b = enumerate_irreducible_animals(full);
  std::set<std::string> expected;
  for (const auto& e : b.entries) {
    if (!e.decorated && (e.length <= 6 || path_excess(e.displacement, e.length) <= 3)) {
      expected.insert(format_steps(e.steps));
    }
  }
  EXPECT_EQ(bare_words(a), expected);
}

TEST(Animals, Errors) {
  AnimalTableSettings s;
  s.len_cap = 0;
  EXPECT_THROW(enumerate_irreducible_animals(s), Error);
  s.len_cap = 6;
  s.extended_len_cap = 10;
  s.max_excess = -1;
  EXPECT_THROW(enumerate_irreducible_animals(s), Error);
}

TEST(CoveringSum, MatchesSubsetEnumeration) {
  CounterRng rng(3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::uint32_t full = (1u << (1 + rng.next() % 4)) - 1;
    std::vector<std::pair<std::uint32_t, double>> groups;
    int n = 1 + static_cast<int>(rng.next() % 6);
    for (int i = 0; i < n; ++i) groups.emplace_back(static_cast<std::uint32_t>(rng.next() % 16), rng.uniform());
    double brute = 0.0;
    for (std::uint32_t sub = 0; sub < (1u << n); ++sub) {
      std::uint32_t cover = 0;
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        if (sub & (1u << i)) {
          cover |= groups[i].first;
          w *= groups[i].second;
        }
      }
      if ((cover & full) == full) brute += w;
    }
    EXPECT_NEAR(covering_sum(groups, full), brute, 1e-12 * (1 + brute));
  }
}

class TiltTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    AnimalTableSettings s;
    s.beta = 4.0;
    s.len_cap = 7;
    table_ = new AnimalTable(enumerate_irreducible_animals(s));
  }
  static void TearDownTestSuite() { delete table_; }
  static AnimalTable* table_;
};

AnimalTable* TiltTest::table_ = nullptr;

TEST_F(TiltTest, DiagonalIsSymmetric) {
  auto t = tilt_solve({1, 1}, *table_);
  EXPECT_TRUE(t.converged);
  EXPECT_NEAR(t.a, t.b, 1e-12);
}

TEST_F(TiltTest, ResidualsAndBasicAnimals) {
  for (double eps : {0.0, 0.01, 0.2, 0.5}) {
    auto t = tilt_solve_epsilon(eps, *table_);
    EXPECT_TRUE(t.converged) << eps;
    EXPECT_LT(t.normalization_residual, 1e-12);
    EXPECT_LT(t.collinearity_residual, 1e-12);
    auto c = basic_animal_check(t, *table_);
    EXPECT_LT(c.max_rel_err, 1e-13);
    EXPECT_GT(c.deficiency, 0.0);
  }
}

TEST_F(TiltTest, DirectionMustBeInQuadrant) {
  EXPECT_THROW(tilt_solve({-1, 1}, *table_), Error);
  EXPECT_THROW(tilt_solve({0, 0}, *table_), Error);
  EXPECT_THROW(tilt_solve_epsilon(1.5, *table_), Error);
}

TEST_F(TiltTest, WulffHessianAboveBasicBound) {
  for (double eps : {0.0, 0.1, 0.3}) {
    auto t = tilt_solve_epsilon(eps, *table_);
    auto w = wulff_curvature(t, *table_);
    EXPECT_FALSE(w.singular);
    EXPECT_GE(w.hess_perp, w.hess_lower_bound * (1 - 1e-12));
    EXPECT_GT(w.curvature, 0.0);
  }
}

TEST_F(TiltTest, MassGapGrowsWithBeta) {
  auto g4 = mass_gap_measure(*table_, tilt_solve_epsilon(0.0, *table_));
  AnimalTableSettings s;
  s.beta = 6.0;
  s.len_cap = 7;
  auto t6 = enumerate_irreducible_animals(s);
  auto g6 = mass_gap_measure(t6, tilt_solve_epsilon(0.0, t6));
  EXPECT_GT(g4.rate, 0.0);
  EXPECT_GT(g6.rate, g4.rate);
  EXPECT_NEAR(g4.suggested_delta, g4.nu_hat / 4, 1e-15);
}

TEST(MassGap, DegenerateAtLengthOne) {
  AnimalTableSettings s;
  s.len_cap = 1;
  auto t = enumerate_irreducible_animals(s);
  auto g = mass_gap_measure(t, tilt_solve_epsilon(0.0, t));
  EXPECT_TRUE(g.degenerate);
}

TEST(Tilt, ExcessExtensionRemovesTheFlatBias) {
  // At ε = 0 the exact tilt has β − b = 0; the extended table must agree within its own uncertainty.
  AnimalTableSettings s;
  s.beta = 4.0;
  s.len_cap = 8;
  s.extended_len_cap = 24;
  s.max_excess = 5;
  auto t = tilt_solve_epsilon(0.0, enumerate_irreducible_animals(s));
  EXPECT_LE(std::abs(t.beta - t.b), t.b_uncertainty);
  EXPECT_LT(t.b_uncertainty, 0.05 * std::exp(-4.0));
}
