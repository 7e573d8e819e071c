#include <gtest/gtest.h>

#include <cmath>

#include "polylab/contours.hpp"
#include "polylab/effective_walk.hpp"
#include "polylab/error.hpp"
#include "polylab/rng.hpp"

using namespace polylab;

namespace {

TiltVector make_tilt(double beta, double a, double b) {
  TiltVector t;
  t.beta = beta;
  t.a = a;
  t.b = b;
  t.h = {beta - a, beta - b};
  t.delta_a = 4 * a + (beta - b);
  t.delta_b = 4 * b + (beta - a);
  return t;
}

// Sum over every step sequence from u to v of the product of step probabilities.
double brute_green(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law, WallConstraint c) {
  auto marg = law.marginal();
  double total = 0.0;
  auto rec = [&](auto&& self, LatticePoint here, double w, bool first) -> void {
    if (here == v && !first) {
      total += w;
      return;
    }
    if (!first) {
      if (c == WallConstraint::NonStrict && n.dot(here) < 0) return;
      if (c == WallConstraint::Strict && n.dot(here) <= 0) return;
    }
    if ((v - here).x + (v - here).y <= 0) return;
    for (const auto& [x, p] : marg) self(self, here + x, w * p, false);
  };
  if (u == v) return 1.0;
  rec(rec, u, 1.0, true);
  return total;
}

class WalkTest : public ::testing::Test {
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

AnimalTable* WalkTest::table_ = nullptr;

}  // namespace

TEST(StepLaw, BasicSymmetricOnTheDiagonal) {
  auto law = build_basic_law(make_tilt(4.0, 0.7, 0.7));
  EXPECT_DOUBLE_EQ(law.prob({1, 0}), law.prob({0, 1}));
  EXPECT_DOUBLE_EQ(law.prob({4, -1}), law.prob({-1, 4}));
  EXPECT_DOUBLE_EQ(law.prob({1, 0}), std::exp(-0.7));
  EXPECT_EQ(build_basic_law(make_tilt(4.0, 0.7, 0.7), false).atoms.size(), 3u);
}

TEST(StepLaw, ModeNames) {
  EXPECT_EQ(parse_step_law_mode("table"), StepLawMode::Table);
  EXPECT_STREQ(step_law_mode_name(StepLawMode::Basic), "BASIC");
  EXPECT_THROW(parse_step_law_mode("other"), Error);
}

TEST_F(WalkTest, TableMatchesBasicAtomsAndNonBasicMassIsSmall) {
  auto t = tilt_solve_epsilon(0.0, *table_);
  auto basic = build_basic_law(t);
  auto table = build_table_law(t, *table_);
  EXPECT_NEAR(table.total, 1.0, 1e-12);
  EXPECT_GE(table.prob({1, 0}), basic.prob({1, 0}) * (1 - 1e-15));
  EXPECT_LT(table.nonbasic_second_moment, 50 * std::exp(-2 * 4.0));
  for (const auto& a : table.atoms) EXPECT_TRUE(in_cone(a.x, {0, 0}));
}

TEST(Green, TrivialCases) {
  auto law = build_basic_law(make_tilt(4.0, 0.05, 3.9));
  auto n = WallDirection::horizontal();
  auto g = constrained_green({2, 0}, {2, 0}, n, law);
  EXPECT_EQ(g.p_plus, 1.0);
  g = constrained_green({0, 0}, {1, 0}, n, law);
  EXPECT_DOUBLE_EQ(g.p_plus, std::exp(-0.05));
  EXPECT_DOUBLE_EQ(g.p_hat_plus, std::exp(-0.05));
  EXPECT_EQ(constrained_green({0, 0}, {-1, 0}, n, law).p_plus, 0.0);
}

TEST(Green, MatchesSequenceEnumeration) {
  auto law = build_basic_law(make_tilt(3.0, 0.3, 1.1));
  for (auto n : {WallDirection::horizontal(), WallDirection(1, 2), WallDirection(-1, 3)}) {
    for (Coord x = -6; x <= 6; ++x) {
      for (Coord y = -6; y <= 6; ++y) {
        LatticePoint u{0, 0}, v{x, y};
        if (norm1(v) > 6 || n.dot(v) < 0) continue;
        auto g = constrained_green(u, v, n, law);
        double bp = brute_green(u, v, n, law, WallConstraint::NonStrict);
        double bs = brute_green(u, v, n, law, WallConstraint::Strict);
        EXPECT_NEAR(g.p_plus, bp, 1e-15 * (1 + bp));
        EXPECT_NEAR(g.p_hat_plus, bs, 1e-15 * (1 + bs));
        EXPECT_LE(g.p_hat_plus, g.p_plus);
        double bf = brute_green(u, v, n, law, WallConstraint::None);
        EXPECT_NEAR(walk_green(u, v, n, law, WallConstraint::None), bf, 1e-15 * (1 + bf));
      }
    }
  }
}

TEST(Green, StepCapTruncates) {
  auto law = build_basic_law(make_tilt(3.0, 0.3, 1.1));
  auto n = WallDirection::horizontal();
  LatticePoint v{4, 0};
  EXPECT_NEAR(walk_green({0, 0}, v, n, law, WallConstraint::NonStrict, 1), 0.0, 1e-300);
  EXPECT_NEAR(walk_green({0, 0}, v, n, law, WallConstraint::NonStrict, 3),
              walk_green({0, 0}, v, n, law, WallConstraint::NonStrict, -1) - std::pow(law.prob({1, 0}), 4), 1e-15);
}

TEST(Green, FreeGreenAgreesWithWalkGreen) {
  auto law = build_basic_law(make_tilt(3.0, 0.3, 1.1));
  std::vector<LatticePoint> xs{{1, 0}, {5, 2}, {3, 3}, {-1, 4}, {0, 0}};
  auto g = free_green(xs, law);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(g[i], walk_green({0, 0}, xs[i], WallDirection::horizontal(), law, WallConstraint::None), 1e-15);
  }
}

TEST(Ladder, MonotoneUpPathIsAllAscendingEpochs) {
  auto rec = ladder_stats(std::vector<Coord>{0, 1, 2, 3, 4});
  ASSERT_EQ(rec.nonstrict_ascending.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rec.nonstrict_ascending[static_cast<std::size_t>(i)].epoch, i + 1);
  EXPECT_TRUE(rec.strict_descending.empty());
}

TEST(Ladder, FirstSouthStepIsTheFirstStrictDescent) {
  std::vector<LatticePoint> pos{{0, 0}};
  for (Step s : parse_steps("EESEENE")) pos.push_back(pos.back() + step_vector(s));
  auto rec = ladder_stats(pos, WallDirection::horizontal());
  ASSERT_FALSE(rec.strict_descending.empty());
  EXPECT_EQ(rec.strict_descending.front().epoch, 3);
  EXPECT_EQ(rec.strict_descending.front().height, -1);
}

TEST(Ladder, CountsMatchNaiveRescan) {
  CounterRng rng(5, 0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Coord> s{static_cast<Coord>(rng.next() % 4)};
    int len = 1 + static_cast<int>(rng.next() % 30);
    for (int i = 0; i < len; ++i) s.push_back(s.back() + static_cast<Coord>(rng.next() % 5) - 2);
    auto rec = ladder_stats(s);
    for (int m = 1; m <= len; m += 3) {
      for (Coord z = 0; z <= 4; ++z) {
        int plus = 0, minus = 0;
        for (int l = 0; l < m; ++l) {
          bool up = true, down = true;
          // l is an epoch when it beats every earlier epoch's height, i.e. every earlier value.
          for (int j = 0; j < l; ++j) {
            up = up && s[static_cast<std::size_t>(l)] >= s[static_cast<std::size_t>(j)];
            down = down && s[static_cast<std::size_t>(l)] < s[static_cast<std::size_t>(j)];
          }
          Coord h = s[static_cast<std::size_t>(l)];
          if (up && h >= 0 && h <= z) ++plus;
          if (down && h >= 0 && h <= z) ++minus;
        }
        EXPECT_EQ(rec.count_plus(m, z), plus);
        EXPECT_EQ(rec.count_minus(m, z), minus);
      }
    }
  }
}

TEST(AliliDoney, SingleUpStep) {
  auto law = build_basic_law(make_tilt(3.0, 0.1, 2.9));
  auto r = alili_doney_check({0, 1}, WallDirection::horizontal(), law, 4);
  EXPECT_NEAR(r.ascending.lhs, law.prob({0, 1}), 1e-15);
  EXPECT_NEAR(r.ascending.rhs, law.prob({0, 1}), 1e-15);
  EXPECT_FALSE(r.descending.applicable);
}

TEST(AliliDoney, IdentitiesHoldExactly) {
  for (double beta : {3.0, 4.0}) {
    auto law = build_basic_law(make_tilt(beta, 0.2, beta - 0.3));
    for (LatticePoint v : {LatticePoint{3, 1}, LatticePoint{5, 0}, LatticePoint{-4, 2}, LatticePoint{-2, 1}}) {
      auto r = alili_doney_check(v, WallDirection::horizontal(), law, 10);
      for (const auto* x : {&r.ascending, &r.descending, &r.descending_nonstrict}) {
        if (!x->applicable) continue;
        EXPECT_LT(x->rel_err, 1e-12);
        EXPECT_LT(x->rearranged_rel_err, 1e-12);
        EXPECT_LT(x->missing_mass, 1e-15);
      }
    }
  }
}

TEST(AliliDoney, CapTooSmall) {
  auto law = build_basic_law(make_tilt(3.0, 0.2, 2.7));
  EXPECT_THROW(alili_doney_check({6, 0}, WallDirection::horizontal(), law, 3), Error);
}

TEST_F(WalkTest, DecompositionReconstructsTheLaw) {
  for (double eps : {0.0, 0.01, 0.2}) {
    auto t = tilt_solve_epsilon(eps, *table_);
    for (auto law : {build_basic_law(t), build_table_law(t, *table_)}) {
      auto d = decompose_walk(law, eps);
      EXPECT_LT(d.max_mixture_err, 1e-14);
      EXPECT_GE(d.alpha1, 0.0);
      EXPECT_LE(d.alpha1, 1.0);
      EXPECT_GT(d.v_vertical_min, 0.0);
      double mass = 0.0;
      for (const auto& [y, p] : d.v_law) {
        EXPECT_GE(p, -1e-15);
        mass += p;
      }
      EXPECT_NEAR(mass, (law.total - d.q) / (1 - d.q), 1e-12);
      if (d.regime == DecompositionRegime::Opt1) {
        EXPECT_EQ(d.alpha1, 1.0);
        EXPECT_EQ(d.p, 0.0);
      }
    }
  }
}

TEST_F(WalkTest, LocalLimitSingleStep) {
  auto t = tilt_solve({1, 0}, *table_);
  auto law = build_table_law(t, *table_);
  auto rows = local_limit_probe({{1, 0}}, law);
  EXPECT_NEAR(rows[0].p, law.prob({1, 0}), 1e-15);
  EXPECT_EQ(rows[0].reference, 1.0);
}

TEST_F(WalkTest, LadderBoundHoldsAtTheHorizontalWall) {
  auto law = build_basic_law(tilt_solve_epsilon(0.0, *table_));
  LadderBoundSettings s;
  s.samples = 4000;
  s.m = {10, 100};
  auto r = ladder_bound_check(law, WallDirection::horizontal(), s);
  EXPECT_GT(r.p_plus, 0.0);
  EXPECT_GT(r.p_minus, 0.9);
  EXPECT_EQ(r.rows.size(), 2u * 3u * 2u * 2u);
  EXPECT_TRUE(r.all_hold);
  s.threads = 3;
  auto r3 = ladder_bound_check(law, WallDirection::horizontal(), s);
  for (std::size_t i = 0; i < r.rows.size(); ++i) EXPECT_EQ(r.rows[i].mean, r3.rows[i].mean);
}

TEST(Rho, WithoutPhiCollapsesToTheWallFactor) {
  auto law = build_basic_law(make_tilt(4.0, 0.05, 3.95));
  auto n = WallDirection::horizontal();
  for (LatticePoint v : {LatticePoint{5, 0}, LatticePoint{7, 2}}) {
    double d = static_cast<double>(wall_distance({0, 1}, n) + wall_distance(v, n));
    EXPECT_NEAR(rho_delta({0, 1}, v, n, law, 0.05, 2.0, false), std::exp(-2 * 0.05 * 4.0 * d), 1e-14);
  }
}

TEST(Rho, LetterDistance) {
  auto n = WallDirection::horizontal();
  EXPECT_EQ(letter_distance({0, 0}, {1, 0}, n), 0.0);
  EXPECT_EQ(letter_distance({0, 3}, {4, 2}, n), 1.0);  // (4, 1) lies in the diamond
  EXPECT_EQ(letter_distance({0, 5}, {0, 6}, n), 5.0);
}

TEST(Rho, RecursionConsistentAtLargeBeta) {
  auto law = build_basic_law(make_tilt(5.0, 0.0135, 5.0));
  RhoProbeSettings s;
  s.window = 10;
  auto r = rho_recursion_probe(WallDirection::horizontal(), law, s);
  EXPECT_GT(r.pairs, 0u);
  EXPECT_LT(r.b_delta, 1.0);
  EXPECT_TRUE(r.consistent);
  EXPECT_GE(r.rho, 1.0);
}
