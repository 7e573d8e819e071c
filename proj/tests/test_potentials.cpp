#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "polylab/clusters.hpp"
#include "polylab/error.hpp"
#include "polylab/potentials.hpp"

using namespace polylab;

namespace {

// Brute-force geometric oracle: closed cell [s-1, s] meets the closed bond segment.
bool oracle_touches(LatticePoint s, const Bond& b) {
  double x0 = s.x - 1, x1 = s.x, y0 = s.y - 1, y1 = s.y;
  double bx0 = b.v.x, by0 = b.v.y;
  double bx1 = b.horizontal ? bx0 + 1 : bx0, by1 = b.horizontal ? by0 : by0 + 1;
  return bx1 >= x0 && bx0 <= x1 && by1 >= y0 && by0 <= y1;
}

}  // namespace

TEST(Clusters, TouchingMatchesGeometry) {
  for (bool h : {true, false}) {
    Bond b{{3, -2}, h};
    int count = 0;
    for (Coord y = -6; y <= 2; ++y) {
      for (Coord x = -1; x <= 7; ++x) {
        EXPECT_EQ(cell_touches_bond({x, y}, b), oracle_touches({x, y}, b));
        count += oracle_touches({x, y}, b);
      }
    }
    EXPECT_EQ(count, 6);
  }
  for (const Bond& b : bonds_touched_by_cell({2, 5})) EXPECT_TRUE(oracle_touches({2, 5}, b));
}

TEST(Clusters, ShapeCountsAndConnectivity) {
  EXPECT_EQ(cluster_shapes(1).size(), 1u);
  // 2x2 box: 4 singletons-free shapes of diam 2: 2 dominoes, 2 diagonals, 4 trominoes, 1 square.
  std::size_t diam2 = 0;
  for (const auto& s : cluster_shapes(2)) diam2 += s.diam == 2;
  EXPECT_EQ(diam2, 9u);
  for (const auto& s : cluster_shapes(3)) {
    EXPECT_TRUE(is_connected8(s.cells));
    EXPECT_EQ(*diam_inf(s.cells), s.diam);
  }
}

TEST(Clusters, ContextVisitsEachTouchingClusterOnce) {
  OpenContour g({0, 0}, parse_steps("ENNW"));
  ContourContext ctx(g, 2);
  std::set<std::vector<LatticePoint>> seen;
  std::size_t visits = 0;
  ctx.for_each_cluster([&](const ClusterHit& h) {
    auto s = h.sites;
    std::sort(s.begin(), s.end());
    seen.insert(s);
    ++visits;
    EXPECT_GT(h.nabla_count, 0);
  });
  EXPECT_EQ(seen.size(), visits);
  std::set<std::vector<LatticePoint>> oracle;
  for (const auto& [b, m] : nabla_gamma(g)) {
    for (auto c : clusters_touching_bond(b, 2)) {
      std::sort(c.begin(), c.end());
      oracle.insert(c);
    }
  }
  EXPECT_EQ(seen, oracle);
}

TEST(CBeta, CapOneIsSixSingletons) {
  for (double beta : {2.0, 4.0}) {
    auto c = c_beta(beta, 2.0, 1, 5.0);
    EXPECT_EQ(c.clusters, 6u);
    EXPECT_NEAR(c.value, 6.0 * std::exp(-4.0 * beta), 1e-15);
  }
}

TEST(CBeta, MonotoneInCapAndVanishesAtLargeBeta) {
  auto c2 = c_beta(4.0, 2.0, 2, 5.0);
  auto c3 = c_beta(4.0, 2.0, 3, 5.0);
  EXPECT_GT(c3.value, c2.value);
  EXPECT_GT(c3.clusters, c2.clusters);
  EXPECT_LT(c3.tail_bound, c2.tail_bound);
  EXPECT_LT(c_beta(40.0, 2.0, 2, 5.0).value, 1e-60);
}

TEST(CBeta, DivergentTail) {
  try {
    c_beta(3.0, 0.5, 2, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergentTail);
  }
}

TEST(Positivize, Examples) {
  double e = std::exp(-2.0 * 2.0 * 4.0);
  EXPECT_DOUBLE_EQ(positivize(0.0, 1, 2.0, 4.0, 1), e);
  EXPECT_DOUBLE_EQ(positivize(-e, 1, 2.0, 4.0, 1), 0.0);
  OpenContour g({0, 0}, parse_steps("E"));
  LatticePoint cell[1] = {{1, 1}};
  EXPECT_DOUBLE_EQ(positivize(PotentialSpec::zero(2.0), g, cell, 4.0), 3.0 * e);
}

TEST(Psi, Examples) {
  EXPECT_EQ(psi_weight(0.0, true), 0.0);
  EXPECT_EQ(psi_weight(0.7, false), 0.0);
  double e = std::exp(-2.0 * 2.0 * 4.0);
  EXPECT_NEAR(psi_weight(e, true), e + e * e / 2 + e * e * e / 6, 1e-30);
}

TEST(Psi, SubsetSumIsProduct) {
  double psi[2] = {psi_weight(0.3, true), psi_weight(0.05, true)};
  double subsets = 1.0 + psi[0] + psi[1] + psi[0] * psi[1];
  EXPECT_NEAR(subsets, (1 + psi[0]) * (1 + psi[1]), 1e-15);
  EXPECT_NEAR(std::log(subsets), 0.35, 1e-15);
}

TEST(RandomSign, BoundedDeterministicAndCovariant) {
  auto phi = PotentialSpec::random_sign(2.0, 7);
  std::vector<LatticePoint> c = {{0, 0}, {1, 1}}, d = {{0, 0}};
  std::vector<LatticePoint> ct = {{5, -3}, {6, -2}}, dt = {{5, -3}};
  double v = phi.evaluate(c, d, 2, 4.0);
  EXPECT_DOUBLE_EQ(std::abs(v), decay_bound(2.0, 4.0, 2));
  EXPECT_EQ(v, phi.evaluate(ct, dt, 2, 4.0));
  EXPECT_EQ(phi.evaluate(c, {}, 2, 4.0), 0.0);
  int pos = 0;
  for (int s = 0; s < 200; ++s) pos += PotentialSpec::random_sign(2.0, s).evaluate(c, d, 2, 4.0) > 0;
  EXPECT_GT(pos, 60);
  EXPECT_LT(pos, 140);
}

TEST(BoundaryPin, Examples) {
  double beta = 3.0;
  auto pin = builtin_boundary_pin(10.0, beta, 0.5);
  std::vector<LatticePoint> wall_cell = {{2, 0}}, inner = {{2, 1}};
  EXPECT_FALSE(cluster_in_half_plane(wall_cell, pin.wall));
  EXPECT_TRUE(cluster_in_half_plane(inner, pin.wall));
  EXPECT_DOUBLE_EQ(pin.evaluate(wall_cell, wall_cell, 1, beta, false), 10.0 * std::exp(-beta));
  EXPECT_EQ(pin.evaluate(inner, inner, 1, beta, true), 0.0);
  EXPECT_EQ(pin.evaluate(wall_cell, {}, 1, beta, false), 0.0);
  auto none = builtin_boundary_pin(0.0, beta, 0.5);
  EXPECT_EQ(none.evaluate(wall_cell, wall_cell, 1, beta, false), 0.0);
  EXPECT_THROW(builtin_boundary_pin(10.0, beta, 2.0), Error);
  EXPECT_THROW(builtin_boundary_pin(-1.0, beta, 0.5), Error);
}

TEST(Audit, RandomSignPasses) {
  auto rep = audit_potential(PotentialSpec::random_sign(2.0, 11), 4.0, 3, 1000, 5);
  EXPECT_EQ(rep.samples, 1000u);
  EXPECT_TRUE(rep.ok());
  EXPECT_LE(rep.worst_decay_ratio, 1.0 + 1e-12);
}

TEST(Audit, CatchesOversizedUserPotential) {
  auto bad = PotentialSpec::user_defined(2.0, [](auto, auto, int diam, double beta) {
    return -3.0 * decay_bound(2.0, beta, diam);
  });
  auto rep = audit_potential(bad, 4.0, 2, 500, 1);
  EXPECT_GT(rep.decay_violations, 0u);
  EXPECT_GT(rep.positivity_violations, 0u);
}

TEST(Audit, ModifiedRandomSignPasses) {
  ModifiedPotentialSpec m;
  m.base = PotentialSpec::random_sign(2.0, 3);
  auto b = PotentialSpec::random_sign(2.0, 4);
  b.position_keyed = true;
  m.boundary = b;
  EXPECT_TRUE(audit_potential(m.base, 4.0, 2, 500, 9, m).ok());
}

TEST(Rewrite, IdentityHoldsOnSeveralContours) {
  auto phi = PotentialSpec::random_sign(2.0, 21);
  for (const char* s : {"E", "EEEE", "ENENE", "NNEESSE", "EENWNEE"}) {
    auto chk = weight_rewrite_check(OpenContour({0, 0}, parse_steps(s)), phi, 4.0, 2, 5.0);
    EXPECT_TRUE(chk.ok()) << s << " diff=" << chk.difference;
    EXPECT_LE(std::abs(chk.difference), 1e-14 * std::abs(chk.lhs));
  }
}
