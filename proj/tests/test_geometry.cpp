#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "polylab/error.hpp"
#include "polylab/geometry.hpp"

using namespace polylab;

namespace {

bool cone_by_angle(LatticePoint d) {
  if (d.x == 0 && d.y == 0) return true;
  const long double kappa = std::atan(0.5L);
  const long double pi = std::acos(-1.0L);
  long double ang = std::atan2(static_cast<long double>(d.y), static_cast<long double>(d.x));
  if (ang < -pi / 2) ang += 2 * pi;
  const long double eps = 1e-15L;
  return ang >= -kappa - eps && ang <= pi / 2 + kappa + eps;
}

Coord wall_distance_by_scan(LatticePoint u, const WallDirection& n) {
  Coord best = std::numeric_limits<Coord>::max();
  const Coord r = 40;
  for (Coord x = u.x - r; x <= u.x + r; ++x) {
    for (Coord y = u.y - r; y <= u.y + r; ++y) {
      LatticePoint w{x, y};
      if (n.dot(w) < 0) best = std::min(best, norm_inf(u - w));
    }
  }
  return best;
}

}  // namespace

TEST(Cone, Examples) {
  EXPECT_TRUE(in_cone({0, 0}, {0, 0}));
  EXPECT_TRUE(in_cone({1, 0}, {0, 0}));
  EXPECT_TRUE(in_cone({2, -1}, {0, 0}));
  EXPECT_FALSE(in_cone({2, -2}, {0, 0}));
  EXPECT_TRUE(in_cone({-1, 2}, {0, 0}));
  EXPECT_FALSE(in_cone({-1, 1}, {0, 0}));
}

TEST(Cone, MatchesAngleOracle) {
  for (Coord x = -12; x <= 12; ++x) {
    for (Coord y = -12; y <= 12; ++y) {
      EXPECT_EQ(in_cone({x, y}, {0, 0}), cone_by_angle({x, y})) << x << "," << y;
    }
  }
}

TEST(Cone, TranslationInvariant) {
  for (Coord x = -5; x <= 5; ++x) {
    for (Coord y = -5; y <= 5; ++y) {
      LatticePoint t{7, -3};
      EXPECT_EQ(in_cone({x, y}, {1, 2}), in_cone(LatticePoint{x, y} + t, LatticePoint{1, 2} + t));
    }
  }
}

TEST(WallDistance, Horizontal) {
  auto n = WallDirection::horizontal();
  EXPECT_EQ(wall_distance({5, 0}, n), 1);
  EXPECT_EQ(wall_distance({0, 3}, n), 4);
  EXPECT_THROW(wall_distance({0, -1}, n), Error);
}

TEST(WallDistance, BoundaryRowIsDistanceOne) {
  auto n = WallDirection::horizontal();
  for (Coord x = -4; x <= 4; ++x) {
    for (Coord y = 0; y <= 4; ++y) {
      EXPECT_EQ(wall_distance({x, y}, n) == 1, y == 0);
    }
  }
}

TEST(WallDistance, MatchesWindowScan) {
  for (auto [a, b] : {std::pair<Coord, Coord>{0, 1}, {-1, 1}, {1, 1}, {-1, 2}, {1, 2}, {2, -1}, {1, 0}, {-2, 3}}) {
    WallDirection n(a, b);
    for (Coord x = -6; x <= 6; ++x) {
      for (Coord y = -6; y <= 6; ++y) {
        LatticePoint u{x, y};
        if (!n.in_half_plane(u)) continue;
        EXPECT_EQ(wall_distance(u, n), wall_distance_by_scan(u, n)) << a << "," << b << " u=" << x << "," << y;
      }
    }
  }
}

TEST(WallDistance, InvariantAlongWall) {
  WallDirection n(-1, 2);
  LatticePoint t = n.tangent();
  EXPECT_EQ(n.dot(t), 0);
  for (Coord y = 0; y <= 5; ++y) {
    LatticePoint u{0, y};
    EXPECT_EQ(wall_distance(u, n), wall_distance(u + 3 * t, n));
  }
}

TEST(WallDirection, RationalRepresentation) {
  auto w = WallDirection::from_angle(3 * M_PI / 4);
  EXPECT_EQ(w.a(), -1);
  EXPECT_EQ(w.b(), 1);
  EXPECT_FALSE(w.approximated());
  auto v = WallDirection::from_angle(M_PI / 2 + 0.3);
  EXPECT_TRUE(v.approximated());
  EXPECT_NEAR(v.arg(), M_PI / 2 + 0.3, 1e-9);
  EXPECT_THROW(WallDirection(0, -1), Error);
  EXPECT_THROW(WallDirection(0, 0), Error);
}

TEST(Diamond, Examples) {
  EXPECT_TRUE(in_diamond({0, 0}, {0, 0}, {4, 0}));
  EXPECT_TRUE(in_diamond({4, 0}, {0, 0}, {4, 0}));
  EXPECT_FALSE(in_diamond({2, 3}, {0, 0}, {4, 0}));
}

TEST(Diamond, ImpliesBothCones) {
  for (Coord x = -4; x <= 8; ++x) {
    for (Coord y = -4; y <= 8; ++y) {
      LatticePoint p{x, y};
      if (in_diamond(p, {0, 0}, {5, 2})) {
        EXPECT_TRUE(in_cone(p, {0, 0}));
        EXPECT_TRUE(in_cone({5, 2}, p));
      }
    }
  }
}

TEST(Diameter, Examples) {
  EXPECT_EQ(diam_inf({{0, 0}}), 1);
  EXPECT_EQ(diam_inf({{0, 0}, {1, 0}}), 2);
  EXPECT_EQ(diam_inf({{0, 0}, {1, 1}}), 2);
  EXPECT_EQ(diam_inf({{0, 0}, {5, 5}}), std::nullopt);
  EXPECT_THROW(diam_inf({}), Error);
}

TEST(Constants, Validation) {
  AnalysisConstants c;
  EXPECT_NO_THROW(c.validate());
  c.chi = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c.allow_pinning_regime = true;
  EXPECT_NO_THROW(c.validate());
  c.cutoffs.max_cluster_diam = 0;
  EXPECT_THROW(c.validate(), Error);
}
