#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "polylab/contours.hpp"
#include "polylab/error.hpp"

using namespace polylab;

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  double dx = bx - ax, dy = by - ay;
  double t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy);
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

// Sites at distance 1/2 from the drawn contour, or at distance 1/sqrt2 from a vertex towards SW or NE.
std::vector<LatticePoint> delta_by_metric(const OpenContour& g) {
  std::vector<LatticePoint> out;
  const auto& vs = g.vertices();
  Coord x0 = vs[0].x, x1 = vs[0].x, y0 = vs[0].y, y1 = vs[0].y;
  for (auto v : vs) {
    x0 = std::min(x0, v.x); x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y); y1 = std::max(y1, v.y);
  }
  for (Coord x = x0 - 3; x <= x1 + 3; ++x) {
    for (Coord y = y0 - 3; y <= y1 + 3; ++y) {
      double best = 1e9;
      for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
        best = std::min(best, segment_distance(x, y, vs[i].x + 0.5, vs[i].y + 0.5, vs[i + 1].x + 0.5, vs[i + 1].y + 0.5));
      }
      bool diag = false;
      for (auto v : vs) {
        double dx = x - (v.x + 0.5), dy = y - (v.y + 0.5);
        if (std::abs(std::hypot(dx, dy) - std::sqrt(0.5)) < 1e-12 && dx * dy > 0) diag = true;
      }
      if (std::abs(best - 0.5) < 1e-12 || diag) out.push_back({x, y});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> as_strings(const ContourSet& s) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.insert(format_steps(s.steps(i)));
  return out;
}

}  // namespace

TEST(Validate, StraightSegment) {
  for (int L = 1; L <= 6; ++L) {
    std::vector<LatticePoint> vs;
    for (int i = 0; i <= L; ++i) vs.push_back({i, 0});
    EXPECT_EQ(validate_contour(vs).length(), static_cast<std::size_t>(L));
  }
}

TEST(Validate, DuplicateEdge) {
  try {
    validate_contour({{0, 0}, {1, 0}, {0, 0}, {0, 1}});
    FAIL();
  } catch (const ContourError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateEdge);
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(Validate, BrokenChain) {
  try {
    validate_contour({{0, 0}, {2, 0}});
    FAIL();
  } catch (const ContourError& e) {
    EXPECT_EQ(e.code(), ErrorCode::BrokenChain);
  }
}

TEST(Validate, SouthWestRule) {
  std::vector<LatticePoint> bad{{-1, 0}, {0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}, {0, -1}};
  try {
    validate_contour(bad);
    FAIL();
  } catch (const ContourError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SwRuleViolation);
    EXPECT_EQ(e.index(), 1u);
  }
  std::vector<LatticePoint> good{{-1, 0}, {0, 0}, {0, 1}, {1, 1}, {1, 0}, {0, 0}, {0, -1}};
  EXPECT_NO_THROW(validate_contour(good));
}

TEST(Validate, ThreeValentEndpointsUnconstrained) {
  EXPECT_NO_THROW(validate_contour({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}, {0, -1}}));
}

TEST(Delta, SingleEdgeMatchesMetric) {
  OpenContour g({0, 0}, {Step::E});
  auto d = delta_gamma(g);
  EXPECT_EQ(d, delta_by_metric(g));
  EXPECT_EQ(d.size(), 4u);
}

TEST(Delta, LShapeAndLongerMatchMetric) {
  for (const char* s : {"EN", "NE", "EES", "ENWN", "EENNWS", "SSEEN"}) {
    OpenContour g({0, 0}, parse_steps(s));
    EXPECT_EQ(delta_gamma(g), delta_by_metric(g)) << s;
  }
}

TEST(Delta, TranslationCovariant) {
  OpenContour g({0, 0}, parse_steps("ENNEES"));
  LatticePoint t{3, -7};
  auto d = delta_gamma(g);
  for (auto& p : d) p = p + t;
  EXPECT_EQ(delta_gamma(g.translated(t)), d);
}

TEST(Delta, WithinOneOfVertices) {
  OpenContour g({0, 0}, parse_steps("ENNWNEE"));
  for (auto s : delta_gamma(g)) {
    bool near = false;
    for (auto v : g.vertices()) near = near || norm_inf(s - v) <= 1;
    EXPECT_TRUE(near);
  }
}

TEST(Delta, CornersOnlyIsSubset) {
  OpenContour g({0, 0}, parse_steps("EENNE"));
  auto all = delta_gamma(g, DeltaMode::AllVertices);
  auto corners = delta_gamma(g, DeltaMode::CornersOnly);
  EXPECT_TRUE(std::includes(all.begin(), all.end(), corners.begin(), corners.end()));
  EXPECT_LT(corners.size(), all.size());
}

TEST(Nabla, SingleEdge) {
  auto n = nabla_gamma(OpenContour({0, 0}, {Step::E}));
  ASSERT_EQ(n.size(), 3u);
  for (auto& [b, m] : n) EXPECT_EQ(m, 1);
}

TEST(Nabla, TwoCollinearEdges) {
  auto n = nabla_gamma(OpenContour({0, 0}, {Step::E, Step::E}));
  ASSERT_EQ(n.size(), 4u);
  int total = 0, twos = 0;
  for (auto& [b, m] : n) {
    total += m;
    twos += (m == 2);
  }
  EXPECT_EQ(total, 6);
  EXPECT_EQ(twos, 2);
}

TEST(Nabla, TotalMultiplicity) {
  for (const char* s : {"E", "EN", "ENWN", "EENNWSWS", "NNEESSE"}) {
    auto g = OpenContour({0, 0}, parse_steps(s));
    EXPECT_EQ(neighborhoods(g).total_multiplicity(), 3 * static_cast<int>(g.length()));
  }
}

TEST(Enumerate, Examples) {
  EXPECT_EQ(collect_contours({0, 0}, {3, 0}, 3, {}).size(), 1u);
  EXPECT_EQ(collect_contours({0, 0}, {1, 1}, 2, {}).size(), 2u);
}

TEST(Enumerate, MatchesNaiveOracle) {
  auto fast = collect_contours({0, 0}, {2, 0}, 6, {});
  auto slow = naive_contours({0, 0}, {2, 0}, 6, std::nullopt);
  EXPECT_EQ(fast, slow);
  EXPECT_GT(fast.size(), 1u);
}

TEST(Enumerate, LexicographicOrder) {
  auto set = collect_contours({0, 0}, {1, 1}, 6, {});
  for (std::size_t i = 1; i < set.size(); ++i) {
    auto a = set.steps(i - 1), b = set.steps(i);
    EXPECT_TRUE(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(Enumerate, ConstraintEqualsFilter) {
  auto n = WallDirection::horizontal();
  EnumerationOptions opts;
  opts.constraint = n;
  auto constrained = collect_contours({0, 0}, {3, 0}, 7, opts);
  auto all = collect_contours({0, 0}, {3, 0}, 7, {});
  ContourSet filtered({0, 0});
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto g = all.contour(i);
    bool inside = std::all_of(g.vertices().begin(), g.vertices().end(), [&](auto v) { return n.in_half_plane(v); });
    if (inside) filtered.push(all.steps(i));
  }
  EXPECT_EQ(constrained, filtered);
}

TEST(Enumerate, ReversalCountsAgree) {
  for (LatticePoint b : {LatticePoint{2, 1}, LatticePoint{3, 0}, LatticePoint{-1, 2}}) {
    auto fwd = collect_contours({0, 0}, b, 7, {});
    auto bwd = collect_contours(b, {0, 0}, 7, {});
    EXPECT_EQ(fwd.size(), bwd.size());
    std::set<std::string> rev;
    for (std::size_t i = 0; i < bwd.size(); ++i) rev.insert(format_steps(bwd.contour(i).reversed().steps()));
    EXPECT_EQ(rev, as_strings(fwd));
  }
}

TEST(Enumerate, CutoffMonotone) {
  auto small = as_strings(collect_contours({0, 0}, {2, 1}, 5, {}));
  auto large = as_strings(collect_contours({0, 0}, {2, 1}, 7, {}));
  EXPECT_TRUE(std::includes(large.begin(), large.end(), small.begin(), small.end()));
}

TEST(Enumerate, EveryOutputValid) {
  auto set = collect_contours({0, 0}, {1, 0}, 9, {});
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_TRUE(is_valid_contour({0, 0}, set.steps(i)));
}

TEST(Enumerate, ThreadCountDoesNotChangeStream) {
  EnumerationOptions one, four;
  four.threads = 4;
  EXPECT_EQ(collect_contours({0, 0}, {3, 1}, 9, one), collect_contours({0, 0}, {3, 1}, 9, four));
}

TEST(Enumerate, CutoffBelowDistanceIsEmpty) {
  EXPECT_EQ(collect_contours({0, 0}, {3, 3}, 4, {}).size(), 0u);
  EXPECT_THROW(collect_contours({0, 0}, {0, 0}, 4, {}), Error);
}

TEST(Cache, RoundTripAndCorruption) {
  auto dir = std::filesystem::temp_directory_path() / "polylab_cache_test";
  std::filesystem::remove_all(dir);
  ContourCache cache(dir);
  auto first = cache.get_or_compute({0, 0}, {2, 1}, 9, {});
  auto second = cache.get_or_compute({0, 0}, {2, 1}, 9, {});
  EXPECT_EQ(first, second);
  EXPECT_EQ(first, collect_contours({0, 0}, {2, 1}, 9, {}));
  EXPECT_EQ(cache.stats().hits, 1u);
  auto path = cache.path_for(ContourCache::make_key({0, 0}, {2, 1}, 9, std::nullopt));
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    f.put('\x7f');
  }
  auto third = cache.get_or_compute({0, 0}, {2, 1}, 9, {});
  EXPECT_EQ(third, first);
  EXPECT_EQ(cache.stats().corrupt, 1u);
  std::filesystem::remove_all(dir);
}

TEST(Cache, KeyMismatchRejected) {
  auto set = collect_contours({0, 0}, {1, 0}, 5, {});
  auto bytes = ContourCache::encode("k1", set);
  EXPECT_TRUE(ContourCache::decode(bytes, "k1", {0, 0}).has_value());
  EXPECT_FALSE(ContourCache::decode(bytes, "k2", {0, 0}).has_value());
}
