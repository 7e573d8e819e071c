#include "polylab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "polylab/error.hpp"

namespace polylab {

namespace {

Coord iabs(Coord v) { return v < 0 ? -v : v; }

// Best rational approximation p/q of t with q <= max_den (continued fractions).
std::pair<Coord, Coord> best_rational(double t, Coord max_den) {
  Coord p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = t;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(r);
    Coord ai = static_cast<Coord>(fl);
    Coord p2 = ai * p1 + p0;
    Coord q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double frac = r - fl;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  return {p1, q1};
}

}  // namespace

WallDirection::WallDirection(Coord a, Coord b) {
  if (a == 0 && b == 0) throw Error(ErrorCode::InvalidArgument, "wall normal must be nonzero");
  Coord g = std::gcd(iabs(a), iabs(b));
  a_ = a / g;
  b_ = b / g;
  double ang = std::atan2(static_cast<double>(b_), static_cast<double>(a_));
  const double lo = -M_PI / 4 - 1e-12;
  const double hi = 3 * M_PI / 4 + 1e-12;
  if (ang < lo || ang > hi) {
    throw Error(ErrorCode::InvalidArgument, "wall normal angle outside [-pi/4, 3pi/4]");
  }
}

WallDirection WallDirection::from_angle(double arg_n, Coord max_den) {
  double c = std::cos(arg_n);
  double s = std::sin(arg_n);
  Coord a, b;
  if (std::abs(c) < 1e-15) {
    a = 0; b = s > 0 ? 1 : -1;
  } else if (std::abs(s) < 1e-15) {
    a = c > 0 ? 1 : -1; b = 0;
  } else if (std::abs(c) >= std::abs(s)) {
    auto [p, q] = best_rational(std::abs(s / c), max_den);
    a = (c > 0 ? 1 : -1) * q;
    b = (s > 0 ? 1 : -1) * p;
  } else {
    auto [p, q] = best_rational(std::abs(c / s), max_den);
    a = (c > 0 ? 1 : -1) * p;
    b = (s > 0 ? 1 : -1) * q;
  }
  WallDirection w(a, b);
  w.approximated_ = std::abs(std::remainder(w.arg() - arg_n, 2 * M_PI)) > 1e-13;
  return w;
}

double WallDirection::norm() const { return std::hypot(static_cast<double>(a_), static_cast<double>(b_)); }
double WallDirection::arg() const { return std::atan2(static_cast<double>(b_), static_cast<double>(a_)); }

LatticePoint WallDirection::tangent() const {
  LatticePoint t{b_, -a_};
  if (t.x < 0 || (t.x == 0 && t.y < 0)) t = LatticePoint{-t.x, -t.y};
  return t;
}

bool in_cone(LatticePoint p, LatticePoint apex) {
  LatticePoint d = p - apex;
  return 2 * d.y + d.x >= 0 && 2 * d.x + d.y >= 0;
}

bool in_diamond(LatticePoint p, LatticePoint x, LatticePoint y) { return in_cone(p, x) && in_cone(y, p); }

Coord wall_distance(LatticePoint u, const WallDirection& n) {
  Coord s = n.dot(u);
  if (s < 0) throw Error(ErrorCode::OutsideHalfPlane, "wall_distance: point outside the half-plane");
  Coord k = iabs(n.a()) + iabs(n.b());
  return s / k + 1;
}

bool is_connected8(const std::vector<LatticePoint>& sites) {
  if (sites.empty()) return false;
  std::unordered_set<LatticePoint, LatticePointHash> rest(sites.begin(), sites.end());
  std::vector<LatticePoint> stack{sites.front()};
  rest.erase(sites.front());
  while (!stack.empty()) {
    LatticePoint p = stack.back();
    stack.pop_back();
    for (Coord dx = -1; dx <= 1; ++dx) {
      for (Coord dy = -1; dy <= 1; ++dy) {
        auto it = rest.find(LatticePoint{p.x + dx, p.y + dy});
        if (it != rest.end()) {
          stack.push_back(*it);
          rest.erase(it);
        }
      }
    }
  }
  return rest.empty();
}

std::optional<Coord> diam_inf(const std::vector<LatticePoint>& sites) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "diam_inf: empty cluster");
  if (!is_connected8(sites)) return std::nullopt;
  auto [xmin, xmax] = std::minmax_element(sites.begin(), sites.end(),
                                          [](auto l, auto r) { return l.x < r.x; });
  auto [ymin, ymax] = std::minmax_element(sites.begin(), sites.end(),
                                          [](auto l, auto r) { return l.y < r.y; });
  return std::max(xmax->x - xmin->x, ymax->y - ymin->y) + 1;
}

void AnalysisConstants::validate() const {
  if (!(beta > 0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
  if (!(chi > 0)) throw Error(ErrorCode::InvalidArgument, "chi must be positive");
  if (!allow_pinning_regime && !(chi > 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "chi must exceed 1/2 outside pinning runs");
  }
  if (!(delta > 0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (cutoffs.max_contour_len <= 0 || cutoffs.max_cluster_diam <= 0 || cutoffs.enumeration_window <= 0) {
    throw Error(ErrorCode::InvalidArgument, "cutoffs must be strictly positive");
  }
  if (!(tolerances.log_weight_tol > 0) || !(tolerances.identity_tol > 0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  }
}

}  // namespace polylab
