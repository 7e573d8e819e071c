#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace polylab {

using Coord = std::int64_t;

struct LatticePoint {
  Coord x = 0;
  Coord y = 0;

  friend constexpr LatticePoint operator+(LatticePoint a, LatticePoint b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr LatticePoint operator-(LatticePoint a, LatticePoint b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr LatticePoint operator*(Coord k, LatticePoint a) { return {k * a.x, k * a.y}; }
  friend constexpr auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

constexpr Coord norm1(LatticePoint p) { return (p.x < 0 ? -p.x : p.x) + (p.y < 0 ? -p.y : p.y); }
constexpr Coord norm_inf(LatticePoint p) {
  Coord ax = p.x < 0 ? -p.x : p.x;
  Coord ay = p.y < 0 ? -p.y : p.y;
  return ax > ay ? ax : ay;
}

struct LatticePointHash {
  std::size_t operator()(LatticePoint p) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(p.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(p.y) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

// Wall normal stored as a coprime integer pair; sign tests stay exact.
class WallDirection {
 public:
  WallDirection() : WallDirection(0, 1) {}
  WallDirection(Coord a, Coord b);

  static WallDirection horizontal() { return WallDirection(0, 1); }
  // Rational approximation with denominator <= max_den; approximated() reports whether it was inexact.
  static WallDirection from_angle(double arg_n, Coord max_den = 1000000);

  Coord a() const { return a_; }
  Coord b() const { return b_; }
  double norm() const;
  double arg() const;
  bool approximated() const { return approximated_; }

  Coord dot(LatticePoint p) const { return a_ * p.x + b_ * p.y; }
  bool in_half_plane(LatticePoint p) const { return dot(p) >= 0; }
  // Lattice direction of the wall line, oriented so that a positive multiple moves along +x when possible.
  LatticePoint tangent() const;

  friend bool operator==(const WallDirection& l, const WallDirection& r) { return l.a_ == r.a_ && l.b_ == r.b_; }

 private:
  Coord a_;
  Coord b_;
  bool approximated_ = false;
};

bool in_cone(LatticePoint p, LatticePoint apex);
bool in_diamond(LatticePoint p, LatticePoint x, LatticePoint y);
Coord wall_distance(LatticePoint u, const WallDirection& n);

// nullopt stands for an infinite diameter (disconnected set).
std::optional<Coord> diam_inf(const std::vector<LatticePoint>& sites);
bool is_connected8(const std::vector<LatticePoint>& sites);

struct Cutoffs {
  int max_contour_len = 12;
  int max_cluster_diam = 2;
  int enumeration_window = 32;
};

struct Tolerances {
  double log_weight_tol = 1e-12;
  double identity_tol = 1e-12;
};

struct AnalysisConstants {
  double beta = 4.0;
  double chi = 2.0;
  double nu_g = 0.0;
  double delta = 0.05;
  Cutoffs cutoffs;
  Tolerances tolerances;
  // Pinning counterexample runs are the only place chi <= 1/2 is legitimate.
  bool allow_pinning_regime = false;

  void validate() const;
};

}  // namespace polylab
