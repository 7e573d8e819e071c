#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "polylab/contours.hpp"
#include "polylab/geometry.hpp"

namespace polylab {

// Site s is the closed unit cell with corner vertices s - (0|1, 0|1); containment tests use its centre.
std::array<LatticePoint, 4> cell_corners(LatticePoint s);
bool cell_touches_bond(LatticePoint s, const Bond& b);
std::array<Bond, 12> bonds_touched_by_cell(LatticePoint s);
bool cell_in_half_plane(LatticePoint s, const WallDirection& n);
bool cluster_in_half_plane(std::span<const LatticePoint> sites, const WallDirection& n);
bool cell_in_cone(LatticePoint s, LatticePoint apex);
bool cell_in_back_cone(LatticePoint s, LatticePoint apex);
bool cell_in_diamond(LatticePoint s, LatticePoint x, LatticePoint y);

// Connected site set normalised so that min x = min y = 0; cells sorted.
struct ClusterShape {
  std::vector<LatticePoint> cells;
  int diam = 1;
};

// Every 8-connected shape with diam_inf <= cap, in a fixed order.
const std::vector<ClusterShape>& cluster_shapes(int cap);

struct ClusterHit {
  const ClusterShape* shape = nullptr;
  LatticePoint offset;
  std::vector<LatticePoint> sites;
  std::vector<LatticePoint> delta_part;
  int nabla_count = 0;
  bool inside_half_plane = true;
};

// Precomputed neighbourhood grids of one contour for fast cluster scans.
class ContourContext {
 public:
  ContourContext(const OpenContour& g, int cap, DeltaMode mode = DeltaMode::AllVertices,
                 std::optional<WallDirection> wall = std::nullopt);

  // Visits every cluster with diam <= cap that meets nabla, each exactly once, in a fixed order.
  void for_each_cluster(const std::function<void(const ClusterHit&)>& fn) const;
  int nabla_count(std::span<const LatticePoint> sites) const;
  bool in_delta(LatticePoint s) const;
  int length() const { return length_; }
  int cap() const { return cap_; }

 private:
  std::size_t idx(LatticePoint p) const;
  bool in_window(LatticePoint p) const;

  int length_;
  int cap_;
  std::optional<WallDirection> wall_;
  LatticePoint origin_;
  Coord w_, h_;
  std::vector<std::uint8_t> delta_;
  std::vector<int> nabla_h_;
  std::vector<int> nabla_v_;
  std::vector<LatticePoint> targets_;
  mutable std::vector<int> stamp_;
  mutable std::vector<int> bond_stamp_h_;
  mutable std::vector<int> bond_stamp_v_;
  mutable int stamp_counter_ = 0;
};

// Clusters with diam <= cap whose union of closed cells meets the given bond.
std::vector<std::vector<LatticePoint>> clusters_touching_bond(const Bond& b, int cap);

}  // namespace polylab
