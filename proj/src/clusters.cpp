#include "polylab/clusters.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "polylab/error.hpp"

namespace polylab {

std::array<LatticePoint, 4> cell_corners(LatticePoint s) {
  return {LatticePoint{s.x - 1, s.y - 1}, LatticePoint{s.x, s.y - 1}, LatticePoint{s.x - 1, s.y}, s};
}

bool cell_touches_bond(LatticePoint s, const Bond& b) {
  if (b.horizontal) {
    return (s.y == b.v.y || s.y == b.v.y + 1) && s.x >= b.v.x && s.x <= b.v.x + 2;
  }
  return (s.x == b.v.x || s.x == b.v.x + 1) && s.y >= b.v.y && s.y <= b.v.y + 2;
}

std::array<Bond, 12> bonds_touched_by_cell(LatticePoint s) {
  std::array<Bond, 12> out;
  int k = 0;
  for (Coord dy = -1; dy <= 0; ++dy) {
    for (Coord dx = -2; dx <= 0; ++dx) out[k++] = Bond{{s.x + dx, s.y + dy}, true};
  }
  for (Coord dx = -1; dx <= 0; ++dx) {
    for (Coord dy = -2; dy <= 0; ++dy) out[k++] = Bond{{s.x + dx, s.y + dy}, false};
  }
  return out;
}

namespace {

// Site s sits at s - (1/2, 1/2) in vertex coordinates; doubling keeps every test in integers.
LatticePoint doubled_site(LatticePoint s) { return {2 * s.x - 1, 2 * s.y - 1}; }
LatticePoint doubled(LatticePoint v) { return {2 * v.x, 2 * v.y}; }

}  // namespace

bool cell_in_half_plane(LatticePoint s, const WallDirection& n) { return n.in_half_plane(doubled_site(s)); }

bool cluster_in_half_plane(std::span<const LatticePoint> sites, const WallDirection& n) {
  return std::all_of(sites.begin(), sites.end(), [&](LatticePoint s) { return cell_in_half_plane(s, n); });
}

bool cell_in_cone(LatticePoint s, LatticePoint apex) { return in_cone(doubled_site(s), doubled(apex)); }

bool cell_in_back_cone(LatticePoint s, LatticePoint apex) { return in_cone(doubled(apex), doubled_site(s)); }

bool cell_in_diamond(LatticePoint s, LatticePoint x, LatticePoint y) {
  return in_diamond(doubled_site(s), doubled(x), doubled(y));
}

namespace {

std::vector<ClusterShape> build_shapes(int cap) {
  std::vector<ClusterShape> out;
  const int cells = cap * cap;
  for (std::uint32_t mask = 1; mask < (1u << cells); ++mask) {
    std::vector<LatticePoint> pts;
    bool has_x0 = false, has_y0 = false;
    for (int i = 0; i < cells; ++i) {
      if (mask & (1u << i)) {
        LatticePoint p{i % cap, i / cap};
        has_x0 = has_x0 || p.x == 0;
        has_y0 = has_y0 || p.y == 0;
        pts.push_back(p);
      }
    }
    if (!has_x0 || !has_y0) continue;
    if (!is_connected8(pts)) continue;
    std::sort(pts.begin(), pts.end());
    int d = static_cast<int>(*diam_inf(pts));
    out.push_back({std::move(pts), d});
  }
  std::stable_sort(out.begin(), out.end(), [](const ClusterShape& l, const ClusterShape& r) {
    if (l.diam != r.diam) return l.diam < r.diam;
    return l.cells.size() < r.cells.size();
  });
  return out;
}

}  // namespace

const std::vector<ClusterShape>& cluster_shapes(int cap) {
  if (cap < 1 || cap > 4) throw Error(ErrorCode::InvalidArgument, "cluster diameter cap must be in [1, 4]");
  static std::mutex m;
  static std::map<int, std::vector<ClusterShape>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(cap);
  if (it == cache.end()) it = cache.emplace(cap, build_shapes(cap)).first;
  return it->second;
}

ContourContext::ContourContext(const OpenContour& g, int cap, DeltaMode mode, std::optional<WallDirection> wall)
    : length_(static_cast<int>(g.length())), cap_(cap), wall_(wall) {
  cluster_shapes(cap);
  Coord x0 = g.start().x, x1 = x0, y0 = g.start().y, y1 = y0;
  for (auto v : g.vertices()) {
    x0 = std::min(x0, v.x); x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y); y1 = std::max(y1, v.y);
  }
  const Coord margin = cap + 6;
  origin_ = {x0 - margin, y0 - margin};
  w_ = x1 - x0 + 2 * margin + 1;
  h_ = y1 - y0 + 2 * margin + 1;
  std::size_t n = static_cast<std::size_t>(w_ * h_);
  delta_.assign(n, 0);
  nabla_h_.assign(n, 0);
  nabla_v_.assign(n, 0);
  stamp_.assign(n, 0);
  bond_stamp_h_.assign(n, 0);
  bond_stamp_v_.assign(n, 0);
  for (auto s : delta_gamma(g, mode)) delta_[idx(s)] = 1;
  std::vector<std::uint8_t> target(n, 0);
  for (auto& [b, m] : nabla_gamma(g)) {
    (b.horizontal ? nabla_h_ : nabla_v_)[idx(b.v)] += m;
    for (Coord i = 0; i < 3; ++i) {
      for (Coord j = 0; j < 2; ++j) {
        LatticePoint s = b.horizontal ? LatticePoint{b.v.x + i, b.v.y + j} : LatticePoint{b.v.x + j, b.v.y + i};
        target[idx(s)] = 1;
      }
    }
  }
  for (Coord y = 0; y < h_; ++y) {
    for (Coord x = 0; x < w_; ++x) {
      if (target[static_cast<std::size_t>(y * w_ + x)]) targets_.push_back({origin_.x + x, origin_.y + y});
    }
  }
}

std::size_t ContourContext::idx(LatticePoint p) const {
  return static_cast<std::size_t>((p.y - origin_.y) * w_ + (p.x - origin_.x));
}

bool ContourContext::in_window(LatticePoint p) const {
  return p.x >= origin_.x && p.y >= origin_.y && p.x < origin_.x + w_ && p.y < origin_.y + h_;
}

bool ContourContext::in_delta(LatticePoint s) const { return in_window(s) && delta_[idx(s)]; }

int ContourContext::nabla_count(std::span<const LatticePoint> sites) const {
  int stamp = ++stamp_counter_;
  int total = 0;
  for (auto s : sites) {
    for (const Bond& b : bonds_touched_by_cell(s)) {
      if (!in_window(b.v)) continue;
      std::size_t i = idx(b.v);
      auto& st = b.horizontal ? bond_stamp_h_[i] : bond_stamp_v_[i];
      if (st == stamp) continue;
      st = stamp;
      total += b.horizontal ? nabla_h_[i] : nabla_v_[i];
    }
  }
  return total;
}

void ContourContext::for_each_cluster(const std::function<void(const ClusterHit&)>& fn) const {
  ClusterHit hit;
  const auto& shapes = cluster_shapes(cap_);
  std::vector<int> translation_stamp(stamp_.size(), 0);
  int tstamp = 0;
  for (const auto& shape : shapes) {
    ++tstamp;
    for (LatticePoint target : targets_) {
      for (LatticePoint c : shape.cells) {
        LatticePoint t = target - c;
        std::size_t ti = idx(t);
        if (translation_stamp[ti] == tstamp) continue;
        translation_stamp[ti] = tstamp;
        hit.shape = &shape;
        hit.offset = t;
        hit.sites.clear();
        hit.delta_part.clear();
        for (LatticePoint sc : shape.cells) {
          LatticePoint s = sc + t;
          hit.sites.push_back(s);
          if (delta_[idx(s)]) hit.delta_part.push_back(s);
        }
        hit.nabla_count = nabla_count(hit.sites);
        hit.inside_half_plane = !wall_ || cluster_in_half_plane(hit.sites, *wall_);
        fn(hit);
      }
    }
  }
}

std::vector<std::vector<LatticePoint>> clusters_touching_bond(const Bond& b, int cap) {
  std::vector<std::vector<LatticePoint>> out;
  for (const auto& shape : cluster_shapes(cap)) {
    for (Coord ty = b.v.y - cap - 2; ty <= b.v.y + cap + 2; ++ty) {
      for (Coord tx = b.v.x - cap - 2; tx <= b.v.x + cap + 2; ++tx) {
        bool touches = false;
        for (auto c : shape.cells) touches = touches || cell_touches_bond(c + LatticePoint{tx, ty}, b);
        if (!touches) continue;
        std::vector<LatticePoint> sites;
        for (auto c : shape.cells) sites.push_back(c + LatticePoint{tx, ty});
        out.push_back(std::move(sites));
      }
    }
  }
  return out;
}

}  // namespace polylab
