#include "polylab/effective_walk.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "polylab/contours.hpp"
#include "polylab/error.hpp"
#include "polylab/rng.hpp"

namespace polylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr LatticePoint kE1{1, 0};
constexpr LatticePoint kE2{0, 1};
constexpr LatticePoint kG3{4, -1};
constexpr LatticePoint kG4{-1, 4};

Coord diag(LatticePoint p) { return p.x + p.y; }

bool in_y(LatticePoint d) { return in_cone(d, {0, 0}); }

// Lattice points p with p − u ∈ Y, (p − u)·(1, 1) ≤ reach and, when a target is given, target − p ∈ Y.
class Region {
 public:
  Region(LatticePoint u, Coord reach, std::optional<LatticePoint> target) : u_(u), reach_(reach) {
    x0_ = u.x - reach;
    y0_ = u.y - reach;
    side_ = 3 * reach + 1;
    index_.assign(static_cast<std::size_t>(side_ * side_), -1);
    for (Coord s = 0; s <= reach; ++s) {
      for (Coord dx = -s; dx <= 2 * s; ++dx) {
        LatticePoint p{u.x + dx, u.y + s - dx};
        if (!in_y(p - u)) continue;
        if (target && !in_y(*target - p)) continue;
        index_[slot(p)] = static_cast<int>(points_.size());
        points_.push_back(p);
      }
    }
  }

  const std::vector<LatticePoint>& points() const { return points_; }
  int find(LatticePoint p) const {
    if (p.x < x0_ || p.y < y0_ || p.x >= x0_ + side_ || p.y >= y0_ + side_) return -1;
    return index_[slot(p)];
  }
  LatticePoint origin() const { return u_; }

 private:
  std::size_t slot(LatticePoint p) const { return static_cast<std::size_t>((p.x - x0_) * side_ + (p.y - y0_)); }

  LatticePoint u_;
  Coord reach_;
  Coord x0_ = 0, y0_ = 0, side_ = 1;
  std::vector<int> index_;
  std::vector<LatticePoint> points_;  // sorted by x + y
};

struct Letter {
  LatticePoint x;
  double p = 0.0;
  std::vector<std::pair<int, double>> by_length;
};

std::vector<Letter> letters_of(const StepLaw& law) {
  std::map<LatticePoint, Letter> m;
  for (const auto& a : law.atoms) {
    auto& l = m[a.x];
    l.x = a.x;
    l.p += a.p;
    l.by_length.emplace_back(a.length, a.p);
  }
  std::vector<Letter> out;
  for (auto& [x, l] : m) out.push_back(std::move(l));
  return out;
}

bool allowed(LatticePoint q, const WallDirection& n, WallConstraint c) {
  switch (c) {
    case WallConstraint::None: return true;
    case WallConstraint::NonStrict: return n.dot(q) >= 0;
    case WallConstraint::Strict: return n.dot(q) > 0;
  }
  return true;
}

// Green function from the region origin to every region point. weight(q, i) is the factor of letter i
// taken from q; the origin is exempt from the constraint.
template <class Weight>
std::vector<double> region_green(const Region& r, const std::vector<Letter>& letters, const WallDirection& n,
                                 WallConstraint c, int max_steps, Coord reach, Weight&& weight) {
  const auto& pts = r.points();
  const LatticePoint u = r.origin();
  std::vector<char> ok(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) ok[i] = pts[i] == u || allowed(pts[i], n, c);
  auto relax = [&](const std::vector<double>& from, std::vector<double>& to) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i] == u) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < letters.size(); ++k) {
        int j = r.find(pts[i] - letters[k].x);
        if (j < 0 || !ok[static_cast<std::size_t>(j)] || from[static_cast<std::size_t>(j)] == 0.0) continue;
        acc += weight(pts[static_cast<std::size_t>(j)], k) * from[static_cast<std::size_t>(j)];
      }
      to[i] += acc;
    }
  };
  std::vector<double> g(pts.size(), 0.0);
  g[static_cast<std::size_t>(r.find(u))] = 1.0;
  if (max_steps < 0 || max_steps >= reach) {
    // Points are sorted by x + y and every letter raises x + y, so one in-place pass is exact.
    relax(g, g);
    return g;
  }
  std::vector<double> layer = g;
  for (int l = 1; l <= max_steps; ++l) {
    std::vector<double> next(pts.size(), 0.0);
    std::vector<double> prev = layer;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i] == u) prev[i] = (l == 1) ? 1.0 : 0.0;
    }
    relax(prev, next);
    for (std::size_t i = 0; i < pts.size(); ++i) g[i] += next[i];
    layer = std::move(next);
  }
  return g;
}

double green_between(LatticePoint u, LatticePoint v, const WallDirection& n, const std::vector<Letter>& letters,
                     WallConstraint c, int max_steps) {
  if (u == v) return 1.0;
  if (!in_y(v - u)) return 0.0;
  Coord reach = diag(v - u);
  Region r(u, reach, v);
  auto g = region_green(r, letters, n, c, max_steps, reach, [&](LatticePoint, std::size_t k) { return letters[k].p; });
  return g[static_cast<std::size_t>(r.find(v))];
}

void ladder_scan(const std::vector<Coord>& s, LadderRecord& rec) {
  rec.start = s.empty() ? 0 : s[0];
  Coord up = rec.start, down = rec.start, weak_down = rec.start;
  for (std::size_t l = 1; l < s.size(); ++l) {
    if (s[l] >= up) {
      rec.nonstrict_ascending.push_back({static_cast<int>(l), s[l]});
      up = s[l];
    }
    if (s[l] < down) {
      rec.strict_descending.push_back({static_cast<int>(l), s[l]});
      down = s[l];
    }
    if (s[l] <= weak_down) {
      rec.nonstrict_descending.push_back({static_cast<int>(l), s[l]});
      weak_down = s[l];
    }
  }
}

int count_epochs(Coord start, const std::vector<LadderEpoch>& e, int m, Coord lo, Coord hi) {
  if (m < 1) return 0;
  int c = start >= lo && start <= hi ? 1 : 0;
  for (const auto& x : e) {
    if (x.epoch >= m) break;
    if (x.height >= lo && x.height <= hi) ++c;
  }
  return c;
}

double rel_err(double a, double b) {
  double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace

const char* step_law_mode_name(StepLawMode m) { return m == StepLawMode::Basic ? "BASIC" : "TABLE"; }

StepLawMode parse_step_law_mode(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "BASIC") return StepLawMode::Basic;
  if (u == "TABLE") return StepLawMode::Table;
  throw Error(ErrorCode::InvalidArgument, "unknown step law mode: " + s);
}

double StepLaw::prob(LatticePoint y) const {
  double p = 0.0;
  for (const auto& a : atoms) {
    if (a.x == y) p += a.p;
  }
  return p;
}

std::vector<std::pair<LatticePoint, double>> StepLaw::marginal() const {
  std::map<LatticePoint, double> m;
  for (const auto& a : atoms) m[a.x] += a.p;
  return {m.begin(), m.end()};
}

namespace {

void finish_law(StepLaw& law) {
  std::sort(law.atoms.begin(), law.atoms.end(), [](const StepAtom& l, const StepAtom& r) {
    return l.x != r.x ? l.x < r.x : l.length < r.length;
  });
  law.total = 0.0;
  law.nonbasic_second_moment = 0.0;
  for (const auto& a : law.atoms) {
    law.total += a.p;
    if (a.x != kE1 && a.x != kE2 && a.x != kG3) {
      law.nonbasic_second_moment += static_cast<double>(a.x.x * a.x.x + a.x.y * a.x.y) * a.p;
    }
  }
  law.deficiency = 1.0 - law.total;
}

}  // namespace

StepLaw build_basic_law(const TiltVector& t, bool include_gamma4) {
  StepLaw law;
  law.mode = StepLawMode::Basic;
  law.beta = t.beta;
  law.a = t.a;
  law.b = t.b;
  law.atoms.push_back({kE1, std::exp(-t.a), 1});
  law.atoms.push_back({kE2, std::exp(-t.b), 1});
  law.atoms.push_back({kG3, std::exp(-t.beta - law.delta_a()), 5});
  if (include_gamma4) law.atoms.push_back({kG4, std::exp(-t.beta - law.delta_b()), 5});
  finish_law(law);
  return law;
}

StepLaw build_table_law(const TiltVector& t, const AnimalTable& table) {
  StepLaw law;
  law.mode = StepLawMode::Table;
  law.beta = t.beta;
  law.a = t.a;
  law.b = t.b;
  law.tail = t.tail;
  std::map<std::pair<LatticePoint, int>, double> agg;
  for (const auto& e : table.entries) agg[{e.displacement, e.length}] += std::exp(tilted_log_weight(e, t.h));
  for (const auto& [k, p] : agg) law.atoms.push_back({k.first, p, k.second});
  finish_law(law);
  return law;
}

GreenResult constrained_green(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law,
                              int max_steps) {
  auto letters = letters_of(law);
  GreenResult r;
  r.steps_bound = in_y(v - u) ? static_cast<int>(diag(v - u)) : 0;
  r.p_plus = green_between(u, v, n, letters, WallConstraint::NonStrict, max_steps);
  r.p_hat_plus = green_between(u, v, n, letters, WallConstraint::Strict, max_steps);
  return r;
}

double walk_green(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law, WallConstraint c,
                  int max_steps) {
  return green_between(u, v, n, letters_of(law), c, max_steps);
}

std::vector<double> free_green(const std::vector<LatticePoint>& xs, const StepLaw& law) {
  auto letters = letters_of(law);
  Coord reach = 0;
  for (auto x : xs) {
    if (in_y(x)) reach = std::max(reach, diag(x));
  }
  Region r({0, 0}, reach, std::nullopt);
  auto g = region_green(r, letters, WallDirection::horizontal(), WallConstraint::None, -1, reach,
                        [&](LatticePoint, std::size_t k) { return letters[k].p; });
  std::vector<double> out;
  for (auto x : xs) {
    int i = r.find(x);
    out.push_back(i < 0 ? 0.0 : g[static_cast<std::size_t>(i)]);
  }
  return out;
}

int LadderRecord::count_plus(int m, Coord z) const { return count_epochs(start, nonstrict_ascending, m, 0, z); }
int LadderRecord::count_minus(int m, Coord z) const { return count_epochs(start, strict_descending, m, 0, z); }
int LadderRecord::count_minus_nonstrict(int m, Coord z) const {
  return count_epochs(start, nonstrict_descending, m, 0, z);
}
int LadderRecord::count_minus_positive(int m, Coord z) const {
  return count_epochs(start, strict_descending, m, 1, z);
}

LadderRecord ladder_stats(const std::vector<LatticePoint>& positions, const WallDirection& n) {
  std::vector<Coord> s;
  s.reserve(positions.size());
  for (auto p : positions) s.push_back(n.dot(p));
  return ladder_stats(s);
}

LadderRecord ladder_stats(const std::vector<Coord>& heights) {
  LadderRecord rec;
  ladder_scan(heights, rec);
  return rec;
}

AliliDoneyCheck alili_doney_check(LatticePoint v, const WallDirection& n, const StepLaw& law, int len_cap,
                                  double identity_tol) {
  if (len_cap < 1) throw Error(ErrorCode::InvalidArgument, "alili_doney_check: len_cap must be positive");
  if (n.dot(v) < 0) throw Error(ErrorCode::OutsideHalfPlane, "alili_doney_check: v·n < 0");
  auto letters = letters_of(law);
  const Coord z = n.dot(v);

  // Exhaustive walks from start to end; visit(heights, weight) for each one that ends at end.
  auto enumerate = [&](LatticePoint start, LatticePoint end, auto&& visit) {
    std::vector<Coord> heights{n.dot(start)};
    std::vector<LatticePoint> pos{start};
    auto rec = [&](auto&& self, double w) -> void {
      LatticePoint here = pos.back();
      if (here == end && pos.size() > 1) {
        visit(heights, w);
        return;
      }
      if (static_cast<int>(pos.size()) - 1 >= len_cap) return;
      for (const auto& l : letters) {
        LatticePoint next = here + l.x;
        if (!in_y(end - next)) continue;
        pos.push_back(next);
        heights.push_back(n.dot(next));
        self(self, w * l.p);
        pos.pop_back();
        heights.pop_back();
      }
    };
    rec(rec, 1.0);
  };

  enum class Kind { Ascending, Strict, NonStrict };
  AliliDoneyCheck out;
  auto run = [&](LatticePoint start, LatticePoint end, Kind kind, AliliDoneyResult& r) {
    if (start == end || !in_y(end - start) || (kind == Kind::Strict && z < 1)) {
      r.applicable = false;
      return;
    }
    const bool strict = kind == Kind::Strict;
    r.lhs = green_between(start, end, n, letters, strict ? WallConstraint::Strict : WallConstraint::NonStrict, -1);
    double within_cap = 0.0;
    enumerate(start, end, [&](const std::vector<Coord>& s, double w) {
      const int m = static_cast<int>(s.size()) - 1;
      bool constrained = true;
      for (int l = 1; l < m && constrained; ++l) {
        Coord h = s[static_cast<std::size_t>(l)];
        constrained = strict ? h > 0 : h >= 0;
      }
      if (constrained) within_cap += w;
      auto rec = ladder_stats(s);
      int count = kind == Kind::Ascending ? rec.count_plus(m, z)
                  : strict                ? rec.count_minus_positive(m, z)
                                          : rec.count_minus_nonstrict(m, z);
      r.rhs += w * count / m;
      // Path reversal: the endpoint is a ladder point of the walk read backwards.
      const auto& ep = kind == Kind::Ascending ? rec.nonstrict_ascending
                       : strict                ? rec.strict_descending
                                               : rec.nonstrict_descending;
      if (!ep.empty() && ep.back().epoch == m) r.rearranged += w;
    });
    r.missing_mass = std::max(0.0, r.lhs - within_cap);
    if (r.missing_mass > identity_tol) {
      throw Error(ErrorCode::CapTooSmall, "alili_doney_check: mass beyond len_cap exceeds identity_tol");
    }
    r.rel_err = rel_err(r.lhs, r.rhs);
    r.rearranged_rel_err = rel_err(r.lhs, r.rearranged);
  };
  run({0, 0}, v, Kind::Ascending, out.ascending);
  run(v, {0, 0}, Kind::Strict, out.descending);
  run(v, {0, 0}, Kind::NonStrict, out.descending_nonstrict);
  return out;
}

const char* regime_name(DecompositionRegime r) { return r == DecompositionRegime::Opt1 ? "OPT1" : "OPT2"; }

DecompositionParams decompose_walk(const StepLaw& law, double epsilon, double c0) {
  DecompositionParams d;
  d.epsilon = epsilon;
  const double ea = std::exp(-law.a);
  const double eb = std::exp(-law.b);
  d.basic_gamma3 = std::exp(-law.beta - law.delta_a());
  const double threshold = c0 * std::exp(-law.beta);
  d.regime = epsilon <= threshold ? DecompositionRegime::Opt1 : DecompositionRegime::Opt2;
  d.near_boundary = epsilon >= threshold / 2 && epsilon <= 2 * threshold;
  auto marg = law.marginal();
  double spread = 0.0;
  for (const auto& [y, p] : marg) {
    if (y != kE1 && y != kE2) spread += static_cast<double>(norm1(y)) * p;
  }
  d.eta = spread > 0.0 ? d.basic_gamma3 / spread : kInf;
  if (d.regime == DecompositionRegime::Opt1) {
    d.alpha1 = 1.0;
    d.alpha2 = 0.0;
  } else {
    d.alpha1 = std::clamp(1.0 - d.basic_gamma3 / (d.eta * ea), 0.0, 1.0);
    d.alpha2 = std::clamp(1.0 - d.basic_gamma3 / eb, 0.0, 1.0);
  }
  d.q = d.alpha1 * ea + d.alpha2 * eb;
  d.p = d.q > 0.0 ? d.alpha2 * eb / d.q : 0.0;
  d.one_minus_q = 1.0 - d.q;
  d.q_ratio = d.one_minus_q / d.basic_gamma3;
  d.u_law = {{kE1, 1.0 - d.p}, {kE2, d.p}};
  auto u_prob = [&](LatticePoint y) { return y == kE1 ? 1.0 - d.p : y == kE2 ? d.p : 0.0; };
  for (const auto& [y, p] : marg) {
    double vy = (p - d.q * u_prob(y)) / d.one_minus_q;
    d.v_law.emplace_back(y, vy);
    d.v_mean_x += static_cast<double>(y.x) * vy;
  }
  double v_e2 = 0.0, v_g3 = 0.0;
  for (const auto& [y, vy] : d.v_law) {
    if (y == kE2) v_e2 = vy;
    if (y == kG3) v_g3 = vy;
  }
  d.v_vertical_min = std::min(v_e2, v_g3);
  for (const auto& [y, p] : marg) {
    double vy = 0.0;
    for (const auto& [yy, pv] : d.v_law) {
      if (yy == y) vy = pv;
    }
    d.max_mixture_err = std::max(d.max_mixture_err, std::abs(d.q * u_prob(y) + d.one_minus_q * vy - p));
  }
  return d;
}

std::vector<LocalLimitRow> local_limit_probe(const std::vector<LatticePoint>& xs, const StepLaw& law) {
  auto g = free_green(xs, law);
  const double eb = std::exp(-law.b);
  std::vector<LocalLimitRow> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    LocalLimitRow r;
    r.x = xs[i];
    r.p = g[i];
    r.reference = 1.0 / std::max(std::sqrt(eb * static_cast<double>(norm1(xs[i]))), 1.0);
    r.ratio = r.p / r.reference;
    out.push_back(r);
  }
  return out;
}

namespace {

struct HeightLaw {
  std::vector<Coord> z;
  std::vector<double> p;    // normalized
  std::vector<double> cdf;  // cumulative
};

HeightLaw height_law(const StepLaw& law, const WallDirection& n) {
  std::map<Coord, double> m;
  for (const auto& a : law.atoms) m[n.dot(a.x)] += a.p;
  HeightLaw h;
  double total = 0.0;
  for (const auto& [z, p] : m) total += p;
  double acc = 0.0;
  for (const auto& [z, p] : m) {
    h.z.push_back(z);
    h.p.push_back(p / total);
    acc += p / total;
    h.cdf.push_back(acc);
  }
  h.cdf.back() = 1.0;
  return h;
}

// P(the first ladder epoch ends at least one unit away from S₀), tracking the walk on [−depth, −1]
// (ascending) or [0, depth] (descending) for horizon steps; mass leaving the window is dropped.
double substantial_ladder_lower_bound(const HeightLaw& h, bool descending, int horizon, int depth) {
  std::vector<double> cur(static_cast<std::size_t>(depth) + 1, 0.0), next(cur.size());
  // Ascending: index i stands for S = −i (i ≥ 1). Descending: index i stands for S = i (i ≥ 0).
  double hit = 0.0;
  if (descending) {
    cur[0] = 1.0;
  } else {
    for (std::size_t k = 0; k < h.z.size(); ++k) {
      if (h.z[k] >= 1) hit += h.p[k];
      else if (h.z[k] < 0 && -h.z[k] <= depth) cur[static_cast<std::size_t>(-h.z[k])] += h.p[k];
    }
  }
  for (int t = descending ? 0 : 1; t < horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    double alive = 0.0;
    for (std::size_t i = descending ? 0 : 1; i < cur.size(); ++i) {
      if (cur[i] == 0.0) continue;
      alive += cur[i];
      Coord s = descending ? static_cast<Coord>(i) : -static_cast<Coord>(i);
      for (std::size_t k = 0; k < h.z.size(); ++k) {
        Coord ns = s + h.z[k];
        double w = cur[i] * h.p[k];
        if (descending) {
          if (ns < 0) hit += w;
          else if (ns <= depth) next[static_cast<std::size_t>(ns)] += w;
        } else {
          if (ns >= 1) hit += w;
          else if (ns < 0 && -ns <= depth) next[static_cast<std::size_t>(-ns)] += w;
        }
      }
    }
    cur.swap(next);
    if (alive < 1e-300) break;
  }
  return hit;
}

}  // namespace

LadderBoundReport ladder_bound_check(const StepLaw& law, const WallDirection& n, const LadderBoundSettings& s) {
  if (s.samples < 2) throw Error(ErrorCode::InvalidArgument, "ladder_bound_check: need at least two samples");
  if (s.eta < 1) throw Error(ErrorCode::InvalidArgument, "ladder_bound_check: eta must be positive");
  HeightLaw h = height_law(law, n);
  LadderBoundReport rep;
  rep.p_plus = substantial_ladder_lower_bound(h, false, s.p_horizon, s.p_depth);
  rep.p_minus = substantial_ladder_lower_bound(h, true, s.p_horizon, s.p_depth);

  const int horizon = *std::max_element(s.m.begin(), s.m.end());
  const std::size_t nz = s.z.size(), nm = s.m.size(), cells = 2 * nz * nm;
  auto cell = [&](int dir, std::size_t iz, std::size_t im) {
    return (static_cast<std::size_t>(dir) * nz + iz) * nm + im;
  };
  // Integer sums of N, N² and N⁴ per cell keep the result independent of the thread count.
  const int chunks = std::max(1, s.threads);
  std::vector<std::array<std::vector<std::uint64_t>, 3>> part(static_cast<std::size_t>(chunks));
  for (auto& p : part) {
    for (auto& v : p) v.assign(cells, 0);
  }
  parallel_for(static_cast<std::size_t>(chunks), s.threads, [&](std::size_t c) {
    auto& acc = part[c];
    std::vector<std::uint64_t> cnt(cells);
    for (std::size_t i = c; i < s.samples; i += static_cast<std::size_t>(chunks)) {
      CounterRng rng(s.seed, i);
      // τ₀ = 0 counts in every cell: H₀ = 0 for N⁺ and S₀ = z for N⁻.
      std::fill(cnt.begin(), cnt.end(), 1);
      Coord w = 0, up = 0, down = 0;
      std::size_t im = 0;
      for (int l = 1; l <= horizon; ++l) {
        double u = rng.uniform();
        auto k = static_cast<std::size_t>(std::upper_bound(h.cdf.begin(), h.cdf.end(), u) - h.cdf.begin());
        w += h.z[std::min(k, h.z.size() - 1)];
        while (im < nm && s.m[im] <= l) ++im;
        // N⁺ from S₀ = 0 counts heights w ≤ z; N⁻ from S₀ = z counts heights z + w ≥ 0.
        if (w >= up) {
          up = w;
          for (std::size_t iz = 0; iz < nz; ++iz) {
            if (w > s.z[iz]) continue;
            for (std::size_t j = im; j < nm; ++j) ++cnt[cell(0, iz, j)];
          }
        }
        if (w < down) {
          down = w;
          for (std::size_t iz = 0; iz < nz; ++iz) {
            if (w < -s.z[iz]) continue;
            for (std::size_t j = im; j < nm; ++j) ++cnt[cell(1, iz, j)];
          }
        }
      }
      for (std::size_t j = 0; j < cells; ++j) {
        acc[0][j] += cnt[j];
        acc[1][j] += cnt[j] * cnt[j];
        acc[2][j] += cnt[j] * cnt[j] * cnt[j] * cnt[j];
      }
    }
  });
  std::array<std::vector<std::uint64_t>, 3> sums;
  for (auto& v : sums) v.assign(cells, 0);
  for (const auto& p : part) {
    for (int q = 0; q < 3; ++q) {
      for (std::size_t j = 0; j < cells; ++j) sums[q][j] += p[q][j];
    }
  }
  const double ns = static_cast<double>(s.samples);
  const double eb = std::exp(law.b);
  for (int dir = 0; dir < 2; ++dir) {
    const double p = dir == 0 ? rep.p_plus : rep.p_minus;
    for (std::size_t iz = 0; iz < nz; ++iz) {
      for (std::size_t im = 0; im < nm; ++im) {
        const std::size_t j = cell(dir, iz, im);
        const double m1 = static_cast<double>(sums[0][j]) / ns;
        const double m2 = static_cast<double>(sums[1][j]) / ns;
        const double m4 = static_cast<double>(sums[2][j]) / ns;
        const Coord blocks = std::min<Coord>(std::max<Coord>((s.z[iz] + s.eta - 1) / s.eta, 1), s.m[im]);
        const double dn = static_cast<double>(s.z[iz] + 1);
        const double mm = static_cast<double>(s.m[im]);
        const double shape_scale = dir == 0 ? std::min(dn * eb, mm) : std::min(dn, mm);
        for (int k = 1; k <= 2; ++k) {
          LadderBoundRow r;
          r.descending = dir == 1;
          r.z = s.z[iz];
          r.m = s.m[im];
          r.k = k;
          r.mean = k == 1 ? m1 : m2;
          double var = k == 1 ? m2 - m1 * m1 : m4 - m2 * m2;
          var = std::max(var, 0.0) * ns / (ns - 1);
          r.ci_upper = r.mean + 1.96 * std::sqrt(var / ns);
          r.bound = std::pow((k == 1 ? s.c1 : s.c2) * static_cast<double>(blocks) / p, k);
          r.slack = r.ci_upper > 0.0 ? r.bound / r.ci_upper : kInf;
          r.holds = r.ci_upper <= r.bound;
          r.shape_ratio = std::pow(r.mean, 1.0 / k) / shape_scale;
          rep.all_hold = rep.all_hold && r.holds;
          rep.rows.push_back(r);
        }
      }
    }
  }
  return rep;
}

double letter_distance(LatticePoint w, LatticePoint z, const WallDirection& n) {
  if (!in_y(z - w)) throw Error(ErrorCode::InvalidArgument, "letter_distance: z − w outside Y");
  Region r(w, diag(z - w), z);
  Coord best = std::numeric_limits<Coord>::max();
  for (auto y : r.points()) {
    if (n.dot(y) >= 0) best = std::min(best, wall_distance(y, n));
  }
  if (best == std::numeric_limits<Coord>::max()) {
    throw Error(ErrorCode::OutsideHalfPlane, "letter_distance: diamond misses the half-plane");
  }
  return static_cast<double>(best - 1);
}

namespace {

// d(w, w + X) depends on n·w and X only; offsets holds the sorted n·y′ over lattice y′ ∈ D(0, X).
class LetterDistances {
 public:
  LetterDistances(const std::vector<Letter>& letters, const WallDirection& n) : n_(n) {
    k_ = std::abs(n.a()) + std::abs(n.b());
    for (const auto& l : letters) {
      Region r({0, 0}, diag(l.x), l.x);
      std::vector<Coord> t;
      for (auto y : r.points()) t.push_back(n.dot(y));
      std::sort(t.begin(), t.end());
      offsets_.push_back(std::move(t));
    }
  }

  Coord operator()(LatticePoint w, std::size_t letter) const {
    const auto& t = offsets_[letter];
    Coord h = n_.dot(w);
    auto it = std::lower_bound(t.begin(), t.end(), -h);
    if (it == t.end()) return 0;
    return (h + *it) / k_;
  }

 private:
  WallDirection n_;
  Coord k_ = 1;
  std::vector<std::vector<Coord>> offsets_;
};

double phi_factor(const Letter& l, Coord d, double beta, double chi, bool minus_one) {
  const double c = std::exp(-chi * beta * (2.0 + static_cast<double>(d)));
  double acc = 0.0;
  for (const auto& [len, p] : l.by_length) {
    acc += p * (minus_one ? std::expm1(static_cast<double>(len) * c) : std::exp(static_cast<double>(len) * c));
  }
  return acc;
}

struct PairProbe {
  double rho = 0.0;
  double a = 0.0;
  double b = 0.0;
};

PairProbe probe_pair(LatticePoint u, LatticePoint v, const WallDirection& n, const std::vector<Letter>& letters,
                     const LetterDistances& dist, double beta, double delta, double chi, bool with_phi) {
  PairProbe out;
  const Coord reach = diag(v - u);
  Region ru(u, reach, v);
  auto plain = [&](LatticePoint, std::size_t k) { return letters[k].p; };
  auto p_from_u = region_green(ru, letters, n, WallConstraint::NonStrict, -1, reach, plain);
  auto g_from_u = region_green(ru, letters, n, WallConstraint::NonStrict, -1, reach, [&](LatticePoint q, std::size_t k) {
    return with_phi ? phi_factor(letters[k], dist(q, k), beta, chi, false) : letters[k].p;
  });
  const auto iv = static_cast<std::size_t>(ru.find(v));
  const double puv = p_from_u[iv];
  if (puv == 0.0) return out;
  auto d = [&](LatticePoint p) { return static_cast<double>(wall_distance(p, n)); };
  out.rho = std::exp(-2 * delta * beta * (d(u) + d(v))) * g_from_u[iv] / puv;
  if (!with_phi) return out;

  // W = D(u, v) ∩ H₊ and P₊(s, t) for s, t ∈ W.
  std::vector<LatticePoint> w;
  std::vector<int> widx(ru.points().size(), -1);
  for (std::size_t i = 0; i < ru.points().size(); ++i) {
    if (n.dot(ru.points()[i]) >= 0) {
      widx[i] = static_cast<int>(w.size());
      w.push_back(ru.points()[i]);
    }
  }
  const std::size_t nw = w.size();
  std::vector<double> dw(nw), lower(nw * nw, 0.0);
  for (std::size_t i = 0; i < nw; ++i) dw[i] = d(w[i]);
  for (std::size_t i = 0; i < nw; ++i) {
    Coord rs = diag(v - w[i]);
    Region rs_region(w[i], rs, v);
    auto g = region_green(rs_region, letters, n, WallConstraint::NonStrict, -1, rs, plain);
    for (std::size_t j = 0; j < rs_region.points().size(); ++j) {
      int t = widx[static_cast<std::size_t>(ru.find(rs_region.points()[j]))];
      if (t < 0) continue;
      lower[i * nw + static_cast<std::size_t>(t)] = std::exp(-delta * beta * (dw[i] + dw[static_cast<std::size_t>(t)])) * g[j];
    }
  }
  // Ψ(w, z) over letters z − w, stored sparsely per source.
  std::vector<std::vector<std::pair<std::size_t, double>>> psi(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    for (std::size_t k = 0; k < letters.size(); ++k) {
      int j = ru.find(w[i] + letters[k].x);
      if (j < 0 || widx[static_cast<std::size_t>(j)] < 0) continue;
      auto t = static_cast<std::size_t>(widx[static_cast<std::size_t>(j)]);
      double val = std::exp(3 * delta * beta * (dw[i] + dw[t])) * phi_factor(letters[k], dist(w[i], k), beta, chi, true);
      psi[i].emplace_back(t, val);
    }
  }
  const std::size_t iu = static_cast<std::size_t>(widx[static_cast<std::size_t>(ru.find(u))]);
  const std::size_t ivw = static_cast<std::size_t>(widx[iv]);
  const double upper = std::exp(delta * beta * (d(u) + d(v))) * puv;
  std::vector<double> left(nw, 0.0), right(nw, 0.0);
  for (std::size_t i = 0; i < nw; ++i) {
    for (const auto& [t, val] : psi[i]) left[t] += lower[iu * nw + i] * val;
  }
  for (std::size_t i = 0; i < nw; ++i) {
    for (const auto& [t, val] : psi[i]) right[i] += val * lower[t * nw + ivw];
  }
  double a = 0.0, b = 0.0;
  for (std::size_t z1 = 0; z1 < nw; ++z1) {
    a += left[z1] * lower[z1 * nw + ivw];
    if (left[z1] == 0.0) continue;
    for (std::size_t w2 = 0; w2 < nw; ++w2) b += left[z1] * lower[z1 * nw + w2] * right[w2];
  }
  out.a = a / upper;
  out.b = b / upper;
  return out;
}

}  // namespace

double rho_delta(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law, double delta, double chi,
                 bool with_phi) {
  if (n.dot(u) < 0 || n.dot(v) < 0) throw Error(ErrorCode::OutsideHalfPlane, "rho_delta: endpoints must lie in H₊");
  if (!in_y(v - u) || u == v) throw Error(ErrorCode::InvalidArgument, "rho_delta: v − u must be a nonzero point of Y");
  auto letters = letters_of(law);
  LetterDistances dist(letters, n);
  return probe_pair(u, v, n, letters, dist, law.beta, delta, chi, with_phi).rho;
}

RhoProbeResult rho_recursion_probe(const WallDirection& n, const StepLaw& law, const RhoProbeSettings& s) {
  if (s.window < 1 || s.probe_depth < 1) throw Error(ErrorCode::InvalidArgument, "rho_recursion_probe: bad window");
  auto letters = letters_of(law);
  LetterDistances dist(letters, n);
  const LatticePoint t = n.tangent();
  const Coord k = std::abs(n.a()) + std::abs(n.b());
  // One representative of u per class modulo the wall tangent.
  auto canonical = [&](LatticePoint p) {
    if (t.x != 0) {
      Coord q = p.x >= 0 ? p.x / t.x : -((-p.x + t.x - 1) / t.x);
      return p - q * t;
    }
    Coord q = p.y >= 0 ? p.y / t.y : -((-p.y + t.y - 1) / t.y);
    return p - q * t;
  };
  const Coord box = std::max<Coord>(norm_inf(t), 1) + s.probe_depth * k;
  std::vector<LatticePoint> starts;
  for (Coord x = -box; x <= box; ++x) {
    for (Coord y = -box; y <= box; ++y) {
      LatticePoint p{x, y};
      if (n.dot(p) < 0 || wall_distance(p, n) > s.probe_depth) continue;
      if (canonical(p) == p) starts.push_back(p);
    }
  }
  RhoProbeResult r;
  for (auto u : starts) {
    for (Coord dx = -2 * s.window; dx <= 2 * s.window; ++dx) {
      for (Coord dy = -2 * s.window; dy <= 2 * s.window; ++dy) {
        LatticePoint dv{dx, dy};
        if (norm1(dv) < 1 || norm1(dv) > s.window || !in_y(dv)) continue;
        LatticePoint v = u + dv;
        if (n.dot(v) < 0 || wall_distance(v, n) > s.probe_depth) continue;
        auto p = probe_pair(u, v, n, letters, dist, law.beta, s.delta, s.chi, true);
        ++r.pairs;
        if (p.rho > r.rho_max_raw) {
          r.rho_max_raw = p.rho;
          r.worst_u = u;
          r.worst_v = v;
        }
        r.a_delta = std::max(r.a_delta, p.a);
        r.b_delta = std::max(r.b_delta, p.b);
      }
    }
  }
  r.rho = std::max(1.0, r.rho_max_raw);
  r.recursion_bound = r.b_delta < 1.0 ? (1.0 + r.a_delta) / (1.0 - r.b_delta) : kInf;
  r.consistent = r.b_delta < 1.0 && r.rho <= r.recursion_bound;
  return r;
}

}  // namespace polylab
