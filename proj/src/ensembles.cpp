#include "polylab/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "polylab/error.hpp"
#include "polylab/logsum.hpp"

namespace polylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kChunk = 2048;

bool vanishes_beyond_singletons(const PotentialSpec& p) {
  return p.kind == PotentialKind::Zero || p.kind == PotentialKind::BoundaryPin;
}

}  // namespace

const char* weight_mode_name(WeightMode m) {
  switch (m) {
    case WeightMode::Raw: return "RAW";
    case WeightMode::Direct: return "DIRECT";
    case WeightMode::Positivized: return "POSITIVIZED";
  }
  return "?";
}

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "RAW") return WeightMode::Raw;
  if (s == "DIRECT") return WeightMode::Direct;
  if (s == "POSITIVIZED") return WeightMode::Positivized;
  throw Error(ErrorCode::InvalidArgument, "unknown weight mode '" + s + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Free: return "FREE";
    case Variant::RestrictedHalfPlane: return "RESTRICTED_HALFPLANE";
    case Variant::Pinned: return "PINNED";
  }
  return "?";
}

double cluster_truncation_bound(const PotentialSpec& phi, const std::optional<PotentialSpec>& boundary,
                                const WeightSettings& s, std::size_t length) {
  if (s.mode == WeightMode::Raw) return 0.0;
  bool finite_support = vanishes_beyond_singletons(phi) && (!boundary || vanishes_beyond_singletons(*boundary));
  if (s.mode == WeightMode::Direct && finite_support) return 0.0;
  double chi = boundary ? std::min(phi.chi, boundary->chi) : phi.chi;
  double r = s.growth_constant * std::exp(-chi * s.beta);
  if (!(r < 1.0)) return kInf;
  double tail = 6.0 * std::exp(-chi * s.beta) * std::pow(r, s.cluster_cap + 1) / (1.0 - r);
  double per_bond = s.mode == WeightMode::Positivized ? 6.0 : 3.0;
  return per_bond * static_cast<double>(length) * tail;
}

WeightPair q_weight_pair(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s) {
  WeightPair out;
  double base = -s.beta * static_cast<double>(g.length());
  out.plain.log_q = base;
  out.modified.log_q = base;
  if (s.mode == WeightMode::Raw) return out;
  ContourContext ctx(g, s.cluster_cap, s.delta_mode, phi.wall);
  KahanSum plain, modified;
  const bool positivized = s.mode == WeightMode::Positivized;
  ctx.for_each_cluster([&](const ClusterHit& h) {
    int d = h.shape->diam;
    double v = phi.base.evaluate(h.sites, h.delta_part, d, s.beta);
    double vt = phi.is_identity() ? v : phi.evaluate(h.sites, h.delta_part, d, s.beta, h.inside_half_plane);
    double extra = positivized ? h.nabla_count * decay_bound(phi.base.chi, s.beta, d) : 0.0;
    plain.add(v + extra);
    modified.add(vt + extra);
  });
  out.plain.log_q = base + plain.value();
  out.modified.log_q = base + modified.value();
  out.plain.truncation_err = cluster_truncation_bound(phi.base, std::nullopt, s, g.length());
  out.modified.truncation_err = cluster_truncation_bound(phi.base, phi.boundary, s, g.length());
  return out;
}

ContourWeight q_weight(const OpenContour& g, const PotentialSpec& phi, const WeightSettings& s) {
  return q_weight_pair(g, ModifiedPotentialSpec::identity(phi, WallDirection::horizontal()), s).plain;
}

ContourWeight q_weight_modified(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s) {
  return q_weight_pair(g, phi, s).modified;
}

int default_max_len(LatticePoint x, const TwoPointSettings& s) {
  return s.max_len > 0 ? s.max_len : static_cast<int>(norm1(x)) + 2 * s.excess_levels;
}

namespace {

struct Accumulated {
  std::vector<LogSum> shells;
  double max_err = 0.0;
};

// Length tail from the geometric decay of the last enumerated shells.
double estimate_tail_log(const std::vector<double>& shell_log, int min_len) {
  std::vector<double> present;
  for (std::size_t L = static_cast<std::size_t>(min_len); L < shell_log.size(); L += 2) {
    if (std::isfinite(shell_log[L])) present.push_back(shell_log[L]);
  }
  if (present.size() < 2) return kInf;
  double lr = -kInf;
  std::size_t n = present.size();
  for (std::size_t i = (n >= 3 ? n - 3 : 0); i + 1 < n; ++i) lr = std::max(lr, present[i + 1] - present[i]);
  if (!(lr < 0)) return kInf;
  return present.back() + lr - std::log(-std::expm1(lr));
}

TwoPointResult finish(LatticePoint x, Variant v, int max_len, std::size_t count, const Accumulated& acc) {
  TwoPointResult r;
  r.endpoint = x;
  r.variant = v;
  r.cutoff_used = max_len;
  r.contours = count;
  LogSum total;
  r.shell_log.assign(acc.shells.size(), -kInf);
  for (std::size_t L = 0; L < acc.shells.size(); ++L) {
    r.shell_log[L] = acc.shells[L].value();
    total.merge(acc.shells[L]);
  }
  r.value_log = total.value();
  r.cluster_err = acc.max_err;
  r.cutoff_tail_log = estimate_tail_log(r.shell_log, static_cast<int>(norm1(x)));
  r.err_lo = r.value_log - r.cluster_err;
  double tail_rel = std::isfinite(r.cutoff_tail_log) ? std::log1p(std::exp(r.cutoff_tail_log - r.value_log)) : kInf;
  r.err_hi = r.value_log + r.cluster_err + tail_rel;
  return r;
}

TwoPointPair run_pair(LatticePoint x, const ModifiedPotentialSpec& phi, const TwoPointSettings& s,
                      const std::optional<WallDirection>& constraint) {
  if (x == LatticePoint{0, 0}) throw Error(ErrorCode::InvalidArgument, "two_point: x must be nonzero");
  int max_len = default_max_len(x, s);
  EnumerationOptions eo;
  eo.constraint = constraint;
  eo.threads = s.threads;
  ContourSet set = s.cache ? s.cache->get_or_compute({0, 0}, x, max_len, eo) : collect_contours({0, 0}, x, max_len, eo);
  if (set.size() > s.budget) {
    throw Error(ErrorCode::BudgetExceeded, "two_point: " + std::to_string(set.size()) + " contours exceed the budget");
  }
  std::size_t chunks = (set.size() + kChunk - 1) / kChunk;
  std::vector<Accumulated> plain(chunks), modified(chunks);
  parallel_for(chunks, s.threads, [&](std::size_t c) {
    plain[c].shells.assign(static_cast<std::size_t>(max_len) + 1, LogSum{});
    modified[c].shells.assign(static_cast<std::size_t>(max_len) + 1, LogSum{});
    std::size_t end = std::min(set.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      OpenContour g = set.contour(i);
      WeightPair w = q_weight_pair(g, phi, s.weights);
      plain[c].shells[g.length()].add(w.plain.log_q);
      modified[c].shells[g.length()].add(w.modified.log_q);
      plain[c].max_err = std::max(plain[c].max_err, w.plain.truncation_err);
      modified[c].max_err = std::max(modified[c].max_err, w.modified.truncation_err);
    }
  });
  Accumulated p, m;
  p.shells.assign(static_cast<std::size_t>(max_len) + 1, LogSum{});
  m.shells.assign(static_cast<std::size_t>(max_len) + 1, LogSum{});
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t L = 0; L < p.shells.size(); ++L) {
      p.shells[L].merge(plain[c].shells[L]);
      m.shells[L].merge(modified[c].shells[L]);
    }
    p.max_err = std::max(p.max_err, plain[c].max_err);
    m.max_err = std::max(m.max_err, modified[c].max_err);
  }
  Variant pv = constraint ? Variant::RestrictedHalfPlane : Variant::Free;
  return {finish(x, pv, max_len, set.size(), p), finish(x, Variant::Pinned, max_len, set.size(), m)};
}

}  // namespace

TwoPointResult two_point(LatticePoint x, Variant variant, const ModifiedPotentialSpec& phi, const TwoPointSettings& s) {
  if (variant == Variant::Free) {
    return run_pair(x, ModifiedPotentialSpec::identity(phi.base, phi.wall), s, std::nullopt).restricted;
  }
  if (!phi.wall.in_half_plane(x)) throw Error(ErrorCode::OutsideHalfPlane, "two_point: endpoint outside the half-plane");
  auto pair = run_pair(x, phi, s, phi.wall);
  return variant == Variant::Pinned ? pair.pinned : pair.restricted;
}

TwoPointPair two_point_pair(LatticePoint x, const ModifiedPotentialSpec& phi, const TwoPointSettings& s) {
  if (!phi.wall.in_half_plane(x)) throw Error(ErrorCode::OutsideHalfPlane, "two_point: endpoint outside the half-plane");
  return run_pair(x, phi, s, phi.wall);
}

SandwichReport sandwich_check(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s) {
  SandwichReport rep;
  rep.contours = 1;
  rep.tightest_slack = kInf;
  for (auto v : g.vertices()) {
    if (!phi.wall.in_half_plane(v)) throw Error(ErrorCode::OutsideHalfPlane, "sandwich_check: contour leaves H+");
  }
  std::unordered_set<LatticePoint, LatticePointHash> seen;
  KahanSum bracket;
  for (auto u : g.vertices()) {
    if (seen.insert(u).second) {
      bracket.add(std::exp(-phi.base.chi * s.beta * static_cast<double>(wall_distance(u, phi.wall) + 1)));
    }
  }
  WeightPair w = q_weight_pair(g, phi, s);
  double band = w.plain.truncation_err + w.modified.truncation_err;
  double diff = w.modified.log_q - w.plain.log_q;
  double slack = bracket.value() - std::abs(diff);
  rep.tightest_slack = slack;
  if (slack < -band - 1e-14) {
    rep.violations = 1;
    rep.worst_excess = -slack;
    rep.offending = format_steps(g.steps());
  }
  return rep;
}

SandwichReport sandwich_check_all(LatticePoint x, int max_len, const ModifiedPotentialSpec& phi, const WeightSettings& s,
                                  int threads) {
  EnumerationOptions eo;
  eo.constraint = phi.wall;
  eo.threads = threads;
  ContourSet set = collect_contours({0, 0}, x, max_len, eo);
  std::vector<SandwichReport> parts(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) { parts[i] = sandwich_check(set.contour(i), phi, s); });
  SandwichReport out;
  out.tightest_slack = kInf;
  for (const auto& p : parts) {
    out.contours += p.contours;
    out.violations += p.violations;
    out.tightest_slack = std::min(out.tightest_slack, p.tightest_slack);
    if (p.worst_excess > out.worst_excess) {
      out.worst_excess = p.worst_excess;
      out.offending = p.offending;
    }
  }
  return out;
}

LatticePoint wall_point(const WallDirection& n, int L) {
  LatticePoint t = n.tangent();
  double len = std::hypot(static_cast<double>(t.x), static_cast<double>(t.y));
  Coord k = std::max<Coord>(1, std::llround(L / len));
  return k * t;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& half_width) {
  SlopeFit f;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || half_width.size() != n) {
    f.inconclusive = true;
    f.sigma = kInf;
    return f;
  }
  double min_hw = *std::min_element(half_width.begin(), half_width.end());
  bool weighted = min_hw > 0;
  for (double h : half_width) {
    if (!std::isfinite(h)) {
      f.inconclusive = true;
      weighted = false;
    }
  }
  std::vector<double> w(n, 1.0);
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (half_width[i] * half_width[i]);
  }
  KahanSum sw, swx, swy;
  for (std::size_t i = 0; i < n; ++i) {
    sw.add(w[i]);
    swx.add(w[i] * x[i]);
    swy.add(w[i] * y[i]);
  }
  double xm = swx.value() / sw.value();
  double ym = swy.value() / sw.value();
  KahanSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx.add(w[i] * (x[i] - xm) * (x[i] - xm));
    sxy.add(w[i] * (x[i] - xm) * (y[i] - ym));
  }
  f.slope = sxy.value() / sxx.value();
  f.intercept = ym - f.slope * xm;
  if (f.inconclusive) {
    f.sigma_band = kInf;
  } else if (weighted) {
    f.sigma_band = std::sqrt(1.0 / sxx.value());
  }
  if (n > 2) {
    KahanSum rss;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - (f.intercept + f.slope * x[i]);
      rss.add(w[i] * r * r);
    }
    f.sigma_residual = std::sqrt(rss.value() / static_cast<double>(n - 2) / sxx.value());
  }
  f.sigma = std::hypot(f.sigma_band, f.sigma_residual);
  if (!std::isfinite(f.sigma)) f.inconclusive = true;
  return f;
}

RatioTable nopinning_ratio_experiment(const std::vector<int>& L_values, const std::vector<double>& beta_values,
                                      const ModifiedPotentialSpec& phi, const TwoPointSettings& s) {
  RatioTable table;
  for (double beta : beta_values) {
    TwoPointSettings sb = s;
    sb.weights.beta = beta;
    std::vector<double> xs, ys, hws;
    for (int L : L_values) {
      RatioRow row;
      row.L = L;
      row.beta = beta;
      row.x = wall_point(phi.wall, L);
      auto pair = two_point_pair(row.x, phi, sb);
      row.restricted = pair.restricted;
      row.pinned = pair.pinned;
      row.ratio_log = pair.pinned.value_log - pair.restricted.value_log;
      row.lo = pair.pinned.err_lo - pair.restricted.err_hi;
      row.hi = pair.pinned.err_hi - pair.restricted.err_lo;
      xs.push_back(L);
      ys.push_back(row.ratio_log);
      hws.push_back(0.5 * (row.hi - row.lo));
      table.rows.push_back(row);
    }
    table.fits.emplace_back(beta, fit_slope(xs, ys, hws));
  }
  return table;
}

std::vector<SurfaceTensionRow> surface_tension_estimate(LatticePoint direction, const std::vector<int>& N_values,
                                                        const ModifiedPotentialSpec& phi, const TwoPointSettings& s) {
  std::vector<SurfaceTensionRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int N : N_values) {
    SurfaceTensionRow r;
    r.N = N;
    r.x = static_cast<Coord>(N) * direction;
    double d = std::hypot(static_cast<double>(r.x.x), static_cast<double>(r.x.y));
    double scale = s.weights.beta * d;
    auto free = two_point(r.x, Variant::Free, phi, s);
    r.tau_free = -free.value_log / scale;
    r.tau_free_lo = -free.err_hi / scale;
    r.tau_free_hi = -free.err_lo / scale;
    r.tau_pinned = r.tau_pinned_lo = r.tau_pinned_hi = nan;
    if (phi.wall.dot(r.x) == 0) {
      auto pinned = two_point(r.x, Variant::Pinned, phi, s);
      r.tau_pinned = -pinned.value_log / scale;
      r.tau_pinned_lo = -pinned.err_hi / scale;
      r.tau_pinned_hi = -pinned.err_lo / scale;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace polylab
