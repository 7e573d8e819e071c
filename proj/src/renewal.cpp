#include "polylab/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "polylab/clusters.hpp"
#include "polylab/error.hpp"
#include "polylab/logsum.hpp"

namespace polylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Coord f_form(LatticePoint v) { return v.x + 2 * v.y; }
Coord g_form(LatticePoint v) { return 2 * v.x + v.y; }

}  // namespace

std::vector<std::size_t> break_points(const OpenContour& g) {
  const auto& v = g.vertices();
  const std::size_t m = g.length();
  std::vector<std::size_t> out;
  if (m < 2) return out;
  std::vector<Coord> suf_f(m + 1), suf_g(m + 1);
  suf_f[m] = f_form(v[m]);
  suf_g[m] = g_form(v[m]);
  for (std::size_t j = m; j-- > 0;) {
    suf_f[j] = std::min(suf_f[j + 1], f_form(v[j]));
    suf_g[j] = std::min(suf_g[j + 1], g_form(v[j]));
  }
  Coord pre_f = f_form(v[0]), pre_g = g_form(v[0]);
  for (std::size_t l = 1; l < m; ++l) {
    Coord f = f_form(v[l]), gg = g_form(v[l]);
    if (f >= pre_f && gg >= pre_g && f <= suf_f[l + 1] && gg <= suf_g[l + 1]) out.push_back(l);
    pre_f = std::max(pre_f, f);
    pre_g = std::max(pre_g, gg);
  }
  return out;
}

bool is_irreducible(const OpenContour& g) { return break_points(g).empty(); }

bool in_diamond_class(const OpenContour& g) {
  for (auto v : g.vertices()) {
    if (!in_diamond(v, g.start(), g.end())) return false;
  }
  return true;
}

OpenContour IrreducibleDecomposition::concatenate() const {
  std::vector<const OpenContour*> pieces;
  if (left) pieces.push_back(&*left);
  for (const auto& m : middle) pieces.push_back(&m);
  if (right) pieces.push_back(&*right);
  if (pieces.empty()) throw Error(ErrorCode::EmptySet, "decomposition has no pieces");
  OpenContour out = *pieces.front();
  for (std::size_t i = 1; i < pieces.size(); ++i) out = out.concatenated(*pieces[i]);
  return out;
}

IrreducibleDecomposition decompose(const OpenContour& g) {
  IrreducibleDecomposition d;
  d.break_indices = break_points(g);
  if (d.break_indices.empty()) {
    d.left = g;
    return d;
  }
  std::vector<std::size_t> cuts = {0};
  cuts.insert(cuts.end(), d.break_indices.begin(), d.break_indices.end());
  cuts.push_back(g.length());
  OpenContour first = g.slice(cuts[0], cuts[1]);
  OpenContour last = g.slice(cuts[cuts.size() - 2], cuts.back());
  if (in_diamond_class(first)) {
    d.middle.push_back(first);
  } else {
    d.left = first;
  }
  for (std::size_t i = 1; i + 2 < cuts.size(); ++i) d.middle.push_back(g.slice(cuts[i], cuts[i + 1]));
  if (in_diamond_class(last)) {
    d.middle.push_back(last);
  } else {
    d.right = last;
  }
  return d;
}

double covering_sum(const std::vector<std::pair<std::uint32_t, double>>& groups, std::uint32_t full_mask) {
  std::size_t size = static_cast<std::size_t>(full_mask) + 1;
  std::vector<double> dp(size, 0.0), next;
  dp[0] = 1.0;
  for (const auto& [mask, f] : groups) {
    next = dp;
    for (std::size_t m = 0; m < size; ++m) {
      if (dp[m] != 0.0) next[(m | mask) & full_mask] += dp[m] * f;
    }
    dp.swap(next);
  }
  return dp[full_mask];
}

namespace {

void weigh_path(const std::vector<Step>& steps, const AnimalTableSettings& s, std::vector<AnimalEntry>& out) {
  OpenContour g({0, 0}, steps);
  const LatticePoint X = g.end();
  const auto B = break_points(g);
  const double bare = -s.beta * static_cast<double>(g.length());
  AnimalEntry base;
  base.steps = steps;
  base.displacement = X;
  base.length = static_cast<int>(g.length());
  base.break_points = static_cast<int>(B.size());
  if (B.empty()) {
    AnimalEntry e = base;
    e.log_q = bare;
    out.push_back(std::move(e));
  }
  ContourContext ctx(g, s.cluster_cap, s.delta_mode);
  KahanSum free_log;
  std::map<std::uint32_t, KahanSum> group_log;
  int clusters = 0;
  const auto& vs = g.vertices();
  ctx.for_each_cluster([&](const ClusterHit& h) {
    for (auto site : h.sites) {
      if (!cell_in_diamond(site, {0, 0}, X)) return;
    }
    int d = h.shape->diam;
    double prime = s.phi.evaluate(h.sites, h.delta_part, d, s.beta) + h.nabla_count * decay_bound(s.phi.chi, s.beta, d);
    double psi = psi_weight(prime, true);
    if (!(psi > 0)) return;
    std::uint32_t mask = 0;
    for (std::size_t j = 0; j < B.size(); ++j) {
      LatticePoint u = vs[B[j]];
      for (auto site : h.sites) {
        if (!cell_in_cone(site, u) && !cell_in_back_cone(site, u)) {
          mask |= 1u << j;
          break;
        }
      }
    }
    double l = std::log1p(psi);
    if (mask == 0) {
      free_log.add(l);
    } else {
      group_log[mask].add(l);
    }
    ++clusters;
  });
  double w;
  if (B.empty()) {
    w = std::expm1(free_log.value());
  } else {
    std::vector<std::pair<std::uint32_t, double>> groups;
    for (const auto& [mask, sum] : group_log) groups.emplace_back(mask, std::expm1(sum.value()));
    std::uint32_t full = static_cast<std::uint32_t>((1u << B.size()) - 1);
    w = std::exp(free_log.value()) * covering_sum(groups, full);
  }
  if (w > 0) {
    AnimalEntry e = base;
    e.decorated = true;
    e.clusters = clusters;
    e.log_q = bare + std::log(w);
    out.push_back(std::move(e));
  }
}

}  // namespace

AnimalTable enumerate_irreducible_animals(const AnimalTableSettings& s) {
  if (s.len_cap < 1 || s.cluster_cap < 1) throw Error(ErrorCode::InvalidArgument, "animal table caps must be positive");
  if (s.len_cap > 20 || s.extended_len_cap > 30) {
    throw Error(ErrorCode::InvalidArgument, "len_cap above 20 or extended_len_cap above 30 is not supported");
  }
  if (s.extended_len_cap > s.len_cap && s.max_excess < 0) {
    throw Error(ErrorCode::InvalidArgument, "the extension needs a nonnegative max_excess");
  }
  AnimalTable table;
  table.settings = s;
  std::vector<std::vector<Step>> paths;
  const int max_len = std::max(s.len_cap, s.extended_len_cap);
  std::vector<LatticePoint> vs;
  std::vector<Coord> suf_f, suf_g;
  auto keep = [&](LatticePoint next, std::span<const Step> prefix) {
    if (!in_forward_cone(next)) return false;
    const int len = static_cast<int>(prefix.size()) + 1;
    if (len <= s.len_cap) return true;
    const int slack = s.max_excess - path_excess(next, len);
    if (slack < 0) return false;
    // Later steps lower f or g by at most 2 per unit of excess, so a break point far enough behind is permanent.
    vs.assign(1, LatticePoint{0, 0});
    for (Step st : prefix) vs.push_back(vs.back() + step_vector(st));
    vs.push_back(next);
    const std::size_t m = vs.size() - 1;
    suf_f.assign(m + 1, 0);
    suf_g.assign(m + 1, 0);
    suf_f[m] = f_form(vs[m]);
    suf_g[m] = g_form(vs[m]);
    for (std::size_t j = m; j-- > 0;) {
      suf_f[j] = std::min(suf_f[j + 1], f_form(vs[j]));
      suf_g[j] = std::min(suf_g[j + 1], g_form(vs[j]));
    }
    const Coord floor_f = f_form(next) - 2 * slack, floor_g = g_form(next) - 2 * slack;
    Coord pre_f = f_form(vs[0]), pre_g = g_form(vs[0]);
    for (std::size_t l = 1; l < m; ++l) {
      Coord f = f_form(vs[l]), gg = g_form(vs[l]);
      if (f >= pre_f && gg >= pre_g && f <= suf_f[l + 1] && gg <= suf_g[l + 1] && f <= floor_f && gg <= floor_g) {
        return false;
      }
      pre_f = std::max(pre_f, f);
      pre_g = std::max(pre_g, gg);
    }
    return true;
  };
  enumerate_trails({0, 0}, max_len, keep, [&](std::span<const Step> steps) {
    LatticePoint end{0, 0};
    for (Step st : steps) end = end + step_vector(st);
    LatticePoint v{0, 0};
    if (!in_forward_cone(end)) return;
    for (Step st : steps) {
      v = v + step_vector(st);
      if (!in_cone(end, v)) return;
    }
    if (static_cast<int>(steps.size()) > s.len_cap && !is_irreducible(OpenContour({0, 0}, {steps.begin(), steps.end()}))) {
      return;
    }
    paths.emplace_back(steps.begin(), steps.end());
    if (2 * paths.size() > s.budget) {
      throw Error(ErrorCode::BudgetExceeded, "animal table exceeds the budget");
    }
  });
  table.paths = paths.size();
  std::vector<std::vector<AnimalEntry>> parts(paths.size());
  parallel_for(paths.size(), s.threads, [&](std::size_t i) { weigh_path(paths[i], s, parts[i]); });
  for (auto& p : parts) {
    for (auto& e : p) table.entries.push_back(std::move(e));
  }
  double r = s.growth_constant * std::exp(-s.phi.chi * s.beta);
  double tail = r < 1 ? 6.0 * std::exp(-s.phi.chi * s.beta) * std::pow(r, s.cluster_cap + 1) / (1.0 - r) : kInf;
  table.cluster_truncation = 6.0 * s.len_cap * tail;
  return table;
}

double tilted_log_weight(const AnimalEntry& e, const std::array<double, 2>& h) {
  return e.log_q + h[0] * static_cast<double>(e.displacement.x) + h[1] * static_cast<double>(e.displacement.y);
}

std::vector<double> tilted_mass_by_length(const AnimalTable& table, const std::array<double, 2>& h) {
  std::vector<LogSum> shells(static_cast<std::size_t>(std::max(table.settings.len_cap, table.settings.extended_len_cap)) + 1);
  for (const auto& e : table.entries) shells[static_cast<std::size_t>(e.length)].add(tilted_log_weight(e, h));
  std::vector<double> out(shells.size(), 0.0);
  for (std::size_t l = 0; l < shells.size(); ++l) out[l] = shells[l].empty() ? 0.0 : std::exp(shells[l].value());
  return out;
}

std::vector<double> tilted_mass_by_excess(const AnimalTable& table, const std::array<double, 2>& h) {
  std::vector<LogSum> shells;
  for (const auto& e : table.entries) {
    auto k = static_cast<std::size_t>(path_excess(e.displacement, e.length));
    if (k >= shells.size()) shells.resize(k + 1);
    shells[k].add(tilted_log_weight(e, h));
  }
  std::vector<double> out(shells.size(), 0.0);
  for (std::size_t k = 0; k < shells.size(); ++k) out[k] = shells[k].empty() ? 0.0 : std::exp(shells[k].value());
  return out;
}

namespace {

struct Atoms {
  std::vector<std::array<double, 2>> x;
  std::vector<double> logw;
};

Atoms aggregate(const AnimalTable& table) {
  std::map<LatticePoint, LogSum> by_x;
  for (const auto& e : table.entries) by_x[e.displacement].add(e.log_q);
  Atoms a;
  for (const auto& [X, ls] : by_x) {
    a.x.push_back({static_cast<double>(X.x), static_cast<double>(X.y)});
    a.logw.push_back(ls.value());
  }
  return a;
}

struct Moments {
  double log_z = 0.0;
  std::array<double, 2> mean{0, 0};
  std::array<double, 3> cov{0, 0, 0};  // c11, c12, c22
};

Moments moments(const Atoms& a, const std::array<double, 2>& h) {
  LogSum z;
  std::vector<double> lw(a.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    lw[i] = a.logw[i] + h[0] * a.x[i][0] + h[1] * a.x[i][1];
    z.add(lw[i]);
  }
  Moments m;
  m.log_z = z.value();
  KahanSum m1, m2;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    double p = std::exp(lw[i] - m.log_z);
    m1.add(p * a.x[i][0]);
    m2.add(p * a.x[i][1]);
  }
  m.mean = {m1.value(), m2.value()};
  KahanSum c11, c12, c22;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    double p = std::exp(lw[i] - m.log_z);
    double d1 = a.x[i][0] - m.mean[0], d2 = a.x[i][1] - m.mean[1];
    c11.add(p * d1 * d1);
    c12.add(p * d1 * d2);
    c22.add(p * d2 * d2);
  }
  m.cov = {c11.value(), c12.value(), c22.value()};
  return m;
}

double length_tail(const std::vector<double>& mass) {
  std::size_t n = mass.size();
  if (n < 4 || mass[n - 1] == 0.0) return 0.0;
  double r = 0.0;
  for (std::size_t l = n - 3; l + 1 < n; ++l) {
    if (mass[l] <= 0) return kInf;
    r = std::max(r, mass[l + 1] / mass[l]);
  }
  if (!(r < 1)) return kInf;
  return mass[n - 1] * r / (1.0 - r);
}

}  // namespace

TiltVector tilt_solve(std::array<double, 2> direction, const AnimalTable& table, const TiltOptions& opts) {
  double dn = std::hypot(direction[0], direction[1]);
  if (!(dn > 0) || direction[0] < 0 || direction[1] < 0) {
    throw Error(ErrorCode::InvalidArgument, "tilt direction must be a nonzero vector in the first quadrant");
  }
  if (table.entries.empty()) throw Error(ErrorCode::EmptySet, "tilt_solve: empty animal table");
  const double beta = table.settings.beta;
  const std::array<double, 2> d = {direction[0] / dn, direction[1] / dn};
  const std::array<double, 2> dperp = {d[1], -d[0]};
  const double eps = direction[1] / (direction[0] + direction[1]);
  Atoms atoms = aggregate(table);

  auto guess = [&](double e) {
    double a0 = std::max(e, std::exp(-beta));
    double u0 = e > 0 ? std::clamp(beta + std::log(e), 0.0, beta) : 0.0;
    return std::array<double, 2>{beta - a0, u0};
  };
  std::array<double, 2> h;
  if (eps <= 0.5) {
    h = guess(eps);
  } else {
    auto m = guess(1.0 - eps);
    h = {m[1], m[0]};
  }

  auto residual = [&](const Moments& m) {
    return std::array<double, 2>{m.log_z, m.mean[0] * dperp[0] + m.mean[1] * dperp[1]};
  };
  auto norm = [](const std::array<double, 2>& f) { return std::max(std::abs(f[0]), std::abs(f[1])); };

  TiltVector t;
  Moments m = moments(atoms, h);
  auto f = residual(m);
  int it = 0;
  for (; it < opts.max_iterations && norm(f) > opts.tolerance; ++it) {
    double j11 = m.mean[0], j12 = m.mean[1];
    double j21 = m.cov[0] * dperp[0] + m.cov[1] * dperp[1];
    double j22 = m.cov[1] * dperp[0] + m.cov[2] * dperp[1];
    double det = j11 * j22 - j12 * j21;
    if (!(std::abs(det) > 0)) break;
    std::array<double, 2> step = {(-f[0] * j22 + f[1] * j12) / det, (-j11 * f[1] + j21 * f[0]) / det};
    double lambda = 1.0;
    bool improved = false;
    while (lambda > 1e-12) {
      std::array<double, 2> hn = {h[0] + lambda * step[0], h[1] + lambda * step[1]};
      Moments mn = moments(atoms, hn);
      auto fn = residual(mn);
      if (norm(fn) < norm(f)) {
        h = hn;
        m = mn;
        f = fn;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  t.h = h;
  t.beta = beta;
  t.a = beta - h[0];
  t.b = beta - h[1];
  t.delta_a = 4 * t.a + (beta - t.b);
  t.delta_b = 4 * t.b + (beta - t.a);
  t.epsilon = eps;
  t.direction = d;
  t.mean = m.mean;
  t.normalization_residual = std::abs(std::expm1(m.log_z));
  t.collinearity_residual = std::abs(m.mean[0] * d[1] - m.mean[1] * d[0]);
  t.residual_norm = norm(f);
  t.iterations = it;
  t.converged = norm(f) <= opts.tolerance * 100;
  t.length_tail = length_tail(tilted_mass_by_length(table, h));
  if (table.settings.extended_len_cap > table.settings.len_cap) {
    auto by_excess = tilted_mass_by_excess(table, h);
    by_excess.resize(std::min(by_excess.size(), static_cast<std::size_t>(table.settings.max_excess) + 1));
    t.excess_tail = length_tail(by_excess);
  }
  t.tail = t.length_tail + t.excess_tail + table.cluster_truncation;
  t.tail_dominates = t.tail > opts.tolerance;
  // Missing mass T sits at |X|₁ ≤ L, so it moves the residuals by at most (T, T·L); propagate through J⁻¹.
  {
    double reach = std::max(table.settings.len_cap, table.settings.extended_len_cap) + 1.0;
    double j11 = m.mean[0], j12 = m.mean[1];
    double j21 = m.cov[0] * dperp[0] + m.cov[1] * dperp[1];
    double j22 = m.cov[1] * dperp[0] + m.cov[2] * dperp[1];
    double det = j11 * j22 - j12 * j21;
    double f1 = t.tail, f2 = t.tail * reach;
    if (std::abs(det) > 0 && std::isfinite(t.tail)) {
      t.a_uncertainty = (std::abs(j22) * f1 + std::abs(j12) * f2) / std::abs(det);
      t.b_uncertainty = (std::abs(j21) * f1 + std::abs(j11) * f2) / std::abs(det);
    } else {
      t.a_uncertainty = t.b_uncertainty = kInf;
    }
  }
  return t;
}

TiltVector tilt_solve_epsilon(double epsilon, const AnimalTable& table, const TiltOptions& opts) {
  if (!(epsilon >= 0 && epsilon <= 1)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
  return tilt_solve({1.0 - epsilon, epsilon}, table, opts);
}

BasicAnimalCheck basic_animal_check(const TiltVector& t, const AnimalTable& table) {
  const std::array<std::vector<Step>, 4> shapes = {parse_steps("E"), parse_steps("N"), parse_steps("EESEE"),
                                                   parse_steps("NNWNN")};
  BasicAnimalCheck c;
  c.closed_form = {std::exp(-t.a), std::exp(-t.b), std::exp(-t.beta - t.delta_a), std::exp(-t.beta - t.delta_b)};
  c.table.fill(std::numeric_limits<double>::quiet_NaN());
  for (const auto& e : table.entries) {
    if (e.decorated) continue;
    for (std::size_t k = 0; k < 4; ++k) {
      if (e.steps == shapes[k]) c.table[k] = std::exp(tilted_log_weight(e, t.h));
    }
  }
  KahanSum sum;
  for (std::size_t k = 0; k < 4; ++k) {
    sum.add(c.closed_form[k]);
    if (!std::isnan(c.table[k])) {
      c.max_rel_err = std::max(c.max_rel_err, std::abs(c.table[k] - c.closed_form[k]) / c.closed_form[k]);
    }
  }
  c.basic_sum = sum.value();
  c.deficiency = 1.0 - c.basic_sum;
  return c;
}

MassGap mass_gap_measure(const AnimalTable& table, const TiltVector& t) {
  auto mass = tilted_mass_by_length(table, t.h);
  KahanSum total;
  for (double v : mass) total.add(v);
  MassGap g;
  std::vector<double> suffix(mass.size() + 1, 0.0);
  for (std::size_t k = mass.size(); k-- > 0;) suffix[k] = suffix[k + 1] + mass[k];
  std::vector<double> ks, ys;
  for (std::size_t k = 1; k < mass.size(); ++k) {
    if (suffix[k] > 0) {
      double lt = std::log(suffix[k] / total.value());
      g.log_tail.emplace_back(static_cast<int>(k), lt);
      if (k >= 2) {
        ks.push_back(static_cast<double>(k));
        ys.push_back(lt);
      }
    }
  }
  if (ks.empty()) {
    g.degenerate = true;
    g.rate = kInf;
    g.nu_hat = kInf;
    g.slope = -kInf;
    return g;
  }
  if (ks.size() < 3) throw Error(ErrorCode::InsufficientRange, "mass gap fit needs at least three tail points");
  double n = static_cast<double>(ks.size());
  double km = 0, ym = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    km += ks[i] / n;
    ym += ys[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sxx += (ks[i] - km) * (ks[i] - km);
    sxy += (ks[i] - km) * (ys[i] - ym);
  }
  g.slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double r = ys[i] - (ym + g.slope * (ks[i] - km));
    rss += r * r;
  }
  g.residual = std::sqrt(rss / n);
  g.rate = -g.slope;
  g.nu_hat = g.rate / table.settings.beta;
  g.suggested_delta = g.nu_hat / 4;
  return g;
}

WulffCurvature wulff_curvature(const TiltVector& t, const AnimalTable& table) {
  Atoms atoms = aggregate(table);
  Moments m = moments(atoms, t.h);
  WulffCurvature w;
  w.grad_norm = std::hypot(m.mean[0], m.mean[1]);
  w.m_perp = {-m.mean[1] / w.grad_norm, m.mean[0] / w.grad_norm};
  const auto& v = w.m_perp;
  w.hess_perp = m.cov[0] * v[0] * v[0] + 2 * m.cov[1] * v[0] * v[1] + m.cov[2] * v[1] * v[1];
  w.curvature = w.hess_perp / w.grad_norm;
  double pa = std::exp(-t.a), pb = std::exp(-t.b);
  w.hess_lower_bound = pa * pb / (pa + pb) * (v[0] - v[1]) * (v[0] - v[1]);
  double reach = std::max(table.settings.len_cap, table.settings.extended_len_cap) + 1.0;
  w.bias_bound = t.tail * reach * reach;
  double det = m.cov[0] * m.cov[2] - m.cov[1] * m.cov[1];
  w.singular = !(det > 0) || !(w.hess_perp > 0);
  return w;
}

}  // namespace polylab
