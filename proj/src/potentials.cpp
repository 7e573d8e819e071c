#include "polylab/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "polylab/error.hpp"
#include "polylab/logsum.hpp"
#include "polylab/rng.hpp"

namespace polylab {

const char* potential_kind_name(PotentialKind k) {
  switch (k) {
    case PotentialKind::Zero: return "ZERO";
    case PotentialKind::BoundaryPin: return "BOUNDARY_PIN";
    case PotentialKind::RandomSign: return "RANDOM_SIGN";
    case PotentialKind::User: return "USER";
  }
  return "?";
}

PotentialKind parse_potential_kind(const std::string& s) {
  if (s == "ZERO") return PotentialKind::Zero;
  if (s == "BOUNDARY_PIN") return PotentialKind::BoundaryPin;
  if (s == "RANDOM_SIGN") return PotentialKind::RandomSign;
  if (s == "USER") return PotentialKind::User;
  throw Error(ErrorCode::InvalidArgument, "unknown potential kind '" + s + "'");
}

PotentialSpec PotentialSpec::zero(double chi) {
  PotentialSpec p;
  p.kind = PotentialKind::Zero;
  p.chi = chi;
  return p;
}

PotentialSpec PotentialSpec::random_sign(double chi, std::uint64_t seed) {
  PotentialSpec p;
  p.kind = PotentialKind::RandomSign;
  p.chi = chi;
  p.seed = seed;
  return p;
}

PotentialSpec PotentialSpec::user_defined(double chi, UserPotential fn) {
  PotentialSpec p;
  p.kind = PotentialKind::User;
  p.chi = chi;
  p.user = std::move(fn);
  return p;
}

namespace {

double hashed_sign(std::uint64_t seed, bool position_keyed, std::span<const LatticePoint> cluster,
                   std::span<const LatticePoint> delta_part) {
  std::vector<LatticePoint> c(cluster.begin(), cluster.end());
  std::vector<LatticePoint> d(delta_part.begin(), delta_part.end());
  std::sort(c.begin(), c.end());
  std::sort(d.begin(), d.end());
  LatticePoint anchor = position_keyed ? LatticePoint{0, 0} : c.front();
  std::uint64_t h = mix64(seed ^ (position_keyed ? 0xA5A5A5A5A5A5A5A5ULL : 0x3C3C3C3C3C3C3C3CULL));
  for (auto s : c) {
    h = hash_combine64(h, static_cast<std::uint64_t>(s.x - anchor.x));
    h = hash_combine64(h, static_cast<std::uint64_t>(s.y - anchor.y));
  }
  h = hash_combine64(h, 0xFFFFFFFFULL);
  for (auto s : d) {
    h = hash_combine64(h, static_cast<std::uint64_t>(s.x - anchor.x));
    h = hash_combine64(h, static_cast<std::uint64_t>(s.y - anchor.y));
  }
  return (h >> 63) ? -1.0 : 1.0;
}

}  // namespace

double PotentialSpec::evaluate(std::span<const LatticePoint> cluster, std::span<const LatticePoint> delta_part,
                               int diam, double beta) const {
  if (delta_part.empty()) return 0.0;
  switch (kind) {
    case PotentialKind::Zero:
    case PotentialKind::BoundaryPin:
      return 0.0;
    case PotentialKind::RandomSign:
      return hashed_sign(seed, position_keyed, cluster, delta_part) * decay_bound(chi, beta, diam);
    case PotentialKind::User:
      return user ? user(cluster, delta_part, diam, beta) : 0.0;
  }
  return 0.0;
}

ModifiedPotentialSpec ModifiedPotentialSpec::identity(const PotentialSpec& base, const WallDirection& wall) {
  ModifiedPotentialSpec m;
  m.base = base;
  m.wall = wall;
  return m;
}

double ModifiedPotentialSpec::evaluate(std::span<const LatticePoint> cluster, std::span<const LatticePoint> delta_part,
                                       int diam, double beta, bool inside_half_plane) const {
  if (inside_half_plane || !boundary) return base.evaluate(cluster, delta_part, diam, beta);
  switch (boundary->kind) {
    case PotentialKind::BoundaryPin: {
      double v = base.evaluate(cluster, delta_part, diam, beta);
      if (cluster.size() == 1 && delta_part.size() == 1) v += boundary->strength * std::exp(-beta);
      return v;
    }
    case PotentialKind::Zero:
      return 0.0;
    case PotentialKind::RandomSign:
    case PotentialKind::User:
      return boundary->evaluate(cluster, delta_part, diam, beta);
  }
  return 0.0;
}

ModifiedPotentialSpec builtin_boundary_pin(double M, double beta, double chi, const WallDirection& wall,
                                           std::optional<PotentialSpec> base) {
  if (!(M >= 0)) throw Error(ErrorCode::InvalidArgument, "pinning strength must be nonnegative");
  if (!(beta > 0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
  // The pin decays like e^{-β} = e^{-2χβ} only when χ <= 1/2.
  if (M > 0 && chi > 0.5) {
    throw Error(ErrorCode::DecayViolation, "M e^{-beta} on singletons violates the decay bound for chi > 1/2");
  }
  ModifiedPotentialSpec m;
  m.base = base ? *base : PotentialSpec::zero(chi);
  m.wall = wall;
  PotentialSpec pin;
  pin.kind = PotentialKind::BoundaryPin;
  pin.chi = chi;
  pin.strength = M;
  m.boundary = pin;
  return m;
}

CBeta c_beta(double beta, double chi, int diam_cap, double growth_constant) {
  double r = growth_constant * std::exp(-chi * beta);
  if (!(r < 1.0)) throw Error(ErrorCode::DivergentTail, "growth_constant * e^{-chi beta} >= 1");
  CBeta out;
  KahanSum sum;
  auto clusters = clusters_touching_bond(Bond{{0, 0}, true}, diam_cap);
  for (const auto& c : clusters) sum.add(decay_bound(chi, beta, static_cast<int>(*diam_inf(c))));
  out.value = sum.value();
  out.clusters = clusters.size();
  out.tail_bound = 6.0 * std::exp(-chi * beta) * std::pow(r, diam_cap + 1) / (1.0 - r);
  return out;
}

double positivize(double phi_value, int nabla_count, double chi, double beta, int diam) {
  return phi_value + nabla_count * decay_bound(chi, beta, diam);
}

double positivize(const PotentialSpec& phi, const OpenContour& g, std::span<const LatticePoint> cluster, double beta) {
  std::vector<LatticePoint> sites(cluster.begin(), cluster.end());
  auto d = diam_inf(sites);
  if (!d) throw Error(ErrorCode::InvalidArgument, "positivize: cluster is not connected");
  auto delta = delta_gamma(g);
  std::vector<LatticePoint> part;
  for (auto s : sites) {
    if (std::binary_search(delta.begin(), delta.end(), s)) part.push_back(s);
  }
  int count = 0;
  for (auto& [b, m] : nabla_gamma(g)) {
    bool touched = std::any_of(sites.begin(), sites.end(), [&](LatticePoint s) { return cell_touches_bond(s, b); });
    if (touched) count += m;
  }
  int diam = static_cast<int>(*d);
  return positivize(phi.evaluate(sites, part, diam, beta), count, phi.chi, beta, diam);
}

double psi_weight(double phi_prime, bool meets_nabla) { return meets_nabla ? std::expm1(phi_prime) : 0.0; }

namespace {

OpenContour random_contour(CounterRng& rng, int max_len) {
  for (;;) {
    int len = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_len));
    std::vector<Step> steps;
    for (int i = 0; i < len; ++i) {
      Step s = static_cast<Step>(rng.next() & 3);
      if (!steps.empty() && s == opposite(steps.back())) s = steps.back();
      steps.push_back(s);
    }
    if (is_valid_contour({0, 0}, steps)) return OpenContour({0, 0}, steps);
  }
}

}  // namespace

AuditReport audit_potential(const PotentialSpec& phi, double beta, int cap, std::size_t samples, std::uint64_t seed,
                            const std::optional<ModifiedPotentialSpec>& modified) {
  AuditReport rep;
  CounterRng rng(seed, 0xA0D17);
  const auto& shapes = cluster_shapes(cap);
  for (std::size_t i = 0; i < samples; ++i) {
    OpenContour g = random_contour(rng, 8);
    ContourContext ctx(g, cap, DeltaMode::AllVertices, modified ? std::optional(modified->wall) : std::nullopt);
    const auto& shape = shapes[rng.next() % shapes.size()];
    LatticePoint v = g.vertices()[rng.next() % g.vertices().size()];
    LatticePoint t{v.x - 2 + static_cast<Coord>(rng.next() % 4), v.y - 2 + static_cast<Coord>(rng.next() % 4)};
    std::vector<LatticePoint> sites, part;
    for (auto c : shape.cells) {
      sites.push_back(c + t);
      if (ctx.in_delta(c + t)) part.push_back(c + t);
    }
    int count = ctx.nabla_count(sites);
    ++rep.samples;
    if (!part.empty() && count == 0) ++rep.locality_violations;
    double bound = decay_bound(phi.chi, beta, shape.diam);
    double value = phi.evaluate(sites, part, shape.diam, beta);
    if (modified) {
      bool inside = cluster_in_half_plane(sites, modified->wall);
      value = modified->evaluate(sites, part, shape.diam, beta, inside);
    }
    double ratio = std::abs(value) / bound;
    rep.worst_decay_ratio = std::max(rep.worst_decay_ratio, ratio);
    if (ratio > 1.0 + 1e-12) ++rep.decay_violations;
    if (count > 0) {
      double pp = positivize(value, count, phi.chi, beta, shape.diam);
      if (pp < 0) ++rep.positivity_violations;
      double worsened = phi.chi * beta - std::log(1.0 + 3.0 * 3.0);
      if (std::abs(pp) > std::exp(-worsened * (shape.diam + 1)) * (1.0 + 1e-12)) ++rep.decay_violations;
    }
  }
  return rep;
}

RewriteCheck weight_rewrite_check(const OpenContour& g, const PotentialSpec& phi, double beta, int cap,
                                  double growth_constant) {
  CBeta c = c_beta(beta, phi.chi, cap, growth_constant);
  ContourContext ctx(g, cap);
  KahanSum sum_phi, sum_prime, correction;
  ctx.for_each_cluster([&](const ClusterHit& h) {
    double v = phi.evaluate(h.sites, h.delta_part, h.shape->diam, beta);
    double e = decay_bound(phi.chi, beta, h.shape->diam);
    sum_phi.add(v);
    sum_prime.add(v + h.nabla_count * e);
    correction.add(h.nabla_count * e);
  });
  double len = static_cast<double>(g.length());
  RewriteCheck out;
  out.lhs = -beta * len + sum_phi.value();
  out.rhs = -(beta + 3.0 * c.value) * len + sum_prime.value();
  out.tolerance = 2.0 * len * c.tail_bound;
  out.difference = 3.0 * c.value * len - correction.value();
  return out;
}

}  // namespace polylab
