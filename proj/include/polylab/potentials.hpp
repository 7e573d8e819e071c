#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "polylab/clusters.hpp"
#include "polylab/contours.hpp"
#include "polylab/geometry.hpp"

namespace polylab {

enum class PotentialKind { Zero, BoundaryPin, RandomSign, User };

const char* potential_kind_name(PotentialKind k);
PotentialKind parse_potential_kind(const std::string& s);

// Receives only C and C ∩ Δγ, so locality holds by construction.
using UserPotential =
    std::function<double(std::span<const LatticePoint> cluster, std::span<const LatticePoint> delta_part, int diam, double beta)>;

inline double decay_bound(double chi, double beta, int diam) { return std::exp(-chi * beta * (diam + 1)); }

struct PotentialSpec {
  PotentialKind kind = PotentialKind::Zero;
  double chi = 2.0;
  double strength = 0.0;  // M for BOUNDARY_PIN
  std::uint64_t seed = 0;
  // Hash absolute positions instead of the anchored shape (allowed only off the half-plane).
  bool position_keyed = false;
  UserPotential user;

  static PotentialSpec zero(double chi);
  static PotentialSpec random_sign(double chi, std::uint64_t seed);
  static PotentialSpec user_defined(double chi, UserPotential fn);

  double evaluate(std::span<const LatticePoint> cluster, std::span<const LatticePoint> delta_part, int diam,
                  double beta) const;
};

// Φ̃: base inside H_{+,n}; the boundary rule for clusters not contained in H_{+,n}.
struct ModifiedPotentialSpec {
  PotentialSpec base;
  std::optional<PotentialSpec> boundary;
  WallDirection wall = WallDirection::horizontal();

  static ModifiedPotentialSpec identity(const PotentialSpec& base, const WallDirection& wall);

  double evaluate(std::span<const LatticePoint> cluster, std::span<const LatticePoint> delta_part, int diam,
                  double beta, bool inside_half_plane) const;
  bool is_identity() const { return !boundary.has_value(); }
};

// Φ̃ = Φ + M e^{-β} on singletons {x} ⊄ H_{+,n} with x ∈ Δγ.
ModifiedPotentialSpec builtin_boundary_pin(double M, double beta, double chi,
                                           const WallDirection& wall = WallDirection::horizontal(),
                                           std::optional<PotentialSpec> base = std::nullopt);

struct CBeta {
  double value = 0.0;
  double tail_bound = 0.0;
  std::size_t clusters = 0;
};

CBeta c_beta(double beta, double chi, int diam_cap, double growth_constant);

double positivize(double phi_value, int nabla_count, double chi, double beta, int diam);
double positivize(const PotentialSpec& phi, const OpenContour& g, std::span<const LatticePoint> cluster, double beta);
double psi_weight(double phi_prime, bool meets_nabla);

struct AuditReport {
  std::size_t samples = 0;
  std::size_t decay_violations = 0;
  std::size_t positivity_violations = 0;
  std::size_t locality_violations = 0;
  double worst_decay_ratio = 0.0;
  bool ok() const { return decay_violations == 0 && positivity_violations == 0 && locality_violations == 0; }
};

// Random (C, γ) pairs: |Φ| within the decay bound, Φ' >= 0 on clusters meeting ∇γ, C∩Δγ≠∅ ⇒ C∩∇γ≠∅.
AuditReport audit_potential(const PotentialSpec& phi, double beta, int cap, std::size_t samples, std::uint64_t seed,
                            const std::optional<ModifiedPotentialSpec>& modified = std::nullopt);

struct RewriteCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  // lhs - rhs evaluated without cancelling the common −β|γ| term.
  double difference = 0.0;
  bool ok() const { return std::abs(difference) <= tolerance; }
};

// −β|γ| + Σ Φ(C, Δγ∩C) against −(β+3c)|γ| + Σ Φ'(C, γ), both over clusters meeting ∇γ up to the cap.
RewriteCheck weight_rewrite_check(const OpenContour& g, const PotentialSpec& phi, double beta, int cap,
                                  double growth_constant);

}  // namespace polylab
