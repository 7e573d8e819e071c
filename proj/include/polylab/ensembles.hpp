#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polylab/contours.hpp"
#include "polylab/geometry.hpp"
#include "polylab/potentials.hpp"

namespace polylab {

// Raw: e^{-β|γ|}. Direct: e^{-β|γ| + Σ Φ(C, Δγ∩C)}. Positivized: e^{-β|γ| + Σ Φ'(C, γ)}.
enum class WeightMode { Raw, Direct, Positivized };

const char* weight_mode_name(WeightMode m);
WeightMode parse_weight_mode(const std::string& s);

struct WeightSettings {
  double beta = 4.0;
  int cluster_cap = 2;
  double growth_constant = 5.0;
  WeightMode mode = WeightMode::Positivized;
  DeltaMode delta_mode = DeltaMode::AllVertices;
};

struct ContourWeight {
  double log_q = 0.0;
  double truncation_err = 0.0;
};

// Per-contour bound on the clusters beyond the cap; +inf when the tail model diverges.
double cluster_truncation_bound(const PotentialSpec& phi, const std::optional<PotentialSpec>& boundary,
                                const WeightSettings& s, std::size_t length);

ContourWeight q_weight(const OpenContour& g, const PotentialSpec& phi, const WeightSettings& s);
ContourWeight q_weight_modified(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s);

struct WeightPair {
  ContourWeight plain;
  ContourWeight modified;
};
// One cluster scan yields both q(γ) and q^{+,n}(γ).
WeightPair q_weight_pair(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s);

enum class Variant { Free, RestrictedHalfPlane, Pinned };
const char* variant_name(Variant v);

struct TwoPointSettings {
  WeightSettings weights;
  int max_len = 0;  // 0 means norm1(x) + 2 * excess_levels
  int excess_levels = 2;
  int threads = 1;
  ContourCache* cache = nullptr;
  std::size_t budget = 50'000'000;
};

struct TwoPointResult {
  LatticePoint endpoint;
  double value_log = 0.0;
  double err_lo = 0.0;
  double err_hi = 0.0;
  Variant variant = Variant::Free;
  int cutoff_used = 0;
  double cutoff_tail_log = 0.0;
  double cluster_err = 0.0;
  std::size_t contours = 0;
  std::vector<double> shell_log;  // log-sum per length, index = length
};

int default_max_len(LatticePoint x, const TwoPointSettings& s);

TwoPointResult two_point(LatticePoint x, Variant variant, const ModifiedPotentialSpec& phi, const TwoPointSettings& s);

struct TwoPointPair {
  TwoPointResult restricted;
  TwoPointResult pinned;
};
// G(x | P_{+,n}) and G^{+,n}(x) over one enumeration of P_{+,n}.
TwoPointPair two_point_pair(LatticePoint x, const ModifiedPotentialSpec& phi, const TwoPointSettings& s);

struct SandwichReport {
  std::size_t contours = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;
  double tightest_slack = 0.0;
  std::optional<std::string> offending;
  bool ok() const { return violations == 0; }
};

// q(γ) e^{-Σ_u e^{-χβ(d_n(u)+1)}} <= q^{+,n}(γ) <= q(γ) e^{+Σ_u e^{-χβ(d_n(u)+1)}}, within truncation bands.
SandwichReport sandwich_check(const OpenContour& g, const ModifiedPotentialSpec& phi, const WeightSettings& s);
SandwichReport sandwich_check_all(LatticePoint x, int max_len, const ModifiedPotentialSpec& phi, const WeightSettings& s,
                                  int threads = 1);

LatticePoint wall_point(const WallDirection& n, int L);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sigma = 0.0;
  double sigma_band = 0.0;
  double sigma_residual = 0.0;
  bool inconclusive = false;
};

// Weighted least squares; band half-widths act as per-point sigmas.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& half_width);

struct RatioRow {
  int L = 0;
  double beta = 0.0;
  LatticePoint x;
  double ratio_log = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  TwoPointResult restricted;
  TwoPointResult pinned;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  std::vector<std::pair<double, SlopeFit>> fits;  // per beta
};

RatioTable nopinning_ratio_experiment(const std::vector<int>& L_values, const std::vector<double>& beta_values,
                                      const ModifiedPotentialSpec& phi, const TwoPointSettings& s);

struct SurfaceTensionRow {
  int N = 0;
  LatticePoint x;
  double tau_free = 0.0;
  double tau_free_lo = 0.0;
  double tau_free_hi = 0.0;
  double tau_pinned = 0.0;
  double tau_pinned_lo = 0.0;
  double tau_pinned_hi = 0.0;
};

// τ̂(N) = −log G(x_N) / (β |x_N|_2) for x_N = N·direction, free and pinned side by side.
std::vector<SurfaceTensionRow> surface_tension_estimate(LatticePoint direction, const std::vector<int>& N_values,
                                                        const ModifiedPotentialSpec& phi, const TwoPointSettings& s);

}  // namespace polylab
