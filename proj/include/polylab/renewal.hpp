#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "polylab/contours.hpp"
#include "polylab/potentials.hpp"

namespace polylab {

// Y = {arg ∈ [−κ, π/2 + κ]}, κ = arctan(1/2).
inline bool in_forward_cone(LatticePoint d) { return in_cone(d, {0, 0}); }

inline int path_excess(LatticePoint end, int length) {
  return length - static_cast<int>(std::max<Coord>(end.x, 0) + std::max<Coord>(end.y, 0));
}

// Interior vertex indices ℓ with the prefix in γ_ℓ − Y and the suffix in γ_ℓ + Y.
std::vector<std::size_t> break_points(const OpenContour& g);
bool is_irreducible(const OpenContour& g);
// γ ∈ P: every vertex lies in the diamond of the endpoints.
bool in_diamond_class(const OpenContour& g);

struct IrreducibleDecomposition {
  std::optional<OpenContour> left;
  std::vector<OpenContour> middle;
  std::optional<OpenContour> right;
  std::vector<std::size_t> break_indices;
  OpenContour concatenate() const;
};

// Splits at every break point; boundary pieces that lie in P become middle letters.
// A path without break points is stored as left only.
IrreducibleDecomposition decompose(const OpenContour& g);

struct AnimalTableSettings {
  double beta = 4.0;
  int len_cap = 7;
  // Irreducible paths with len_cap < |γ| ≤ extended_len_cap and excess |γ| − X₁⁺ − X₂⁺ ≤ max_excess
  // are added as well; their tilted weights are at most e^{−β·excess}.
  int extended_len_cap = 0;
  int max_excess = 3;
  int cluster_cap = 2;
  PotentialSpec phi = PotentialSpec::zero(2.0);
  double growth_constant = 5.0;
  DeltaMode delta_mode = DeltaMode::AllVertices;
  int threads = 1;
  std::size_t budget = 5'000'000;
};

// One path of P with either the empty decoration (bare) or the sum over all nonempty decorations
// that make the animal irreducible.
struct AnimalEntry {
  std::vector<Step> steps;
  LatticePoint displacement;
  int length = 0;
  bool decorated = false;
  double log_q = 0.0;
  int break_points = 0;
  int clusters = 0;
};

struct AnimalTable {
  AnimalTableSettings settings;
  std::vector<AnimalEntry> entries;
  std::size_t paths = 0;
  // Largest per-entry bound on the clusters beyond the cap, relative to q.
  double cluster_truncation = 0.0;
  OpenContour contour(std::size_t i) const { return OpenContour({0, 0}, entries[i].steps); }
};

AnimalTable enumerate_irreducible_animals(const AnimalTableSettings& s);

// Sum over collections of cluster groups (each group used at most once, f = weight of a nonempty
// choice within the group) whose bridged sets cover full_mask.
double covering_sum(const std::vector<std::pair<std::uint32_t, double>>& groups, std::uint32_t full_mask);

struct TiltOptions {
  double tolerance = 1e-14;
  int max_iterations = 100;
};

struct TiltVector {
  std::array<double, 2> h{0, 0};
  double a = 0.0;
  double b = 0.0;
  double delta_a = 0.0;  // 4a + (β − b)
  double delta_b = 0.0;  // 4b + (β − a)
  double beta = 0.0;
  double epsilon = 0.0;
  std::array<double, 2> direction{1, 0};
  std::array<double, 2> mean{0, 0};
  double normalization_residual = 0.0;
  double collinearity_residual = 0.0;
  double residual_norm = 0.0;
  double tail = 0.0;  // extrapolated tilted mass beyond the caps plus the cluster truncation
  double length_tail = 0.0;
  double excess_tail = 0.0;
  // Linearized shift of a and b that the tail could cause.
  double a_uncertainty = 0.0;
  double b_uncertainty = 0.0;
  int iterations = 0;
  bool converged = false;
  bool tail_dominates = false;
};

// Solves Σ e^{h·X} q = 1 and E[X] ∥ direction by damped Newton; returns the best iterate.
TiltVector tilt_solve(std::array<double, 2> direction, const AnimalTable& table, const TiltOptions& opts = {});
TiltVector tilt_solve_epsilon(double epsilon, const AnimalTable& table, const TiltOptions& opts = {});

double tilted_log_weight(const AnimalEntry& e, const std::array<double, 2>& h);
// Tilted mass by length, index = |Γ|.
std::vector<double> tilted_mass_by_length(const AnimalTable& table, const std::array<double, 2>& h);
// Tilted mass by excess |γ| − X₁⁺ − X₂⁺.
std::vector<double> tilted_mass_by_excess(const AnimalTable& table, const std::array<double, 2>& h);

struct BasicAnimalCheck {
  std::array<double, 4> table{};
  std::array<double, 4> closed_form{};
  double max_rel_err = 0.0;
  double basic_sum = 0.0;
  double deficiency = 0.0;  // 1 − basic_sum
};

BasicAnimalCheck basic_animal_check(const TiltVector& t, const AnimalTable& table);

struct MassGap {
  std::vector<std::pair<int, double>> log_tail;  // (k, log P(|Γ| >= k))
  double slope = 0.0;
  double rate = 0.0;  // ν̂_g β
  double nu_hat = 0.0;
  double residual = 0.0;
  double suggested_delta = 0.0;  // ν̂_g / 4
  bool degenerate = false;
};

MassGap mass_gap_measure(const AnimalTable& table, const TiltVector& t);

struct WulffCurvature {
  std::array<double, 2> m_perp{0, 0};
  double hess_perp = 0.0;
  double grad_norm = 0.0;
  double curvature = 0.0;
  double hess_lower_bound = 0.0;
  double bias_bound = 0.0;
  bool singular = false;
};

WulffCurvature wulff_curvature(const TiltVector& t, const AnimalTable& table);

}  // namespace polylab
