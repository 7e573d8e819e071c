#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polylab/geometry.hpp"
#include "polylab/renewal.hpp"

namespace polylab {

enum class StepLawMode { Basic, Table };

const char* step_law_mode_name(StepLawMode m);
StepLawMode parse_step_law_mode(const std::string& s);

struct StepAtom {
  LatticePoint x;
  double p = 0.0;
  int length = 0;  // |γ| of the carried animal
};

struct StepLaw {
  StepLawMode mode = StepLawMode::Basic;
  std::vector<StepAtom> atoms;  // sorted by (x, length)
  double beta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double total = 0.0;
  double deficiency = 0.0;  // 1 − total
  double tail = 0.0;        // mass the source table is missing (TABLE)
  // Σ_{y ∉ {e₁, e₂, 4e₁ − e₂}} |y|² P(X = y)
  double nonbasic_second_moment = 0.0;

  double delta_a() const { return 4 * a + (beta - b); }
  double delta_b() const { return 4 * b + (beta - a); }
  // P(X = y) summed over lengths.
  double prob(LatticePoint y) const;
  // Displacement marginal, sorted by x.
  std::vector<std::pair<LatticePoint, double>> marginal() const;
};

// BASIC: e^{−a}, e^{−b}, e^{−β−Δ} on e₁, e₂, 4e₁ − e₂, plus e^{−β−Δᵇ} on −e₁ + 4e₂ when include_gamma4.
StepLaw build_basic_law(const TiltVector& t, bool include_gamma4 = true);
// TABLE: tilted animal table aggregated by (X, |γ|).
StepLaw build_table_law(const TiltVector& t, const AnimalTable& table);

enum class WallConstraint { None, NonStrict, Strict };

struct GreenResult {
  double p_plus = 0.0;      // S₁..S_{ℓ−1} ≥ 0
  double p_hat_plus = 0.0;  // S₁..S_{ℓ−1} > 0
  int steps_bound = 0;      // longest walk that can reach v
};

// Σ_ℓ P(R₀ = u, R_ℓ = v, intermediate constraint) by exact dynamic programming on D(u, v).
// Every step has x + y ≥ 1, so ℓ ≤ (v − u)·(1, 1) and the sum is finite; max_steps below that truncates.
GreenResult constrained_green(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law,
                              int max_steps = -1);
double walk_green(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law, WallConstraint c,
                  int max_steps = -1);
// Unconstrained P(0, x) for every x on the list, from one DP over the union of diamonds.
std::vector<double> free_green(const std::vector<LatticePoint>& xs, const StepLaw& law);

struct LadderEpoch {
  int epoch = 0;
  Coord height = 0;
};

// Epoch lists hold τ₁, τ₂, … only; the counts also include τ₀ = 0 with H₀ = S₀ and take epochs τ < m.
struct LadderRecord {
  Coord start = 0;
  std::vector<LadderEpoch> nonstrict_ascending;
  std::vector<LadderEpoch> strict_descending;
  std::vector<LadderEpoch> nonstrict_descending;
  // Ladder heights in [0, z] among epochs τ < m.
  int count_plus(int m, Coord z) const;
  int count_minus(int m, Coord z) const;
  int count_minus_nonstrict(int m, Coord z) const;
  // Strict descending heights in (0, z].
  int count_minus_positive(int m, Coord z) const;
};

// S_ℓ = R_ℓ·n along the walk through the given positions; epochs restart the reference level.
LadderRecord ladder_stats(const std::vector<LatticePoint>& positions, const WallDirection& n);
LadderRecord ladder_stats(const std::vector<Coord>& heights);

struct AliliDoneyResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_err = 0.0;
  double rearranged = 0.0;  // Σ_m P(A_m; L) from the path-reversal side
  double rearranged_rel_err = 0.0;
  double missing_mass = 0.0;  // P_+ mass of walks longer than len_cap
  bool applicable = true;
};

struct AliliDoneyCheck {
  // P_+(0, v) against Σ_m (1/m) E[A_m(0, v); N⁺_m(v·n)].
  AliliDoneyResult ascending;
  // P̂_+(v, 0) against strict descending heights in (0, v·n]; needs v·n ≥ 1.
  AliliDoneyResult descending;
  // P_+(v, 0) against non-strict descending heights in [0, v·n].
  AliliDoneyResult descending_nonstrict;
};

// Exhaustive over step sequences of length ≤ len_cap; cap-too-small when the mass beyond the cap
// exceeds identity_tol.
AliliDoneyCheck alili_doney_check(LatticePoint v, const WallDirection& n, const StepLaw& law, int len_cap,
                                  double identity_tol = 1e-12);

enum class DecompositionRegime { Opt1, Opt2 };
const char* regime_name(DecompositionRegime r);

struct DecompositionParams {
  DecompositionRegime regime = DecompositionRegime::Opt1;
  double epsilon = 0.0;
  double q = 0.0;
  double p = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double eta = 0.0;           // Option 2 constant, largest feasible value
  double basic_gamma3 = 0.0;  // e^{−β−Δ}
  double one_minus_q = 0.0;
  double q_ratio = 0.0;  // (1 − q) / e^{−β−Δ}
  std::vector<std::pair<LatticePoint, double>> u_law;
  std::vector<std::pair<LatticePoint, double>> v_law;
  double max_mixture_err = 0.0;
  double v_vertical_min = 0.0;  // min{P(V = e₂), P(V = 4e₁ − e₂)}
  double v_mean_x = 0.0;
  bool near_boundary = false;
};

DecompositionParams decompose_walk(const StepLaw& law, double epsilon, double c0 = 4.0);

struct LocalLimitRow {
  LatticePoint x;
  double p = 0.0;
  double reference = 0.0;  // 1 / (√(e^{−b}|x|₁) ∨ 1)
  double ratio = 0.0;
};

std::vector<LocalLimitRow> local_limit_probe(const std::vector<LatticePoint>& xs, const StepLaw& law);

struct LadderBoundSettings {
  std::vector<Coord> z{1, 3, 10};
  std::vector<int> m{10, 100, 1000};
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  Coord eta = 1;
  // Heights in [0, z] need at most ⌊z/η⌋ + 1 ≤ 2⌈z/η⌉ geometric blocks of mean 1/p; Minkowski gives √2 more for k = 2.
  double c1 = 2.0;
  double c2 = 2.8284271247461903;
  // DP horizon and depth for the lower bound on p.
  int p_horizon = 20000;
  int p_depth = 400;
  int threads = 1;
};

struct LadderBoundRow {
  bool descending = false;
  Coord z = 0;
  int m = 0;
  int k = 1;
  double mean = 0.0;
  double ci_upper = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound / ci_upper
  bool holds = false;
  // Shape check against (d_n e^{b}) ∧ m for N⁺ and d_n ∧ m for N⁻, with d_n = z + 1 at S₀.
  double shape_ratio = 0.0;
};

struct LadderBoundReport {
  double p_plus = 0.0;   // lower bound on P(H₁ − S₀ ≥ η; τ₁ < ∞)
  double p_minus = 0.0;  // lower bound on P(S₀ − Ĥ₁ ≥ η; τ̂₁ < ∞)
  std::vector<LadderBoundRow> rows;
  bool all_hold = true;
};

// N⁺ from S₀ = 0 and N⁻ from S₀ = z, along the wall normal n; the law is renormalized for sampling.
LadderBoundReport ladder_bound_check(const StepLaw& law, const WallDirection& n, const LadderBoundSettings& s);

struct RhoProbeSettings {
  double delta = 0.05;
  double chi = 2.0;
  Coord window = 20;
  Coord probe_depth = 2;  // endpoints with d_n ≤ probe_depth
};

struct RhoProbeResult {
  double rho = 1.0;  // max{1, sup ρ_δ(u, v)}
  double rho_max_raw = 0.0;
  double a_delta = 0.0;
  double b_delta = 0.0;
  double recursion_bound = 0.0;  // (1 + a) / (1 − b), +inf when b ≥ 1
  LatticePoint worst_u, worst_v;
  std::size_t pairs = 0;
  bool consistent = false;  // b < 1 and ρ ≤ (1 + a)/(1 − b)
};

// φ_β(γ) = |γ| e^{−χβ(2 + d(w, z))}; the law must carry animal lengths (TABLE) or uses the basic ones.
double letter_distance(LatticePoint w, LatticePoint z, const WallDirection& n);
double rho_delta(LatticePoint u, LatticePoint v, const WallDirection& n, const StepLaw& law, double delta, double chi,
                 bool with_phi = true);
RhoProbeResult rho_recursion_probe(const WallDirection& n, const StepLaw& law, const RhoProbeSettings& s);

}  // namespace polylab
