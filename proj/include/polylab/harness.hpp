#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polylab/contours.hpp"
#include "polylab/effective_walk.hpp"
#include "polylab/ensembles.hpp"
#include "polylab/geometry.hpp"
#include "polylab/potentials.hpp"

namespace polylab {

constexpr const char* kCodeVersion = "polylab 1.0.0";

// Ops accepted in the "op" field.
const std::vector<std::string>& known_ops();

struct PotentialConfig {
  std::string kind = "ZERO";  // ZERO, RANDOM_SIGN
  std::uint64_t seed = 0;
};

struct BoundaryConfig {
  std::string kind = "IDENTITY";  // IDENTITY, RANDOM_SIGN, BOUNDARY_PIN
  std::uint64_t seed = 0;
  double strength = 0.0;  // M, in units of e^{-β} per pinned site
};

struct AnimalConfig {
  int len_cap = 7;
  int extended_len_cap = 0;
  int max_excess = 3;
  std::size_t budget = 5'000'000;
};

struct WalkConfig {
  StepLawMode law = StepLawMode::Table;
  bool include_gamma4 = true;
  int len_cap = 10;
  std::size_t samples = 100000;
  std::vector<Coord> z{1, 3, 10};
  std::vector<int> m{10, 100, 1000};
  Coord window = 20;
  Coord probe_depth = 2;
  Coord reach = 30;
  double band = 5.0;
  double c0 = 4.0;
};

// All lengths are in lattice spacings; β, χ, δ and ε are dimensionless.
struct ExperimentConfig {
  std::string experiment = "experiment";
  std::string op;
  AnalysisConstants constants;
  PotentialConfig potential;
  BoundaryConfig boundary;
  WallDirection wall = WallDirection::horizontal();
  std::vector<double> beta{4.0};
  std::vector<int> L;
  std::vector<double> epsilon{0.0};
  std::vector<double> M;
  std::vector<int> N;
  std::vector<LatticePoint> points;
  std::vector<std::array<double, 2>> directions;
  WeightMode weight_mode = WeightMode::Positivized;
  bool weight_mode_set = false;
  double growth_constant = 5.0;
  int max_len = 0;  // 0 means |x|_1 + 2 excess_levels
  int excess_levels = 2;
  std::size_t budget = 50'000'000;
  AnimalConfig animals;
  WalkConfig walk;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> cache;
};

// default_op fills a missing "op" and must match it when both are given.
ExperimentConfig parse_config_text(const std::string& text, const std::string& default_op = "");
ExperimentConfig load_config(const std::filesystem::path& file, const std::string& default_op = "");
// Canonical JSON of every field that can change a payload; threads, out and cache are excluded.
std::string canonical_config(const ExperimentConfig& c);
std::uint64_t config_hash(const ExperimentConfig& c);

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  void add(std::vector<Cell> row);
};

// Shortest round-trip decimal; nan, inf and -inf spelled out.
std::string format_number(double v);
std::string format_csv(const Table& t);

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunResult {
  std::vector<Table> tables;
  std::vector<Assertion> assertions;
  std::vector<std::string> provenance;
  bool partial = false;  // some grid points hit the enumeration budget
  CacheStats cache;
};

// Pure computation: no files are written.
RunResult execute(const ExperimentConfig& c);

struct Payload {
  std::string file;
  std::size_t rows = 0;
  std::string fnv1a64;
};

struct RunManifest {
  std::string experiment;
  std::string op;
  std::string config_hash;
  std::string code_version;
  std::string started;
  std::string finished;
  std::vector<Payload> payloads;
  std::vector<Assertion> assertions;
  std::vector<std::string> provenance;
  bool partial = false;
  CacheStats cache;
  std::filesystem::path directory;

  bool all_passed() const;
  int exit_code() const { return all_passed() ? 0 : 1; }
};

// Executes, then writes <out>/<experiment>/<table>.csv and manifest.json.
RunManifest run(const ExperimentConfig& c);
std::string manifest_json(const RunManifest& m);

}  // namespace polylab
