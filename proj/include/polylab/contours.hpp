#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polylab/geometry.hpp"

namespace polylab {

enum class Step : std::uint8_t { E = 0, N = 1, W = 2, S = 3 };

constexpr LatticePoint step_vector(Step s) {
  switch (s) {
    case Step::E: return {1, 0};
    case Step::N: return {0, 1};
    case Step::W: return {-1, 0};
    case Step::S: return {0, -1};
  }
  return {0, 0};
}
constexpr Step opposite(Step s) { return static_cast<Step>((static_cast<int>(s) + 2) & 3); }
// Side of a bond leaving a vertex relative to the slope +1 line through it: E,S below (-1), N,W above (+1).
constexpr int bond_side(Step s) { return (s == Step::N || s == Step::W) ? 1 : -1; }
char step_char(Step s);
std::optional<Step> step_between(LatticePoint from, LatticePoint to);
std::vector<Step> parse_steps(const std::string& text);
std::string format_steps(std::span<const Step> steps);

// Unit bond stored by its lower-left endpoint: (v, v+E) when horizontal, (v, v+N) otherwise.
struct Bond {
  LatticePoint v;
  bool horizontal = true;

  static Bond between(LatticePoint from, Step s);
  Bond shifted(LatticePoint t) const { return {v + t, horizontal}; }
  friend auto operator<=>(const Bond&, const Bond&) = default;
};

struct BondHash {
  std::size_t operator()(const Bond& b) const noexcept {
    return LatticePointHash{}(b.v) * 2 + (b.horizontal ? 1 : 0);
  }
};

class OpenContour {
 public:
  OpenContour() = default;
  // Unchecked construction; use validate_contour for untrusted input.
  OpenContour(LatticePoint start, std::vector<Step> steps);

  const std::vector<LatticePoint>& vertices() const { return vertices_; }
  const std::vector<Step>& steps() const { return steps_; }
  std::size_t length() const { return steps_.size(); }
  LatticePoint start() const { return vertices_.front(); }
  LatticePoint end() const { return vertices_.back(); }
  LatticePoint displacement() const { return end() - start(); }
  std::vector<Bond> edges() const;

  OpenContour translated(LatticePoint t) const;
  OpenContour reversed() const;
  OpenContour concatenated(const OpenContour& tail) const;
  OpenContour slice(std::size_t from, std::size_t to) const;

  friend bool operator==(const OpenContour& l, const OpenContour& r) {
    return l.vertices_ == r.vertices_;
  }

 private:
  std::vector<LatticePoint> vertices_;
  std::vector<Step> steps_;
};

OpenContour validate_contour(const std::vector<LatticePoint>& vertices);
OpenContour validate_steps(LatticePoint start, std::span<const Step> steps);
bool is_valid_contour(LatticePoint start, std::span<const Step> steps);

enum class DeltaMode { AllVertices, CornersOnly };

std::vector<LatticePoint> delta_gamma(const OpenContour& g, DeltaMode mode = DeltaMode::AllVertices);
std::vector<std::pair<Bond, int>> nabla_gamma(const OpenContour& g);

struct ContourNeighborhoods {
  std::vector<LatticePoint> delta;
  std::vector<std::pair<Bond, int>> nabla;
  int total_multiplicity() const;
};
ContourNeighborhoods neighborhoods(const OpenContour& g, DeltaMode mode = DeltaMode::AllVertices);

// Flat storage of many step sequences sharing one start point.
class ContourSet {
 public:
  explicit ContourSet(LatticePoint start = {}) : start_(start) { offsets_.push_back(0); }

  void push(std::span<const Step> steps);
  void append(const ContourSet& other);
  std::size_t size() const { return offsets_.size() - 1; }
  std::span<const Step> steps(std::size_t i) const {
    return {data_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  OpenContour contour(std::size_t i) const;
  LatticePoint start() const { return start_; }
  friend bool operator==(const ContourSet& l, const ContourSet& r) {
    return l.start_ == r.start_ && l.data_ == r.data_ && l.offsets_ == r.offsets_;
  }

 private:
  LatticePoint start_;
  std::vector<Step> data_;
  std::vector<std::size_t> offsets_;
};

struct EnumerationOptions {
  std::optional<WallDirection> constraint;
  int threads = 1;
  // Prefix length used to split work; 0 picks a default from max_len.
  int prefix_depth = 0;
};

using ContourVisitor = std::function<void(std::span<const Step>)>;

// Receives the next vertex and the steps taken before it.
using VertexFilter = std::function<bool(LatticePoint, std::span<const Step>)>;
// Every nonempty SW-valid trail from a with at most max_len steps whose vertices all pass keep, in DFS order.
void enumerate_trails(LatticePoint a, int max_len, const VertexFilter& keep, const ContourVisitor& visit);

// Sequential enumeration in lexicographic E<N<W<S order; the visitor sees each contour once.
void enumerate_contours(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts,
                        const ContourVisitor& visit);

// Work split into ordered tasks; task i visits a contiguous block of the lexicographic stream.
struct EnumerationPlan {
  LatticePoint a;
  LatticePoint b;
  int max_len = 0;
  std::optional<WallDirection> constraint;
  std::vector<std::vector<Step>> prefixes;
  std::vector<bool> emit_only;

  std::size_t size() const { return prefixes.size(); }
  void run_task(std::size_t i, const ContourVisitor& visit) const;
};
EnumerationPlan plan_enumeration(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts);

// Runs fn(task_index) for every task on a pool of the given size.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

ContourSet collect_contours(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts);

// Naive reference: every step sequence within the length budget, validated independently.
ContourSet naive_contours(LatticePoint a, LatticePoint b, int max_len, const std::optional<WallDirection>& constraint);

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t corrupt = 0;
};

class ContourCache {
 public:
  static constexpr const char* kEnvVar = "POLYLAB_CACHE_DIR";
  static constexpr std::uint32_t kVersion = 1;

  explicit ContourCache(std::filesystem::path dir);
  // Directory from the environment override if set, else the fallback.
  static std::optional<std::filesystem::path> resolve_dir(const std::optional<std::filesystem::path>& fallback);

  ContourSet get_or_compute(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts);
  std::filesystem::path path_for(const std::string& key) const;
  static std::string make_key(LatticePoint a, LatticePoint b, int max_len, const std::optional<WallDirection>& c);
  const CacheStats& stats() const { return stats_; }

  static std::vector<std::uint8_t> encode(const std::string& key, const ContourSet& set);
  static std::optional<ContourSet> decode(const std::vector<std::uint8_t>& bytes, const std::string& key,
                                          LatticePoint start);

 private:
  std::filesystem::path dir_;
  CacheStats stats_;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ULL);

}  // namespace polylab
