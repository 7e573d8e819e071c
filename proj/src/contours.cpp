#include "polylab/contours.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "polylab/error.hpp"

namespace polylab {

char step_char(Step s) {
  static const char kChars[4] = {'E', 'N', 'W', 'S'};
  return kChars[static_cast<int>(s)];
}

std::optional<Step> step_between(LatticePoint from, LatticePoint to) {
  LatticePoint d = to - from;
  for (int k = 0; k < 4; ++k) {
    if (step_vector(static_cast<Step>(k)) == d) return static_cast<Step>(k);
  }
  return std::nullopt;
}

std::vector<Step> parse_steps(const std::string& text) {
  std::vector<Step> out;
  for (char c : text) {
    switch (c) {
      case 'E': case 'e': out.push_back(Step::E); break;
      case 'N': case 'n': out.push_back(Step::N); break;
      case 'W': case 'w': out.push_back(Step::W); break;
      case 'S': case 's': out.push_back(Step::S); break;
      case ' ': case ',': break;
      default: throw Error(ErrorCode::InvalidArgument, std::string("bad step character '") + c + "'");
    }
  }
  return out;
}

std::string format_steps(std::span<const Step> steps) {
  std::string s;
  s.reserve(steps.size());
  for (Step st : steps) s.push_back(step_char(st));
  return s;
}

Bond Bond::between(LatticePoint from, Step s) {
  switch (s) {
    case Step::E: return {from, true};
    case Step::W: return {from + LatticePoint{-1, 0}, true};
    case Step::N: return {from, false};
    case Step::S: return {from + LatticePoint{0, -1}, false};
  }
  return {from, true};
}

OpenContour::OpenContour(LatticePoint start, std::vector<Step> steps) : steps_(std::move(steps)) {
  vertices_.reserve(steps_.size() + 1);
  vertices_.push_back(start);
  for (Step s : steps_) vertices_.push_back(vertices_.back() + step_vector(s));
}

std::vector<Bond> OpenContour::edges() const {
  std::vector<Bond> out;
  out.reserve(steps_.size());
  for (std::size_t i = 0; i < steps_.size(); ++i) out.push_back(Bond::between(vertices_[i], steps_[i]));
  return out;
}

OpenContour OpenContour::translated(LatticePoint t) const { return OpenContour(start() + t, steps_); }

OpenContour OpenContour::reversed() const {
  std::vector<Step> rev;
  rev.reserve(steps_.size());
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) rev.push_back(opposite(*it));
  return OpenContour(end(), std::move(rev));
}

OpenContour OpenContour::concatenated(const OpenContour& tail) const {
  if (tail.start() != end()) throw Error(ErrorCode::BrokenChain, "concatenation endpoints differ");
  std::vector<Step> all = steps_;
  all.insert(all.end(), tail.steps_.begin(), tail.steps_.end());
  return OpenContour(start(), std::move(all));
}

OpenContour OpenContour::slice(std::size_t from, std::size_t to) const {
  if (from > to || to > steps_.size()) throw Error(ErrorCode::InvalidArgument, "slice out of range");
  return OpenContour(vertices_[from], std::vector<Step>(steps_.begin() + from, steps_.begin() + to));
}

namespace {

void check_sw_rule(const OpenContour& g) {
  const auto& vs = g.vertices();
  const auto& st = g.steps();
  std::unordered_map<LatticePoint, int, LatticePointHash> degree;
  for (std::size_t i = 0; i < st.size(); ++i) {
    ++degree[vs[i]];
    ++degree[vs[i + 1]];
  }
  for (std::size_t i = 1; i < st.size(); ++i) {
    if (degree[vs[i]] != 4) continue;
    if (bond_side(opposite(st[i - 1])) != bond_side(st[i])) {
      throw ContourError(ErrorCode::SwRuleViolation,
                         "south-west splitting rule violated at vertex index " + std::to_string(i), i);
    }
  }
}

}  // namespace

OpenContour validate_steps(LatticePoint start, std::span<const Step> steps) {
  if (steps.empty()) throw ContourError(ErrorCode::BrokenChain, "contour needs at least one edge", 0);
  OpenContour g(start, std::vector<Step>(steps.begin(), steps.end()));
  if (g.start() == g.end()) throw ContourError(ErrorCode::InvalidArgument, "open contour must join distinct points", 0);
  std::unordered_set<Bond, BondHash> seen;
  auto edges = g.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!seen.insert(edges[i]).second) {
      throw ContourError(ErrorCode::DuplicateEdge, "edge " + std::to_string(i) + " repeats an earlier edge", i);
    }
  }
  check_sw_rule(g);
  return g;
}

OpenContour validate_contour(const std::vector<LatticePoint>& vertices) {
  if (vertices.size() < 2) throw ContourError(ErrorCode::BrokenChain, "contour needs at least two vertices", 0);
  std::vector<Step> steps;
  steps.reserve(vertices.size() - 1);
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    auto s = step_between(vertices[i], vertices[i + 1]);
    if (!s) {
      throw ContourError(ErrorCode::BrokenChain,
                         "vertices " + std::to_string(i) + " and " + std::to_string(i + 1) + " are not adjacent", i);
    }
    steps.push_back(*s);
  }
  return validate_steps(vertices.front(), steps);
}

bool is_valid_contour(LatticePoint start, std::span<const Step> steps) {
  try {
    validate_steps(start, steps);
    return true;
  } catch (const ContourError&) {
    return false;
  }
}

std::vector<LatticePoint> delta_gamma(const OpenContour& g, DeltaMode mode) {
  std::vector<LatticePoint> out;
  const auto& vs = g.vertices();
  const auto& st = g.steps();
  for (const Bond& b : g.edges()) {
    if (b.horizontal) {
      out.push_back({b.v.x + 1, b.v.y});
      out.push_back({b.v.x + 1, b.v.y + 1});
    } else {
      out.push_back({b.v.x, b.v.y + 1});
      out.push_back({b.v.x + 1, b.v.y + 1});
    }
  }
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (mode == DeltaMode::CornersOnly) {
      bool corner = i > 0 && i + 1 < vs.size() && st[i - 1] != st[i];
      if (!corner) continue;
    }
    out.push_back(vs[i]);
    out.push_back(vs[i] + LatticePoint{1, 1});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::pair<Bond, int>> nabla_gamma(const OpenContour& g) {
  std::map<Bond, int> mult;
  for (const Bond& b : g.edges()) {
    LatticePoint e = b.horizontal ? LatticePoint{1, 0} : LatticePoint{0, 1};
    ++mult[b];
    ++mult[b.shifted(e)];
    ++mult[b.shifted(LatticePoint{-e.x, -e.y})];
  }
  return {mult.begin(), mult.end()};
}

int ContourNeighborhoods::total_multiplicity() const {
  int t = 0;
  for (const auto& [b, m] : nabla) t += m;
  return t;
}

ContourNeighborhoods neighborhoods(const OpenContour& g, DeltaMode mode) {
  return {delta_gamma(g, mode), nabla_gamma(g)};
}

void ContourSet::push(std::span<const Step> steps) {
  data_.insert(data_.end(), steps.begin(), steps.end());
  offsets_.push_back(data_.size());
}

void ContourSet::append(const ContourSet& other) {
  for (std::size_t i = 0; i < other.size(); ++i) push(other.steps(i));
}

OpenContour ContourSet::contour(std::size_t i) const {
  auto s = steps(i);
  return OpenContour(start_, std::vector<Step>(s.begin(), s.end()));
}

namespace {

constexpr Step kSteps[4] = {Step::E, Step::N, Step::W, Step::S};

class Walker {
 public:
  Walker(LatticePoint a, LatticePoint b, int max_len, const std::optional<WallDirection>& c,
         const VertexFilter* keep = nullptr)
      : a_(a), b_(b), max_len_(max_len), c_(c), keep_(keep), pos_(a) {
    side_ = 2 * max_len + 3;
    origin_ = a - LatticePoint{max_len + 1, max_len + 1};
    std::size_t cells = static_cast<std::size_t>(side_) * side_;
    mask_.assign(cells, 0);
    passes_.assign(cells, 0);
    first_side_.assign(cells, 0);
    path_.reserve(max_len);
  }

  bool can_step(Step s) const {
    if (static_cast<int>(path_.size()) >= max_len_) return false;
    std::size_t v = idx(pos_);
    if (mask_[v] & (1u << static_cast<int>(s))) return false;
    LatticePoint next = pos_ + step_vector(s);
    if (!keep_ && static_cast<Coord>(path_.size()) + 1 + norm1(b_ - next) > max_len_) return false;
    if (c_ && !c_->in_half_plane(next)) return false;
    if (keep_ && !(*keep_)(next, path_)) return false;
    if (!path_.empty() && passes_[v] == 1) {
      int in_side = bond_side(opposite(path_.back()));
      if (first_side_[v] == 0 || in_side != bond_side(s)) return false;
    }
    return true;
  }

  void push(Step s) {
    std::size_t v = idx(pos_);
    if (!path_.empty()) {
      int in_side = bond_side(opposite(path_.back()));
      int out_side = bond_side(s);
      if (++passes_[v] == 1) first_side_[v] = static_cast<std::int8_t>(in_side == out_side ? in_side : 0);
    }
    LatticePoint next = pos_ + step_vector(s);
    mask_[v] |= static_cast<std::uint8_t>(1u << static_cast<int>(s));
    mask_[idx(next)] |= static_cast<std::uint8_t>(1u << static_cast<int>(opposite(s)));
    pos_ = next;
    path_.push_back(s);
  }

  void pop() {
    Step s = path_.back();
    path_.pop_back();
    LatticePoint prev = pos_ - step_vector(s);
    mask_[idx(pos_)] &= static_cast<std::uint8_t>(~(1u << static_cast<int>(opposite(s))));
    mask_[idx(prev)] &= static_cast<std::uint8_t>(~(1u << static_cast<int>(s)));
    pos_ = prev;
    if (!path_.empty()) --passes_[idx(pos_)];
  }

  void dfs(const ContourVisitor& visit) {
    if (!path_.empty() && (keep_ || pos_ == b_)) visit(path_);
    for (Step s : kSteps) {
      if (can_step(s)) {
        push(s);
        dfs(visit);
        pop();
      }
    }
  }

  void plan(int depth, EnumerationPlan& out) {
    if (static_cast<int>(path_.size()) == depth) {
      out.prefixes.push_back(path_);
      out.emit_only.push_back(false);
      return;
    }
    if (pos_ == b_ && !path_.empty()) {
      out.prefixes.push_back(path_);
      out.emit_only.push_back(true);
    }
    for (Step s : kSteps) {
      if (can_step(s)) {
        push(s);
        plan(depth, out);
        pop();
      }
    }
  }

  const std::vector<Step>& path() const { return path_; }
  bool start_ok() const { return !c_ || c_->in_half_plane(a_); }

 private:
  std::size_t idx(LatticePoint p) const {
    return static_cast<std::size_t>((p.y - origin_.y) * side_ + (p.x - origin_.x));
  }

  LatticePoint a_, b_;
  int max_len_;
  std::optional<WallDirection> c_;
  const VertexFilter* keep_;
  LatticePoint pos_;
  LatticePoint origin_;
  Coord side_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::uint8_t> passes_;
  std::vector<std::int8_t> first_side_;
  std::vector<Step> path_;
};

constexpr int kDefaultPrefixDepth = 4;

void check_enumeration_args(LatticePoint a, LatticePoint b, int max_len) {
  if (a == b) throw Error(ErrorCode::InvalidArgument, "enumerate_contours: a and b must differ");
  if (max_len < 0) throw Error(ErrorCode::InvalidArgument, "enumerate_contours: negative max_len");
}

}  // namespace

void enumerate_contours(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts,
                        const ContourVisitor& visit) {
  check_enumeration_args(a, b, max_len);
  if (norm1(b - a) > max_len) return;
  Walker w(a, b, max_len, opts.constraint);
  if (!w.start_ok()) return;
  w.dfs(visit);
}

void enumerate_trails(LatticePoint a, int max_len, const VertexFilter& keep, const ContourVisitor& visit) {
  if (max_len < 0) throw Error(ErrorCode::InvalidArgument, "enumerate_trails: negative max_len");
  if (!keep(a, {})) return;
  Walker w(a, a, max_len, std::nullopt, &keep);
  w.dfs(visit);
}

EnumerationPlan plan_enumeration(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts) {
  check_enumeration_args(a, b, max_len);
  EnumerationPlan plan;
  plan.a = a;
  plan.b = b;
  plan.max_len = max_len;
  plan.constraint = opts.constraint;
  if (norm1(b - a) > max_len) return plan;
  Walker w(a, b, max_len, opts.constraint);
  if (!w.start_ok()) return plan;
  int depth = opts.prefix_depth > 0 ? opts.prefix_depth : kDefaultPrefixDepth;
  w.plan(std::min(depth, max_len), plan);
  return plan;
}

void EnumerationPlan::run_task(std::size_t i, const ContourVisitor& visit) const {
  Walker w(a, b, max_len, constraint);
  for (Step s : prefixes[i]) w.push(s);
  if (emit_only[i]) {
    visit(w.path());
  } else {
    w.dfs(visit);
  }
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

ContourSet collect_contours(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts) {
  EnumerationPlan plan = plan_enumeration(a, b, max_len, opts);
  std::vector<ContourSet> parts(plan.size(), ContourSet(a));
  parallel_for(plan.size(), opts.threads, [&](std::size_t i) {
    plan.run_task(i, [&](std::span<const Step> s) { parts[i].push(s); });
  });
  ContourSet out(a);
  for (const auto& p : parts) out.append(p);
  return out;
}

ContourSet naive_contours(LatticePoint a, LatticePoint b, int max_len, const std::optional<WallDirection>& constraint) {
  ContourSet out(a);
  std::vector<Step> seq;
  std::function<void(LatticePoint)> rec = [&](LatticePoint pos) {
    if (!seq.empty() && pos == b && is_valid_contour(a, seq)) {
      bool inside = true;
      if (constraint) {
        OpenContour g(a, seq);
        for (const auto& v : g.vertices()) inside = inside && constraint->in_half_plane(v);
      }
      if (inside) out.push(seq);
    }
    if (static_cast<int>(seq.size()) == max_len) return;
    for (Step s : kSteps) {
      seq.push_back(s);
      rec(pos + step_vector(s));
      seq.pop_back();
    }
  };
  rec(a);
  return out;
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'L', 'C', 'C'};

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

bool get_varint(const std::vector<std::uint8_t>& in, std::size_t& pos, std::uint64_t& v) {
  v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) return false;
    std::uint8_t byte = in[pos++];
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if (!(byte & 0x80)) return true;
  }
  return false;
}

}  // namespace

ContourCache::ContourCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<std::filesystem::path> ContourCache::resolve_dir(const std::optional<std::filesystem::path>& fallback) {
  if (const char* env = std::getenv(kEnvVar); env && *env) return std::filesystem::path(env);
  return fallback;
}

std::string ContourCache::make_key(LatticePoint a, LatticePoint b, int max_len, const std::optional<WallDirection>& c) {
  std::ostringstream os;
  os << "a=" << a.x << "," << a.y << ";b=" << b.x << "," << b.y << ";L=" << max_len << ";n=";
  if (c) {
    os << c->a() << "," << c->b();
  } else {
    os << "none";
  }
  return os.str();
}

std::filesystem::path ContourCache::path_for(const std::string& key) const {
  std::uint64_t h = fnv1a64(reinterpret_cast<const std::uint8_t*>(key.data()), key.size());
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.plc", static_cast<unsigned long long>(h));
  return dir_ / name;
}

std::vector<std::uint8_t> ContourCache::encode(const std::string& key, const ContourSet& set) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((kVersion >> (8 * i)) & 0xFF));
  put_varint(out, key.size());
  out.insert(out.end(), key.begin(), key.end());
  put_varint(out, set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto s = set.steps(i);
    put_varint(out, s.size());
    std::uint8_t byte = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      byte |= static_cast<std::uint8_t>(static_cast<int>(s[k]) << (2 * (k & 3)));
      if ((k & 3) == 3) {
        out.push_back(byte);
        byte = 0;
      }
    }
    if (s.size() & 3) out.push_back(byte);
  }
  std::uint64_t h = fnv1a64(out.data(), out.size());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((h >> (8 * i)) & 0xFF));
  return out;
}

std::optional<ContourSet> ContourCache::decode(const std::vector<std::uint8_t>& bytes, const std::string& key,
                                                LatticePoint start) {
  if (bytes.size() < 16) return std::nullopt;
  std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (fnv1a64(bytes.data(), body) != stored) return std::nullopt;
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) return std::nullopt;
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  if (version != kVersion) return std::nullopt;
  std::vector<std::uint8_t> view(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(body));
  std::size_t pos = 8;
  std::uint64_t klen = 0;
  if (!get_varint(view, pos, klen) || pos + klen > view.size()) return std::nullopt;
  if (std::string(view.begin() + static_cast<std::ptrdiff_t>(pos),
                  view.begin() + static_cast<std::ptrdiff_t>(pos + klen)) != key) {
    return std::nullopt;
  }
  pos += klen;
  std::uint64_t count = 0;
  if (!get_varint(view, pos, count)) return std::nullopt;
  ContourSet set(start);
  std::vector<Step> steps;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t len = 0;
    if (!get_varint(view, pos, len)) return std::nullopt;
    std::size_t nbytes = (len + 3) / 4;
    if (pos + nbytes > view.size()) return std::nullopt;
    steps.clear();
    for (std::uint64_t k = 0; k < len; ++k) {
      steps.push_back(static_cast<Step>((view[pos + k / 4] >> (2 * (k & 3))) & 3));
    }
    pos += nbytes;
    set.push(steps);
  }
  if (pos != view.size()) return std::nullopt;
  return set;
}

ContourSet ContourCache::get_or_compute(LatticePoint a, LatticePoint b, int max_len, const EnumerationOptions& opts) {
  std::string key = make_key(a, b, max_len, opts.constraint);
  auto path = path_for(key);
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (auto set = decode(bytes, key, a)) {
      ++stats_.hits;
      return *set;
    }
    ++stats_.corrupt;
  }
  ++stats_.misses;
  ContourSet set = collect_contours(a, b, max_len, opts);
  std::filesystem::create_directories(dir_, ec);
  auto bytes = encode(key, set);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "cannot write cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot install cache file " + path.string());
  return set;
}

}  // namespace polylab
