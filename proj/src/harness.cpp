#include "polylab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "polylab/error.hpp"
#include "polylab/renewal.hpp"

namespace polylab {

using json = nlohmann::json;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Object reader that tracks the field path and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& at(const std::string& key) const { return j_.at(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (has(key)) out = convert<T>(j_.at(key), path(key));
  }
  Fields child(const std::string& key) {
    seen_.insert(key);
    return Fields(j_.at(key), path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
  }

  template <class T>
  static T convert(const json& v, const std::string& p);

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <>
double Fields::convert<double>(const json& v, const std::string& p) {
  if (!v.is_number()) throw ConfigError(p, "expected a number");
  return v.get<double>();
}
template <>
int Fields::convert<int>(const json& v, const std::string& p) {
  if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
  auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(p, "integer out of range");
  return static_cast<int>(x);
}
template <>
std::int64_t Fields::convert<std::int64_t>(const json& v, const std::string& p) {
  if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
  return v.get<std::int64_t>();
}
template <>
std::uint64_t Fields::convert<std::uint64_t>(const json& v, const std::string& p) {
  // Integral floats such as 1e8 are accepted.
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (d >= 0 && d < 1.8e19 && d == std::floor(d)) return static_cast<std::uint64_t>(d);
  }
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(p, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}
template <>
bool Fields::convert<bool>(const json& v, const std::string& p) {
  if (!v.is_boolean()) throw ConfigError(p, "expected true or false");
  return v.get<bool>();
}
template <>
std::string Fields::convert<std::string>(const json& v, const std::string& p) {
  if (!v.is_string()) throw ConfigError(p, "expected a string");
  return v.get<std::string>();
}
template <>
LatticePoint Fields::convert<LatticePoint>(const json& v, const std::string& p) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(p, "expected [x, y]");
  return {convert<std::int64_t>(v[0], p + "[0]"), convert<std::int64_t>(v[1], p + "[1]")};
}
template <>
std::array<double, 2> Fields::convert<std::array<double, 2>>(const json& v, const std::string& p) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(p, "expected [x, y]");
  return {convert<double>(v[0], p + "[0]"), convert<double>(v[1], p + "[1]")};
}

template <class T>
void get_list(Fields& f, const std::string& key, std::vector<T>& out) {
  if (!f.has(key)) return;
  const json& v = f.at(key);
  std::string p = f.path(key);
  if (!v.is_array()) throw ConfigError(p, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Fields::convert<T>(v[i], p + "[" + std::to_string(i) + "]"));
}

std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

template <class Fn>
auto checked(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

void require(bool cond, const std::string& path, const std::string& what) {
  if (!cond) throw ConfigError(path, what);
}

void validate(const ExperimentConfig& c) {
  const auto& ops = known_ops();
  require(std::find(ops.begin(), ops.end(), c.op) != ops.end(), "op", "unknown op '" + c.op + "'");
  require(!c.experiment.empty() && c.experiment.find('/') == std::string::npos && c.experiment != "." &&
              c.experiment != "..",
          "experiment", "must be a plain nonempty name");
  for (double b : c.beta) require(b > 0, "beta", "values must be positive");
  require(c.constants.chi > 0, "chi", "must be positive");
  require(c.constants.allow_pinning_regime || c.constants.chi > 0.5, "chi",
          "must exceed 1/2 unless allow_pinning_regime is set");
  require(c.constants.delta > 0, "delta", "must be positive");
  checked("tolerances", [&] {
    AnalysisConstants k = c.constants;
    for (double b : c.beta) {
      k.beta = b;
      k.validate();
    }
    return 0;
  });
  require(!c.beta.empty(), "beta", "grid must not be empty");
  for (double e : c.epsilon) require(e >= 0 && e <= 1, "epsilon", "values must lie in [0, 1]");
  for (auto d : c.directions)
    require(d[0] >= 0 && d[1] >= 0 && d[0] + d[1] > 0, "directions", "must be nonzero and in the first quadrant");
  require(c.threads >= 1, "threads", "must be at least 1");
  require(c.excess_levels >= 0, "enumeration.excess_levels", "must be nonnegative");
  require(c.animals.len_cap >= 1, "animals.len_cap", "must be positive");
  require(c.walk.len_cap >= 1, "walk.len_cap", "must be positive");
  require(c.walk.samples >= 2, "walk.samples", "need at least 2 samples");
  require(c.walk.window >= 1, "walk.window", "must be positive");
  require(c.walk.band >= 1, "walk.band", "must be at least 1");
  const std::string& op = c.op;
  if (op == "ratio" || op == "pinning-demo") require(c.L.size() >= 2, "L", "need at least two wall lengths");
  if (op == "pinning-demo") {
    require(!c.M.empty(), "M", "grid must not be empty");
    for (double m : c.M) require(m >= 0, "M", "values must be nonnegative");
    require(c.constants.allow_pinning_regime, "allow_pinning_regime", "pinning-demo needs allow_pinning_regime");
    require(c.constants.chi <= 0.5, "chi", "pinning-demo needs chi <= 1/2");
  }
  if (op == "surface-tension") {
    require(!c.N.empty(), "N", "grid must not be empty");
    require(!c.directions.empty(), "directions", "need at least one direction");
    for (auto d : c.directions)
      require(d[0] == std::floor(d[0]) && d[1] == std::floor(d[1]), "directions", "must be integer vectors here");
  }
  if (op == "twopoint" || op == "green" || op == "alili-doney")
    require(!c.points.empty(), "points", "need at least one endpoint");
  if (op == "local-limit") {
    require(!c.directions.empty(), "directions", "need at least one direction");
    for (auto d : c.directions)
      require(d[0] == std::floor(d[0]) && d[1] == std::floor(d[1]), "directions", "must be integer vectors here");
  }
  if (c.boundary.kind == "BOUNDARY_PIN")
    require(c.constants.chi <= 0.5 || c.boundary.strength == 0, "boundary.strength",
            "a pin violates the decay bound for chi > 1/2");
}

}  // namespace

const std::vector<std::string>& known_ops() {
  static const std::vector<std::string> ops = {"twopoint", "ratio",  "pinning-demo", "surface-tension", "tilt",
                                               "massgap",  "wulff",  "green",        "alili-doney",     "ladder",
                                               "decomp",   "rho",    "local-limit"};
  return ops;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& default_op) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Fields f(j, "");
  f.get("experiment", c.experiment);
  f.get("op", c.op);
  if (c.op.empty()) c.op = default_op;
  require(!c.op.empty(), "op", "missing");
  require(default_op.empty() || c.op == default_op, "op", "'" + c.op + "' does not match the subcommand '" + default_op + "'");
  f.get("chi", c.constants.chi);
  f.get("delta", c.constants.delta);
  f.get("allow_pinning_regime", c.constants.allow_pinning_regime);
  get_list(f, "beta", c.beta);
  get_list(f, "L", c.L);
  get_list(f, "epsilon", c.epsilon);
  get_list(f, "M", c.M);
  get_list(f, "N", c.N);
  get_list(f, "points", c.points);
  get_list(f, "directions", c.directions);
  if (f.has("potential")) {
    auto p = f.child("potential");
    p.get("kind", c.potential.kind);
    c.potential.kind = upper(c.potential.kind);
    p.get("seed", c.potential.seed);
    p.finish();
    require(c.potential.kind == "ZERO" || c.potential.kind == "RANDOM_SIGN", "potential.kind",
            "expected ZERO or RANDOM_SIGN");
  }
  if (f.has("boundary")) {
    auto b = f.child("boundary");
    b.get("kind", c.boundary.kind);
    c.boundary.kind = upper(c.boundary.kind);
    b.get("seed", c.boundary.seed);
    b.get("strength", c.boundary.strength);
    b.finish();
    require(c.boundary.kind == "IDENTITY" || c.boundary.kind == "RANDOM_SIGN" || c.boundary.kind == "BOUNDARY_PIN",
            "boundary.kind", "expected IDENTITY, RANDOM_SIGN or BOUNDARY_PIN");
    require(c.boundary.strength >= 0, "boundary.strength", "must be nonnegative");
  }
  if (f.has("wall")) {
    LatticePoint w = Fields::convert<LatticePoint>(f.at("wall"), "wall");
    c.wall = checked("wall", [&] { return WallDirection(w.x, w.y); });
  }
  if (f.has("weights")) {
    auto w = f.child("weights");
    if (w.has("mode")) {
      std::string m;
      w.get("mode", m);
      c.weight_mode = checked("weights.mode", [&] { return parse_weight_mode(upper(m)); });
      c.weight_mode_set = true;
    }
    w.get("cluster_cap", c.constants.cutoffs.max_cluster_diam);
    w.get("growth_constant", c.growth_constant);
    w.finish();
  }
  if (f.has("enumeration")) {
    auto e = f.child("enumeration");
    e.get("max_len", c.max_len);
    e.get("excess_levels", c.excess_levels);
    e.get("budget", c.budget);
    e.finish();
  }
  if (f.has("tolerances")) {
    auto t = f.child("tolerances");
    t.get("log_weight", c.constants.tolerances.log_weight_tol);
    t.get("identity", c.constants.tolerances.identity_tol);
    t.finish();
  }
  if (f.has("animals")) {
    auto a = f.child("animals");
    a.get("len_cap", c.animals.len_cap);
    a.get("extended_len_cap", c.animals.extended_len_cap);
    a.get("max_excess", c.animals.max_excess);
    a.get("budget", c.animals.budget);
    a.finish();
  }
  if (f.has("walk")) {
    auto w = f.child("walk");
    if (w.has("law")) {
      std::string s;
      w.get("law", s);
      c.walk.law = checked("walk.law", [&] { return parse_step_law_mode(s); });
    }
    w.get("include_gamma4", c.walk.include_gamma4);
    w.get("len_cap", c.walk.len_cap);
    w.get("samples", c.walk.samples);
    get_list(w, "z", c.walk.z);
    get_list(w, "m", c.walk.m);
    w.get("window", c.walk.window);
    w.get("probe_depth", c.walk.probe_depth);
    w.get("reach", c.walk.reach);
    w.get("band", c.walk.band);
    w.get("c0", c.walk.c0);
    w.finish();
  }
  f.get("seed", c.seed);
  f.get("threads", c.threads);
  if (f.has("out")) c.out = Fields::convert<std::string>(f.at("out"), "out");
  if (f.has("cache")) c.cache = Fields::convert<std::string>(f.at("cache"), "cache");
  f.finish();
  if (c.max_len < 0) throw ConfigError("enumeration.max_len", "must be nonnegative");
  if (c.op == "pinning-demo" && !c.weight_mode_set) c.weight_mode = WeightMode::Direct;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file, const std::string& default_op) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), default_op);
}

std::string canonical_config(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["op"] = c.op;
  j["chi"] = c.constants.chi;
  j["delta"] = c.constants.delta;
  j["allow_pinning_regime"] = c.constants.allow_pinning_regime;
  j["beta"] = c.beta;
  j["L"] = c.L;
  j["epsilon"] = c.epsilon;
  j["M"] = c.M;
  j["N"] = c.N;
  json pts = json::array();
  for (auto p : c.points) pts.push_back({p.x, p.y});
  j["points"] = pts;
  j["directions"] = c.directions;
  j["potential"] = {{"kind", c.potential.kind}, {"seed", c.potential.seed}};
  j["boundary"] = {{"kind", c.boundary.kind}, {"seed", c.boundary.seed}, {"strength", c.boundary.strength}};
  j["wall"] = {c.wall.a(), c.wall.b()};
  j["weights"] = {{"mode", weight_mode_name(c.weight_mode)},
                  {"cluster_cap", c.constants.cutoffs.max_cluster_diam},
                  {"growth_constant", c.growth_constant}};
  j["enumeration"] = {
      {"max_len", c.max_len}, {"excess_levels", c.excess_levels}, {"budget", c.budget}};
  j["tolerances"] = {{"log_weight", c.constants.tolerances.log_weight_tol},
                     {"identity", c.constants.tolerances.identity_tol}};
  j["animals"] = {{"len_cap", c.animals.len_cap},
                  {"extended_len_cap", c.animals.extended_len_cap},
                  {"max_excess", c.animals.max_excess},
                  {"budget", c.animals.budget}};
  j["walk"] = {{"law", step_law_mode_name(c.walk.law)},
               {"include_gamma4", c.walk.include_gamma4},
               {"len_cap", c.walk.len_cap},
               {"samples", c.walk.samples},
               {"z", c.walk.z},
               {"m", c.walk.m},
               {"window", c.walk.window},
               {"probe_depth", c.walk.probe_depth},
               {"reach", c.walk.reach},
               {"band", c.walk.band},
               {"c0", c.walk.c0}};
  j["seed"] = c.seed;
  return j.dump();
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::string s = canonical_config(c) + "\n" + kCodeVersion;
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw Error(ErrorCode::InvalidArgument, "table " + name + ": row width does not match the header");
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string format_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (auto p = std::get_if<std::int64_t>(&row[i])) out += std::to_string(*p);
      else if (auto d = std::get_if<double>(&row[i])) out += format_number(*d);
      else out += csv_field(std::get<std::string>(row[i]));
    }
    out += '\n';
  }
  return out;
}

namespace {

using I = std::int64_t;

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

PotentialSpec base_potential(const ExperimentConfig& c) {
  if (c.potential.kind == "RANDOM_SIGN") return PotentialSpec::random_sign(c.constants.chi, c.potential.seed);
  return PotentialSpec::zero(c.constants.chi);
}

ModifiedPotentialSpec modified_potential(const ExperimentConfig& c, double beta) {
  auto base = base_potential(c);
  if (c.boundary.kind == "BOUNDARY_PIN") return builtin_boundary_pin(c.boundary.strength, beta, c.constants.chi, c.wall, base);
  auto m = ModifiedPotentialSpec::identity(base, c.wall);
  if (c.boundary.kind == "RANDOM_SIGN") {
    auto b = PotentialSpec::random_sign(c.constants.chi, c.boundary.seed);
    b.position_keyed = true;
    m.boundary = b;
  }
  return m;
}

TwoPointSettings two_point_settings(const ExperimentConfig& c, double beta, ContourCache* cache) {
  TwoPointSettings s;
  s.weights.beta = beta;
  s.weights.cluster_cap = c.constants.cutoffs.max_cluster_diam;
  s.weights.growth_constant = c.growth_constant;
  s.weights.mode = c.weight_mode;
  s.max_len = c.max_len;
  s.excess_levels = c.excess_levels;
  s.threads = c.threads;
  s.cache = cache;
  s.budget = c.budget;
  return s;
}

bool is_budget(const Error& e) { return e.code() == ErrorCode::BudgetExceeded; }

struct Context {
  const ExperimentConfig& c;
  RunResult& r;
  ContourCache* cache;

  void check(const std::string& name, bool pass, const std::string& detail) { r.assertions.push_back({name, pass, detail}); }
};

void op_twopoint(Context& x) {
  const auto& c = x.c;
  Table t{"twopoint",
          {"beta", "x", "y", "variant", "log_g", "err_lo", "err_hi", "max_len", "tail_log", "cluster_err", "contours",
           "status"},
          {}};
  auto emit = [&](double beta, LatticePoint p, Variant v, const TwoPointResult& g) {
    t.add({beta, I(p.x), I(p.y), std::string(variant_name(v)), g.value_log, g.err_lo, g.err_hi, I(g.cutoff_used),
           g.cutoff_tail_log, g.cluster_err, I(g.contours), std::string("ok")});
  };
  auto flag = [&](double beta, LatticePoint p, Variant v) {
    x.r.partial = true;
    t.add({beta, I(p.x), I(p.y), std::string(variant_name(v)), kNaN, kNaN, kNaN, I(0), kNaN, kNaN, I(0),
           std::string("budget_exceeded")});
  };
  for (double beta : c.beta) {
    auto phi = modified_potential(c, beta);
    auto s = two_point_settings(c, beta, x.cache);
    for (LatticePoint p : c.points) {
      try {
        emit(beta, p, Variant::Free, two_point(p, Variant::Free, phi, s));
      } catch (const Error& e) {
        if (!is_budget(e)) throw;
        flag(beta, p, Variant::Free);
      }
      if (!c.wall.in_half_plane(p)) continue;
      try {
        auto pair = two_point_pair(p, phi, s);
        emit(beta, p, Variant::RestrictedHalfPlane, pair.restricted);
        emit(beta, p, Variant::Pinned, pair.pinned);
      } catch (const Error& e) {
        if (!is_budget(e)) throw;
        flag(beta, p, Variant::RestrictedHalfPlane);
        flag(beta, p, Variant::Pinned);
      }
    }
  }
  x.r.provenance.push_back("log_g sums contours up to max_len plus a geometric tail estimate (tail_log); "
                           "err_lo/err_hi add the cluster truncation bound cluster_err");
  x.r.tables.push_back(std::move(t));
}

// Ratio rows for one potential over the L grid, with the slope fit over completed rows.
struct RatioSweep {
  std::vector<std::vector<Cell>> rows;
  SlopeFit fit;
  std::size_t failed = 0;
  double max_abs_ratio = 0.0;
};

RatioSweep ratio_sweep(Context& x, const ModifiedPotentialSpec& phi, double beta) {
  const auto& c = x.c;
  auto s = two_point_settings(c, beta, x.cache);
  RatioSweep out;
  std::vector<double> ls, ys, hws;
  for (int L : c.L) {
    LatticePoint p = wall_point(c.wall, L);
    try {
      auto pair = two_point_pair(p, phi, s);
      double ratio = pair.pinned.value_log - pair.restricted.value_log;
      double lo = pair.pinned.err_lo - pair.restricted.err_hi;
      double hi = pair.pinned.err_hi - pair.restricted.err_lo;
      out.rows.push_back({I(L), I(p.x), I(p.y), ratio, lo, hi, pair.restricted.value_log, pair.pinned.value_log,
                          I(pair.pinned.contours), I(pair.pinned.cutoff_used), std::string("ok")});
      ls.push_back(L);
      ys.push_back(ratio);
      hws.push_back(0.5 * (hi - lo));
      out.max_abs_ratio = std::max(out.max_abs_ratio, std::abs(ratio));
    } catch (const Error& e) {
      if (!is_budget(e)) throw;
      x.r.partial = true;
      ++out.failed;
      out.rows.push_back({I(L), I(p.x), I(p.y), kNaN, kNaN, kNaN, kNaN, kNaN, I(0), I(0), std::string("budget_exceeded")});
    }
  }
  out.fit = fit_slope(ls, ys, hws);
  return out;
}

const std::vector<std::string> kRatioColumns = {"L", "x", "y", "log_ratio", "lo", "hi", "log_restricted",
                                                "log_pinned", "contours", "max_len", "status"};
const std::vector<std::string> kFitColumns = {"slope", "intercept", "sigma", "sigma_band", "sigma_residual",
                                              "inconclusive"};

std::vector<Cell> fit_cells(const SlopeFit& f) {
  return {f.slope, f.intercept, f.sigma, f.sigma_band, f.sigma_residual, I(f.inconclusive ? 1 : 0)};
}

void op_ratio(Context& x) {
  const auto& c = x.c;
  Table rows{"ratio", {"beta"}, {}};
  rows.columns.insert(rows.columns.end(), kRatioColumns.begin(), kRatioColumns.end());
  Table fits{"fits", {"beta"}, {}};
  fits.columns.insert(fits.columns.end(), kFitColumns.begin(), kFitColumns.end());
  for (double beta : c.beta) {
    auto sweep = ratio_sweep(x, modified_potential(c, beta), beta);
    for (auto& r : sweep.rows) {
      r.insert(r.begin(), beta);
      rows.add(std::move(r));
    }
    auto fc = fit_cells(sweep.fit);
    fc.insert(fc.begin(), beta);
    fits.add(std::move(fc));
    if (c.boundary.kind == "IDENTITY")
      x.check(fmt("beta=%g: ratio vanishes without a boundary modification", beta), sweep.max_abs_ratio <= c.constants.tolerances.log_weight_tol,
              fmt("max |log ratio| %.3g", sweep.max_abs_ratio));
  }
  x.r.provenance.push_back("ratio = log G^{+,n}(x) - log G(x|P+) at x on the wall line; lo/hi propagate both bands; "
                           "slope fit weights rows by the band half-widths");
  x.r.tables.push_back(std::move(rows));
  x.r.tables.push_back(std::move(fits));
}

void op_pinning_demo(Context& x) {
  const auto& c = x.c;
  Table rows{"ratio", {"M", "beta"}, {}};
  rows.columns.insert(rows.columns.end(), kRatioColumns.begin(), kRatioColumns.end());
  Table fits{"fits", {"M", "beta"}, {}};
  fits.columns.insert(fits.columns.end(), kFitColumns.begin(), kFitColumns.end());
  fits.columns.push_back("target");
  for (double M : c.M)
    for (double beta : c.beta) {
      auto phi = builtin_boundary_pin(M, beta, c.constants.chi, c.wall, base_potential(c));
      auto sweep = ratio_sweep(x, phi, beta);
      for (auto& r : sweep.rows) {
        r.insert(r.begin(), {M, beta});
        rows.add(std::move(r));
      }
      double target = 0.8 * M * std::exp(-beta);
      auto fc = fit_cells(sweep.fit);
      fc.insert(fc.begin(), {M, beta});
      fc.push_back(target);
      fits.add(std::move(fc));
      const auto& f = sweep.fit;
      if (M == 0)
        x.check(fmt("M=0 beta=%g: slope indistinguishable from 0", beta), std::abs(f.slope) <= 2 * f.sigma,
                fmt("slope %.4g, 2 sigma %.4g", f.slope, 2 * f.sigma));
      else if (M >= 10)
        x.check(fmt("M=%g beta=%g: slope at least 0.8 M e^-beta", M, beta), f.slope >= target,
                fmt("slope %.4g, target %.4g", f.slope, target));
    }
  x.r.provenance.push_back("pin adds M e^{-beta} on singletons outside the half-plane that lie in the contour vertex set; "
                           "weights evaluated in " + std::string(weight_mode_name(c.weight_mode)) + " mode");
  x.r.tables.push_back(std::move(rows));
  x.r.tables.push_back(std::move(fits));
}

void op_surface_tension(Context& x) {
  const auto& c = x.c;
  Table t{"surface_tension",
          {"beta", "dx", "dy", "N", "x", "y", "tau_free", "tau_free_lo", "tau_free_hi", "tau_pinned", "tau_pinned_lo",
           "tau_pinned_hi"},
          {}};
  for (double beta : c.beta) {
    auto phi = modified_potential(c, beta);
    auto s = two_point_settings(c, beta, x.cache);
    for (auto d : c.directions) {
      LatticePoint dir{static_cast<Coord>(d[0]), static_cast<Coord>(d[1])};
      for (const auto& r : surface_tension_estimate(dir, c.N, phi, s))
        t.add({beta, I(dir.x), I(dir.y), I(r.N), I(r.x.x), I(r.x.y), r.tau_free, r.tau_free_lo, r.tau_free_hi,
               r.tau_pinned, r.tau_pinned_lo, r.tau_pinned_hi});
    }
  }
  x.r.provenance.push_back("tau = -log G / (beta |x|_2); pinned column only for endpoints on the wall line");
  x.r.tables.push_back(std::move(t));
}

// One tilt per grid point: directions when given, otherwise the epsilon grid.
struct TiltPoint {
  double epsilon = kNaN;
  std::array<double, 2> direction{1, 0};
};

std::vector<TiltPoint> tilt_grid(const ExperimentConfig& c) {
  std::vector<TiltPoint> out;
  if (!c.directions.empty())
    for (auto d : c.directions) out.push_back({kNaN, d});
  else
    for (double e : c.epsilon) out.push_back({e, {1 - e, e}});
  return out;
}

AnimalTable build_table(const ExperimentConfig& c, double beta) {
  AnimalTableSettings s;
  s.beta = beta;
  s.len_cap = c.animals.len_cap;
  s.extended_len_cap = c.animals.extended_len_cap;
  s.max_excess = c.animals.max_excess;
  s.budget = c.animals.budget;
  s.cluster_cap = c.constants.cutoffs.max_cluster_diam;
  s.growth_constant = c.growth_constant;
  s.phi = base_potential(c);
  s.threads = c.threads;
  return enumerate_irreducible_animals(s);
}

TiltVector solve(const TiltPoint& p, const AnimalTable& tab) {
  return std::isnan(p.epsilon) ? tilt_solve(p.direction, tab) : tilt_solve_epsilon(p.epsilon, tab);
}

StepLaw make_law(const ExperimentConfig& c, const TiltVector& t, const AnimalTable& tab) {
  return c.walk.law == StepLawMode::Basic ? build_basic_law(t, c.walk.include_gamma4) : build_table_law(t, tab);
}

// Grid points run on the pool; rows come back in grid order.
template <class Fn>
void for_grid(Context& x, const std::vector<std::string>& columns, const std::string& name, bool parallel, Fn&& fn) {
  const auto& c = x.c;
  auto grid = tilt_grid(c);
  Table t{name, {"beta", "epsilon", "dir_x", "dir_y"}, {}};
  t.columns.insert(t.columns.end(), columns.begin(), columns.end());
  for (double beta : c.beta) {
    auto tab = build_table(c, beta);
    std::vector<std::vector<std::vector<Cell>>> slots(grid.size());
    std::vector<std::vector<Assertion>> checks(grid.size());
    auto task = [&](std::size_t i) {
      auto tilt = solve(grid[i], tab);
      fn(beta, grid[i], tilt, tab, slots[i], checks[i]);
    };
    parallel_for(grid.size(), parallel ? c.threads : 1, task);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (auto& row : slots[i]) {
        row.insert(row.begin(), {beta, grid[i].epsilon, grid[i].direction[0], grid[i].direction[1]});
        t.add(std::move(row));
      }
      for (auto& a : checks[i]) x.r.assertions.push_back(std::move(a));
    }
  }
  x.r.provenance.push_back(name + ": animal table len_cap " + std::to_string(c.animals.len_cap) +
                           ", extended_len_cap " + std::to_string(c.animals.extended_len_cap) + ", max_excess " +
                           std::to_string(c.animals.max_excess) + "; tail column is the extrapolated missing mass");
  x.r.tables.push_back(std::move(t));
}

std::string grid_label(double beta, const TiltPoint& p) {
  if (std::isnan(p.epsilon)) return fmt("beta=%g dir=(%g,%g)", beta, p.direction[0], p.direction[1]);
  return fmt("beta=%g eps=%.6g", beta, p.epsilon);
}

void op_tilt(Context& x) {
  for_grid(x,
           {"h1", "h2", "a", "b", "delta_a", "delta_b", "normalization_residual", "collinearity_residual", "tail",
            "a_uncertainty", "b_uncertainty", "iterations", "converged", "basic_max_rel_err"},
           "tilt", true,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             auto basic = basic_animal_check(t, tab);
             rows.push_back({t.h[0], t.h[1], t.a, t.b, t.delta_a, t.delta_b, t.normalization_residual,
                             t.collinearity_residual, t.tail, t.a_uncertainty, t.b_uncertainty, I(t.iterations),
                             I(t.converged ? 1 : 0), basic.max_rel_err});
             bool ok = t.converged && t.normalization_residual <= 1e-10 + t.tail && t.collinearity_residual <= 1e-8 &&
                       basic.max_rel_err <= x.c.constants.tolerances.identity_tol;
             checks.push_back({grid_label(beta, p) + ": tilt residuals", ok,
                               fmt("normalization %.3g, collinearity %.3g, basic animals %.3g",
                                   t.normalization_residual, t.collinearity_residual, basic.max_rel_err)});
           });
}

void op_massgap(Context& x) {
  for_grid(x, {"slope", "rate", "nu_hat", "residual", "suggested_delta", "degenerate"}, "massgap", true,
           [&](double, const TiltPoint&, const TiltVector& t, const AnimalTable& tab, auto& rows, auto&) {
             auto g = mass_gap_measure(tab, t);
             rows.push_back({g.slope, g.rate, g.nu_hat, g.residual, g.suggested_delta, I(g.degenerate ? 1 : 0)});
           });
}

void op_wulff(Context& x) {
  for_grid(x,
           {"m_perp_x", "m_perp_y", "hess_perp", "grad_norm", "curvature", "hess_lower_bound", "bias_bound",
            "singular"},
           "wulff", true, [&](double, const TiltPoint&, const TiltVector& t, const AnimalTable& tab, auto& rows, auto&) {
             auto w = wulff_curvature(t, tab);
             rows.push_back({w.m_perp[0], w.m_perp[1], w.hess_perp, w.grad_norm, w.curvature, w.hess_lower_bound,
                             w.bias_bound, I(w.singular ? 1 : 0)});
           });
}

void op_green(Context& x) {
  const auto& c = x.c;
  for_grid(x, {"x", "y", "p_plus", "p_hat_plus", "p_free", "steps_bound"}, "green", true,
           [&](double, const TiltPoint&, const TiltVector& t, const AnimalTable& tab, auto& rows, auto&) {
             auto law = make_law(c, t, tab);
             auto free = free_green(c.points, law);
             for (std::size_t i = 0; i < c.points.size(); ++i) {
               LatticePoint v = c.points[i];
               auto g = constrained_green({0, 0}, v, c.wall, law);
               rows.push_back({I(v.x), I(v.y), g.p_plus, g.p_hat_plus, free[i], I(g.steps_bound)});
             }
           });
}

void op_alili_doney(Context& x) {
  const auto& c = x.c;
  double tol = c.constants.tolerances.identity_tol;
  for_grid(x, {"x", "y", "identity", "lhs", "rhs", "rel_err", "rearranged", "rearranged_rel_err", "missing_mass",
               "applicable"},
           "alili_doney", true,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             auto law = make_law(c, t, tab);
             double worst = 0.0;
             for (LatticePoint v : c.points) {
               auto r = alili_doney_check(v, c.wall, law, c.walk.len_cap, tol);
               const std::pair<const char*, const AliliDoneyResult*> kinds[] = {
                   {"ascending", &r.ascending}, {"descending", &r.descending},
                   {"descending_nonstrict", &r.descending_nonstrict}};
               for (auto [name, a] : kinds) {
                 rows.push_back({I(v.x), I(v.y), std::string(name), a->lhs, a->rhs, a->rel_err, a->rearranged,
                                 a->rearranged_rel_err, a->missing_mass, I(a->applicable ? 1 : 0)});
                 if (a->applicable) worst = std::max({worst, a->rel_err, a->rearranged_rel_err});
               }
             }
             checks.push_back({grid_label(beta, p) + ": identities exact", worst <= tol, fmt("max rel err %.3g", worst)});
           });
}

void op_ladder(Context& x) {
  const auto& c = x.c;
  for_grid(x, {"p_plus", "p_minus", "side", "z", "m", "k", "mean", "ci_upper", "bound", "slack", "holds",
               "shape_ratio"},
           "ladder", false,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             auto law = make_law(c, t, tab);
             LadderBoundSettings s;
             s.z = c.walk.z;
             s.m = c.walk.m;
             s.samples = c.walk.samples;
             s.seed = c.seed;
             s.threads = c.threads;
             auto rep = ladder_bound_check(law, c.wall, s);
             for (const auto& r : rep.rows)
               rows.push_back({rep.p_plus, rep.p_minus, std::string(r.descending ? "N-" : "N+"), I(r.z), I(r.m),
                               I(r.k), r.mean, r.ci_upper, r.bound, r.slack, I(r.holds ? 1 : 0), r.shape_ratio});
             checks.push_back({grid_label(beta, p) + ": ladder moments below the geometric bounds", rep.all_hold,
                               fmt("p+ %.4g, p- %.4g", rep.p_plus, rep.p_minus)});
           });
  x.r.provenance.push_back("ladder: Monte Carlo with counter-based streams keyed by (seed, sample); ci_upper is a "
                           "mean + 1.96 standard errors");
}

void op_decomp(Context& x) {
  const auto& c = x.c;
  Table laws{"decomp_laws", {"beta", "epsilon", "dir_x", "dir_y", "component", "x", "y", "p"}, {}};
  std::vector<std::vector<Cell>> law_rows;
  for_grid(x, {"regime", "q", "p", "alpha1", "alpha2", "eta", "basic_gamma3", "one_minus_q", "q_ratio",
               "max_mixture_err", "v_vertical_min", "v_mean_x", "near_boundary"},
           "decomp", false,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             double eps = std::isnan(p.epsilon) ? p.direction[1] / (p.direction[0] + p.direction[1]) : p.epsilon;
             auto d = decompose_walk(make_law(c, t, tab), eps, c.walk.c0);
             rows.push_back({std::string(regime_name(d.regime)), d.q, d.p, d.alpha1, d.alpha2, d.eta, d.basic_gamma3,
                             d.one_minus_q, d.q_ratio, d.max_mixture_err, d.v_vertical_min, d.v_mean_x,
                             I(d.near_boundary ? 1 : 0)});
             for (const auto& [comp, law] : {std::pair{"U", &d.u_law}, std::pair{"V", &d.v_law}})
               for (const auto& [y, q] : *law)
                 law_rows.push_back({beta, p.epsilon, p.direction[0], p.direction[1], std::string(comp), I(y.x), I(y.y), q});
             checks.push_back({grid_label(beta, p) + ": mixture reconstruction",
                               d.max_mixture_err <= c.constants.tolerances.identity_tol,
                               fmt("max err %.3g", d.max_mixture_err)});
           });
  for (auto& r : law_rows) laws.add(std::move(r));
  x.r.tables.push_back(std::move(laws));
}

void op_rho(Context& x) {
  const auto& c = x.c;
  for_grid(x, {"pairs", "rho", "rho_max_raw", "a_delta", "b_delta", "recursion_bound", "worst_u_x", "worst_u_y",
               "worst_v_x", "worst_v_y", "consistent"},
           "rho", true,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             RhoProbeSettings s;
             s.delta = c.constants.delta;
             s.chi = c.constants.chi;
             s.window = c.walk.window;
             s.probe_depth = c.walk.probe_depth;
             auto r = rho_recursion_probe(c.wall, make_law(c, t, tab), s);
             rows.push_back({I(r.pairs), r.rho, r.rho_max_raw, r.a_delta, r.b_delta, r.recursion_bound,
                             I(r.worst_u.x), I(r.worst_u.y), I(r.worst_v.x), I(r.worst_v.y), I(r.consistent ? 1 : 0)});
             checks.push_back({grid_label(beta, p) + ": b < 1 and rho <= (1+a)/(1-b)", r.consistent,
                               fmt("rho %.6g, a %.3g, b %.3g", r.rho, r.a_delta, r.b_delta)});
           });
}

void op_local_limit(Context& x) {
  const auto& c = x.c;
  for_grid(x, {"x", "y", "p", "reference", "ratio"}, "local_limit", true,
           [&](double beta, const TiltPoint& p, const TiltVector& t, const AnimalTable& tab, auto& rows, auto& checks) {
             auto law = make_law(c, t, tab);
             LatticePoint d{static_cast<Coord>(p.direction[0]), static_cast<Coord>(p.direction[1])};
             std::vector<LatticePoint> xs;
             for (Coord k = 1; norm1(k * d) <= c.walk.reach; ++k) xs.push_back(k * d);
             double lo = 1e300, hi = 0;
             for (const auto& r : local_limit_probe(xs, law)) {
               rows.push_back({I(r.x.x), I(r.x.y), r.p, r.reference, r.ratio});
               lo = std::min(lo, r.ratio);
               hi = std::max(hi, r.ratio);
             }
             bool ok = xs.empty() || (lo >= 1 / c.walk.band && hi <= c.walk.band);
             checks.push_back({grid_label(beta, p) + ": ratio within the band", ok,
                               fmt("ratio in [%.4g, %.4g], band %.3g", lo, hi, c.walk.band)});
           });
}

}  // namespace

RunResult execute(const ExperimentConfig& c) {
  validate(c);
  RunResult r;
  std::optional<ContourCache> cache;
  if (auto dir = ContourCache::resolve_dir(c.cache)) cache.emplace(*dir);
  Context x{c, r, cache ? &*cache : nullptr};
  const std::string& op = c.op;
  if (op == "twopoint") op_twopoint(x);
  else if (op == "ratio") op_ratio(x);
  else if (op == "pinning-demo") op_pinning_demo(x);
  else if (op == "surface-tension") op_surface_tension(x);
  else if (op == "tilt") op_tilt(x);
  else if (op == "massgap") op_massgap(x);
  else if (op == "wulff") op_wulff(x);
  else if (op == "green") op_green(x);
  else if (op == "alili-doney") op_alili_doney(x);
  else if (op == "ladder") op_ladder(x);
  else if (op == "decomp") op_decomp(x);
  else if (op == "rho") op_rho(x);
  else op_local_limit(x);
  if (r.partial)
    r.assertions.push_back({"every grid point completed within the enumeration budget", false,
                            "rows with status budget_exceeded carry nan values"});
  if (cache) r.cache = cache->stats();
  return r;
}

bool RunManifest::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

RunManifest run(const ExperimentConfig& c) {
  RunManifest m;
  m.experiment = c.experiment;
  m.op = c.op;
  m.config_hash = hex64(config_hash(c));
  m.code_version = kCodeVersion;
  m.started = utc_now();
  auto result = execute(c);
  m.finished = utc_now();
  m.assertions = result.assertions;
  m.provenance = result.provenance;
  m.partial = result.partial;
  m.cache = result.cache;
  m.directory = c.out / c.experiment;
  std::error_code ec;
  std::filesystem::create_directories(m.directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + m.directory.string() + ": " + ec.message());
  auto write = [&](const std::string& file, const std::string& text) {
    std::ofstream out(m.directory / file, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (m.directory / file).string());
  };
  for (const auto& t : result.tables) {
    std::string text = format_csv(t);
    std::string file = t.name + ".csv";
    write(file, text);
    m.payloads.push_back(
        {file, t.rows.size(), hex64(fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()))});
  }
  write("manifest.json", manifest_json(m));
  return m;
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["experiment"] = m.experiment;
  j["op"] = m.op;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["started"] = m.started;
  j["finished"] = m.finished;
  json payloads = json::array();
  for (const auto& p : m.payloads) payloads.push_back({{"file", p.file}, {"rows", p.rows}, {"fnv1a64", p.fnv1a64}});
  j["payloads"] = payloads;
  json asserts = json::array();
  for (const auto& a : m.assertions) asserts.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  j["assertions"] = asserts;
  j["provenance"] = m.provenance;
  j["partial"] = m.partial;
  j["cache"] = {{"hits", m.cache.hits}, {"misses", m.cache.misses}, {"corrupt", m.cache.corrupt}};
  j["passed"] = m.all_passed();
  return j.dump(2) + "\n";
}

}  // namespace polylab
