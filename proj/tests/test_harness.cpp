#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "polylab/error.hpp"
#include "polylab/harness.hpp"
#include "polylab/verify.hpp"

using namespace polylab;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error_path(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("polylab_harness_" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(Config, DefaultsAndGrids) {
  auto c = parse_config_text(R"({"op": "ratio", "L": [2, 3, 4], "beta": [3, 4.5], "points": [[1, 2]]})");
  EXPECT_EQ(c.op, "ratio");
  EXPECT_EQ(c.L, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(c.beta, (std::vector<double>{3.0, 4.5}));
  EXPECT_EQ(c.points.at(0), (LatticePoint{1, 2}));
  EXPECT_EQ(c.weight_mode, WeightMode::Positivized);
  EXPECT_EQ(c.walk.law, StepLawMode::Table);
  EXPECT_EQ(c.wall, WallDirection::horizontal());
}

TEST(Config, PinningDemoDefaultsToDirectWeights) {
  auto c = parse_config_text(
      R"({"op": "pinning-demo", "L": [3, 4], "M": [0, 10], "chi": 0.5, "allow_pinning_regime": true})");
  EXPECT_EQ(c.weight_mode, WeightMode::Direct);
}

TEST(Config, ErrorsCarryFieldPaths) {
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2, 3], "extra": 1})"), "extra");
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2, 3], "walk": {"samplez": 1}})"), "walk.samplez");
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2, 3.5]})"), "L[1]");
  EXPECT_EQ(config_error_path(R"({"op": "twopoint", "points": [[1]]})"), "points[0]");
  EXPECT_EQ(config_error_path(R"({"op": "nonsense"})"), "op");
  EXPECT_EQ(config_error_path(R"({"L": [2, 3]})"), "op");
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2, 3], "chi": 0.4})"), "chi");
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2]})"), "L");
  EXPECT_EQ(config_error_path(R"({"op": "tilt", "epsilon": [1.5]})"), "epsilon");
  EXPECT_EQ(config_error_path(R"({"op": "tilt", "walk": {"law": "fancy"}})"), "walk.law");
  EXPECT_EQ(config_error_path(R"({"op": "ratio", "L": [2, 3], "wall": [0, 0]})"), "wall");
  EXPECT_EQ(config_error_path("{not json"), "<root>");
  EXPECT_EQ(config_error_path(R"({"op": "pinning-demo", "L": [2, 3], "M": [1], "chi": 0.5})"), "chi");
}

TEST(Config, SubcommandSuppliesOrMatchesOp) {
  EXPECT_EQ(parse_config_text(R"({"epsilon": [0]})", "tilt").op, "tilt");
  EXPECT_THROW(parse_config_text(R"({"op": "rho"})", "tilt"), ConfigError);
}

TEST(Config, HashIgnoresExecutionKnobs) {
  auto a = parse_config_text(R"({"op": "tilt", "threads": 1, "out": "a"})");
  auto b = parse_config_text(R"({"op": "tilt", "threads": 4, "out": "b", "cache": "/tmp/x"})");
  auto c = parse_config_text(R"({"op": "tilt", "beta": [5]})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(canonical_config(a), canonical_config(parse_config_text(canonical_config(a))));
}

TEST(Csv, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17}) {
    std::string s = format_number(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(3.0), "3");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, HeaderRowsAndQuoting) {
  Table t{"t", {"a", "b", "c"}, {}};
  t.add({std::int64_t{-3}, 0.25, std::string("x,y")});
  t.add({std::int64_t{7}, 1e-5, std::string("say \"hi\"")});
  EXPECT_EQ(format_csv(t), "a,b,c\n-3,0.25,\"x,y\"\n7,1e-05,\"say \"\"hi\"\"\"\n");
  EXPECT_THROW(t.add({0.0}), Error);
}

TEST(Run, ZeroPotentialRatioRowsVanish) {
  auto c = parse_config_text(R"({"op": "ratio", "L": [2, 3, 4], "beta": [3, 4]})");
  auto r = execute(c);
  ASSERT_EQ(r.tables.size(), 2u);
  const auto& rows = r.tables[0];
  ASSERT_EQ(rows.rows.size(), 6u);
  auto col = std::find(rows.columns.begin(), rows.columns.end(), "log_ratio") - rows.columns.begin();
  for (const auto& row : rows.rows) EXPECT_EQ(std::get<double>(row[col]), 0.0);
  ASSERT_EQ(r.assertions.size(), 2u);
  EXPECT_TRUE(r.assertions[0].pass);
  EXPECT_FALSE(r.partial);
}

TEST(Run, IdenticalConfigGivesIdenticalPayloads) {
  auto dir = scratch_dir("determinism");
  const char* text = R"({"experiment": "det", "op": "pinning-demo", "L": [3, 4, 5], "M": [0, 4], "beta": [3],
                         "chi": 0.5, "allow_pinning_regime": true, "out": "OUT"})";
  auto c = parse_config_text(text);
  c.out = dir / "one";
  auto m1 = run(c);
  c.out = dir / "two";
  c.threads = 3;
  auto m2 = run(c);
  ASSERT_EQ(m1.payloads.size(), m2.payloads.size());
  for (std::size_t i = 0; i < m1.payloads.size(); ++i) {
    EXPECT_EQ(m1.payloads[i].fnv1a64, m2.payloads[i].fnv1a64);
    EXPECT_EQ(read_file(m1.directory / m1.payloads[i].file), read_file(m2.directory / m2.payloads[i].file));
  }
  EXPECT_EQ(m1.config_hash, m2.config_hash);
  EXPECT_TRUE(std::filesystem::exists(m1.directory / "manifest.json"));
  EXPECT_EQ(m1.exit_code(), 0);
  std::filesystem::remove_all(dir);
}

TEST(Run, PayloadHashMatchesFile) {
  auto dir = scratch_dir("hash");
  auto c = parse_config_text(R"({"experiment": "h", "op": "decomp", "beta": [4], "epsilon": [0, 0.2]})");
  c.out = dir;
  auto m = run(c);
  for (const auto& p : m.payloads) {
    auto text = read_file(m.directory / p.file);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
    EXPECT_EQ(p.fnv1a64, buf) << p.file;
  }
  auto manifest = read_file(m.directory / "manifest.json");
  EXPECT_NE(manifest.find(m.config_hash), std::string::npos);
  EXPECT_NE(manifest.find(kCodeVersion), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Run, CacheIsTransparent) {
  auto dir = scratch_dir("cache");
  auto c = parse_config_text(R"({"op": "twopoint", "points": [[3, 0], [2, 1]], "beta": [4]})");
  auto plain = execute(c);
  c.cache = dir;
  auto first = execute(c);
  auto second = execute(c);
  EXPECT_EQ(format_csv(plain.tables[0]), format_csv(first.tables[0]));
  EXPECT_EQ(format_csv(plain.tables[0]), format_csv(second.tables[0]));
  EXPECT_GT(second.cache.hits, 0u);
  EXPECT_EQ(second.cache.misses, 0u);
  std::filesystem::remove_all(dir);
}

TEST(Run, BudgetExhaustionIsFlagged) {
  auto c = parse_config_text(R"({"op": "twopoint", "points": [[2, 0], [8, 2]], "enumeration": {"budget": 2000}})");
  auto r = execute(c);
  EXPECT_TRUE(r.partial);
  const auto& t = r.tables[0];
  EXPECT_EQ(std::get<std::string>(t.rows.front().back()), "ok");
  EXPECT_EQ(std::get<std::string>(t.rows.back().back()), "budget_exceeded");
  EXPECT_TRUE(std::isnan(std::get<double>(t.rows.back()[4])));
  EXPECT_FALSE(r.assertions.back().pass);
}

TEST(Run, PinningAssertionsFollowTheSlope) {
  auto c = parse_config_text(R"({"op": "pinning-demo", "L": [4, 5, 6], "M": [0, 10], "beta": [3], "chi": 0.5,
                                 "allow_pinning_regime": true})");
  auto r = execute(c);
  ASSERT_EQ(r.assertions.size(), 2u);
  for (const auto& a : r.assertions) EXPECT_TRUE(a.pass) << a.name << ": " << a.detail;
}

TEST(Run, EffectiveWalkOpsPass) {
  for (const char* text : {R"({"op": "alili-doney", "beta": [3], "points": [[3, 1], [-2, 2]], "walk": {"law": "basic"}})",
                           R"({"op": "rho", "beta": [5], "walk": {"window": 10}})",
                           R"({"op": "local-limit", "beta": [4], "directions": [[1, 0]], "walk": {"reach": 12}})",
                           R"({"op": "tilt", "beta": [4], "directions": [[1, 0], [1, 1]]})"}) {
    auto r = execute(parse_config_text(text));
    ASSERT_FALSE(r.assertions.empty()) << text;
    for (const auto& a : r.assertions) EXPECT_TRUE(a.pass) << a.name << ": " << a.detail;
  }
}

TEST(Run, GridRowsInGridOrder) {
  auto c = parse_config_text(R"({"op": "tilt", "beta": [3, 4], "epsilon": [0.2, 0, 0.05], "threads": 3})");
  auto r = execute(c);
  const auto& t = r.tables[0];
  ASSERT_EQ(t.rows.size(), 6u);
  std::vector<double> eps;
  for (const auto& row : t.rows) eps.push_back(std::get<double>(row[1]));
  EXPECT_EQ(eps, (std::vector<double>{0.2, 0, 0.05, 0.2, 0, 0.05}));
}

TEST(Verify, FastSuitePasses) {
  VerifyOptions o;
  auto results = verify_suite(VerifyLevel::Fast, o);
  EXPECT_EQ(results.size(), 10u);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << format_check_line(r);
}

TEST(Verify, LevelParsingAndCriterionRange) {
  EXPECT_EQ(parse_verify_level("fast"), VerifyLevel::Fast);
  EXPECT_EQ(parse_verify_level("full"), VerifyLevel::Full);
  EXPECT_THROW(parse_verify_level("medium"), Error);
  EXPECT_THROW(run_acceptance_criterion(0, {}), Error);
  EXPECT_THROW(run_acceptance_criterion(12, {}), Error);
  CheckResult r{"A1", "title", true, "detail", 1.25};
  EXPECT_EQ(format_check_line(r), "PASS A1   title (1.2s): detail");
}
