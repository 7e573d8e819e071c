#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace polylab {

struct CheckResult {
  std::string id;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  int threads = 1;
  std::optional<std::filesystem::path> cache_dir;
};

constexpr int kAcceptanceCriteria = 11;

// Acceptance criterion 1..11 at the tolerances of the acceptance table.
CheckResult run_acceptance_criterion(int id, const VerifyOptions& o);

enum class VerifyLevel { Fast, Full };
VerifyLevel parse_verify_level(const std::string& s);

// Fast: oracle equivalences and invariant audits at small sizes. Full: fast plus every acceptance criterion.
std::vector<CheckResult> verify_suite(VerifyLevel level, const VerifyOptions& o,
                                      const std::function<void(const CheckResult&)>& on_result = {});

std::string format_check_line(const CheckResult& r);

}  // namespace polylab
