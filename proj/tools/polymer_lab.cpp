#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "polylab/error.hpp"
#include "polylab/harness.hpp"
#include "polylab/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kAssertionFailure = 1;
constexpr int kUsageError = 2;

struct Common {
  std::string config;
  std::string out;
  int threads = 0;
  std::string cache;
};

int run_experiment(const std::string& op, const Common& o) {
  auto c = polylab::load_config(o.config, op == "run" ? "" : op);
  if (!o.out.empty()) c.out = o.out;
  if (o.threads > 0) c.threads = o.threads;
  if (!o.cache.empty()) c.cache = o.cache;
  auto m = polylab::run(c);
  std::printf("%s %s -> %s (config %s)\n", m.experiment.c_str(), m.op.c_str(), m.directory.string().c_str(),
              m.config_hash.c_str());
  for (const auto& p : m.payloads) std::printf("  %s: %zu rows, fnv1a64 %s\n", p.file.c_str(), p.rows, p.fnv1a64.c_str());
  for (const auto& a : m.assertions)
    std::printf("%s %s: %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), a.detail.c_str());
  if (m.partial) std::printf("partial results: some grid points exceeded the enumeration budget\n");
  return m.exit_code();
}

int run_verify(const std::string& level, const Common& o) {
  polylab::VerifyOptions v;
  v.threads = o.threads > 0 ? o.threads : 1;
  if (!o.cache.empty()) v.cache_dir = o.cache;
  auto results = polylab::verify_suite(polylab::parse_verify_level(level), v, [](const polylab::CheckResult& r) {
    std::printf("%s\n", polylab::format_check_line(r).c_str());
    std::fflush(stdout);
  });
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::printf("%zu/%zu checks passed\n", results.size() - failed, results.size());
  return failed == 0 ? kOk : kAssertionFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contour ensembles, renewal structure and effective walks near a wall"};
  app.require_subcommand(1);
  Common o;
  std::string level = "fast";

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", o.config, "experiment config (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output root directory");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--cache", o.cache, "contour cache directory");
  };

  std::vector<std::pair<std::string, CLI::App*>> experiments;
  experiments.emplace_back("run", app.add_subcommand("run", "run the op named in the config"));
  for (const auto& op : polylab::known_ops())
    experiments.emplace_back(op, app.add_subcommand(op, "run the " + op + " op"));
  for (auto& [name, sub] : experiments) add_common(sub, true);

  auto* verify = app.add_subcommand("verify", "oracle checks (fast) or oracle checks plus acceptance criteria (full)");
  add_common(verify, false);
  verify->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (verify->parsed()) return run_verify(level, o);
    for (auto& [name, sub] : experiments)
      if (sub->parsed()) return run_experiment(name, o);
  } catch (const polylab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsageError;
  } catch (const polylab::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", polylab::error_code_name(e.code()), e.what());
    return kAssertionFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kAssertionFailure;
  }
  return kUsageError;
}
