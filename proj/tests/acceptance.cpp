#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "polylab/verify.hpp"

int main(int argc, char** argv) {
  polylab::VerifyOptions o;
  if (const char* t = std::getenv("POLYLAB_THREADS")) o.threads = std::max(1, std::atoi(t));
  int first = 1, last = polylab::kAcceptanceCriteria;
  if (argc > 1) first = last = std::atoi(argv[1]);
  int failures = 0;
  for (int id = first; id <= last; ++id) {
    auto r = polylab::run_acceptance_criterion(id, o);
    std::printf("%s\n", polylab::format_check_line(r).c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  std::printf("%d/%d criteria passed\n", last - first + 1 - failures, last - first + 1);
  return failures == 0 ? 0 : 1;
}
