// One line per acceptance criterion; nonzero exit when any fails.
#include <cstdio>

#include "bsbloch/acceptance.hpp"

int main() {
  int failed = 0;
  for (const auto& r : bsbloch::run_acceptance()) {
    std::printf("%s\n", bsbloch::format_result(r).c_str());
    failed += r.passed ? 0 : 1;
  }
  std::printf("%d of 8 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
