// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Optional arguments select criteria by number.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "support/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const auto results = acceptance::run_all(only);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::printf("%zu/%zu acceptance criteria passed\n", passed, results.size());
  return passed == results.size() ? 0 : 1;
}
