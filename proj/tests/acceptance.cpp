// Runs every acceptance criterion, one PASS/FAIL line each.
#include <filesystem>
#include <iostream>

#include "fairenc/check/criteria.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path scratch =
      argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::temp_directory_path() / "fairenc_acceptance";
  const auto results = fairenc::check::run_suite(true, scratch, &std::cout);
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
