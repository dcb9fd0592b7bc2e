// Acceptance suite: runs the numbered verification criteria and prints one
// pass/fail line per criterion. Exit code is the number of failures.

#include <cstring>
#include <iostream>
#include <string>

#include "sep/verify.hpp"

int main(int argc, char** argv) {
  int only = 0;
  sep::verify::Options opts;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--criterion") only = std::stoi(next());
    else if (arg == "--seed") opts.seed = std::stoull(next());
    else if (arg == "--jobs") opts.jobs = std::stoi(next());
    else {
      std::cerr << "unknown argument " << arg << "\n";
      return 2;
    }
  }

  int failures = 0;
  const int total = sep::verify::criterion_count();
  for (int id = 1; id <= total; ++id) {
    if (only != 0 && id != only) continue;
    sep::verify::CheckResult r = sep::verify::run_criterion(id, opts);
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << id << "/" << total << " "
              << r.name << " (" << r.seconds << "s)\n";
    for (const auto& line : r.lines) std::cout << "       " << line << "\n";
    if (!r.pass) ++failures;
  }
  return failures;
}
