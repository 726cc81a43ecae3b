// Runs the acceptance suite: one PASS/FAIL line per criterion.
// Usage: marginlab_acceptance [--only 3,4] [--workers N] [--out-dir DIR]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "marginlab/acceptance.hpp"

int main(int argc, char** argv) {
  marginlab::AcceptanceOptions opts;
  std::string out_dir;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      std::string item;
      while (std::getline(s, item, ',')) opts.only.push_back(std::stoi(item));
    } else if (a == "--workers" && i + 1 < argc) {
      opts.workers = std::atoi(argv[++i]);
    } else if (a == "--out-dir" && i + 1 < argc) {
      out_dir = argv[++i];
    } else {
      std::cerr << "unknown argument " << a << "\n";
      return 2;
    }
  }
  const marginlab::AcceptanceReport rep = marginlab::run_acceptance(opts);
  for (const auto& r : rep.results) std::cout << marginlab::format_result(r) << std::endl;
  std::cout << "record hash " << marginlab::hash_hex(rep.hash) << std::endl;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, text] : rep.csvs) std::ofstream(std::filesystem::path(out_dir) / name) << text;
  }
  const bool ok = rep.all_passed();
  std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return ok ? 0 : 1;
}
