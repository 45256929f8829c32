// Command-line front end. Exit codes: 0 success, 1 verification mismatch,
// 2 invalid input or arguments, 3 solver limit reached.
#pragma once

#include <string>

#include "momenta/io.hpp"

namespace momenta::cli {

int run(int argc, const char* const* argv);

/// CSV summary (one row per sweep point: mean/median/max per metric)
/// recomputed from the per-trial records of a results document.
std::string summary_csv(const io::json& results);

/// Parses "a,b,c" or "lo:hi:n" (n equal intervals, n + 1 levels).
std::vector<double> parse_levels(const std::string& text);

}  // namespace momenta::cli
