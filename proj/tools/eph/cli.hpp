#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eph::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // I/O or runtime failure
inline constexpr int kUsage = 2;    // bad arguments or configuration

/// Runs one `eph` command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "a..b" (inclusive) into the list of seeds.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

}  // namespace eph::cli
