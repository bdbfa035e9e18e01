#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tuq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Parses arguments (without the program name) and runs one subcommand.
/// Returns 0 on success, 2 for usage or configuration errors and 3 when a
/// run fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tuq
