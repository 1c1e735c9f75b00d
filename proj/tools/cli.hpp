#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lgpc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Runs `lgpc <command> [options]`; args excludes the program name.
/// Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lgpc::cli
