#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ramp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNoConvergence = 3;

// Entry point of the ramp command line; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ramp
