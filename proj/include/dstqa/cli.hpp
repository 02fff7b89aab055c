#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dstqa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `dstqa` command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace dstqa
