#pragma once

#include <iosfwd>
#include <span>

namespace mtnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `mtnet` command-line tool. Results go to `out`,
/// diagnostics to `err`. Returns 0 on success, 1 on a usage error and 2 on a
/// data or numeric error.
int run_cli(std::span<char*> argv, std::ostream& out, std::ostream& err);

}  // namespace mtnet
