#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gvk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. Results go to `out`, the resolved config and
/// diagnostics to `err`. Returns 0, 1 (usage error) or 2 (data error).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gvk::cli
