#pragma once

#include <iosfwd>

namespace plume::cli {

// Exit codes beyond 0 (success) and CLI11's own usage codes.
inline constexpr int kExitValidation = 2;
inline constexpr int kExitFit = 3;
inline constexpr int kExitIo = 4;

// Entry point of the `plume` command; output goes to `out`, messages to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace plume::cli
