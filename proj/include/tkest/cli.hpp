#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

namespace tkest::cli {

constexpr std::uint64_t default_seed = 0x5eed;

/// Exit codes: 0 success, 1 usage error, 2 data or format error.
int run(std::span<std::string const> args, std::istream& in, std::ostream& out, std::ostream& err);
int run(int argc, char const* const* argv);

}  // namespace tkest::cli
