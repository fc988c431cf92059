#pragma once

// The `vdgpt` command line. Exit codes: 0 ok, 1 internal error, 2 validation
// or compile failure, 3 backend failure.

#include <iosfwd>
#include <string>
#include <vector>

#include "vdgpt/error.hpp"

namespace vdgpt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitBackend = 3;

int exit_code_for(ErrorCode code);

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vdgpt::cli
