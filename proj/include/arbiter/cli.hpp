#pragma once

#include <iosfwd>

namespace arbiter {

// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace arbiter
