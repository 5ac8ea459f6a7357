#pragma once

#include <ostream>

namespace caed {

/// Entry point for the caed command line. Returns 0 on success, 1 on runtime
/// failure and 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace caed
