#pragma once

#include <iosfwd>

namespace lpass::cli {

/// Entry point shared by the `lpass` executable and the integration tests.
/// Returns the process exit status; diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lpass::cli
