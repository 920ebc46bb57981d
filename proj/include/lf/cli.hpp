#pragma once

#include <iosfwd>

namespace lf::cli {

/// Entry point of the `lforest` tool. Returns the process exit code; nothing
/// is written to disk unless every input validated and the run finished.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lf::cli
