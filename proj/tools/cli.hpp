#pragma once

#include <iosfwd>

namespace fairenc::cli {

// Subcommands: gen-data, train, eval, report, selfcheck.
// Exit codes: 0 success, 1 runtime error or failed check, 2 usage error,
// 3 training aborted on a non-finite loss.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fairenc::cli
