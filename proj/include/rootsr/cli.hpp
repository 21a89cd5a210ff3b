#pragma once

namespace rootsr::cli {

/// Parses argv and runs one subcommand (gen-data, make-burst, align, train,
/// enhance, baseline, eval, analyze). Returns the process exit code:
/// 0 success, 2 usage error, 3 config validation failure, 1 anything else.
int run(int argc, const char* const* argv);

}  // namespace rootsr::cli
