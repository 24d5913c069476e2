#ifndef SCMFUSE_CLI_HPP
#define SCMFUSE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace scmfuse {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_incompatible = 2,
    exit_io = 3,
    exit_validation = 4,
    exit_internal = 5,
};

/// Runs the tool on `args` (args[0] is the program name). Reports go to files
/// or `out`; errors are written to `err` as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scmfuse

#endif  // SCMFUSE_CLI_HPP
