#pragma once

namespace ptag {

/// Entry point for the ptag command-line tool. Returns the process exit
/// code: 0 on success, nonzero on any validation or I/O error.
int run_cli(int argc, char** argv);

}  // namespace ptag
