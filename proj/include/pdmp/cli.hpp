#pragma once

#include <ostream>

namespace pdmp {

/// Entry point of the command-line tool; returns the process exit code.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace pdmp
