#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace radcam {

/// Entry point behind the `radcam` executable. `args` holds the full command line,
/// program name first. Returns 0 on success, 1 on a pipeline error and 2 on I/O,
/// schema or usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radcam
