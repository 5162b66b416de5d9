#pragma once

#include <string>
#include <vector>

namespace quweit {

/// Entry point behind the `quweit` binary; argv without the program name.
/// Exit status: 0 success, 1 domain error (divergence, mismatch, corrupt
/// file), 2 usage error.
int cli_run(const std::vector<std::string>& args);

}  // namespace quweit
