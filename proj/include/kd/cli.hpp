#pragma once

#include <string>
#include <vector>

namespace kd {

// Entry point behind the kdcli binary; also callable in-process from tests.
// args excludes the program name. Returns the process exit status:
// 0 success, 1 runtime/I-O failure, 2 usage or config error, 3 data error.
int cli_dispatch(const std::vector<std::string>& args);

} // namespace kd
