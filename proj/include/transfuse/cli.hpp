#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transfuse {

// `args` excludes the program name. Returns 0 on success, 1 for invalid
// input or usage errors, 2 for runtime failures.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transfuse
