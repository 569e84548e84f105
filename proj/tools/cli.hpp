#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bevcv::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

// Runs one command line (args excludes the program name). Normal output goes
// to `out`, diagnostics to `err`. Returns 0 on success, 1 for bad arguments
// or invalid values, 2 for unreadable or unwritable files.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Version banner: artifact version, binary format versions and the
// effective default configuration.
std::string version_text();
std::string version_json();

}  // namespace bevcv::cli
