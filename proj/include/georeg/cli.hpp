#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace georeg {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

std::string_view tool_version();

// Hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

// Runs the command line `args` (args[0] is the program name). Regular output
// goes to `out`; usage messages and the JSON error object to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace georeg
