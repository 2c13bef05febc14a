#pragma once

#include "cascade_cli/builtins.hpp"
#include "cascade_cli/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace cascade::cli {

enum class Command { Simulate, Equilibria, Chainrec, Basin, Certify, ListExamples };

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInconclusive = 2;
inline constexpr int kExitUsage = 3;

[[nodiscard]] std::optional<Command> command_from_string(std::string_view name);
[[nodiscard]] std::string to_string(Command cmd);

/// Built-in by name or an inline definition; applies certificate overrides
/// from the certify block. Throws ConfigError or InputError.
[[nodiscard]] Problem resolve_problem(const RunConfig& cfg);

/// Writes `content` to a sibling temporary file and renames it into place.
/// Throws ResourceError on I/O failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Runs one command with the config's output directory; returns the exit
/// status (0 PASS/success, 1 FAIL, 2 INCONCLUSIVE, 3 usage/config/I/O error).
/// Progress goes to `log`, diagnostics to `err`.
[[nodiscard]] int run_command(const RunConfig& cfg, Command cmd, std::ostream& log, std::ostream& err);

/// Full command line: `cascade <command> [system] [options]`.
[[nodiscard]] int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cascade::cli
