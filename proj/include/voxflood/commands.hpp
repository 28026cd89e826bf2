#pragma once

#include <exception>
#include <iosfwd>
#include <string>

#include "voxflood/config.hpp"

namespace voxflood {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitData = 4;

// Maps a thrown exception onto the CLI exit code contract.
int exit_code_for(const std::exception& e);

// Each command reports progress on `out` and throws on failure.
void cmd_generate(const RunConfig& cfg, std::ostream& out);
void cmd_segment(const RunConfig& cfg, std::ostream& out);
void cmd_evaluate(const RunConfig& cfg, std::ostream& out);
void cmd_prepare_training(const RunConfig& cfg, std::ostream& out);
void cmd_export_slices(const RunConfig& cfg, std::ostream& out);

// Runs the named command, printing errors to `err`; returns the exit code.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace voxflood
