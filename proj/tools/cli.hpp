#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mirror/config.hpp"
#include "mirror/dataset.hpp"
#include "mirror/sweep.hpp"

namespace mirror::cli {

enum class ExitCode : int { ok = 0, config_error = 2, runtime_failure = 3 };

struct SynthArgs {
  std::filesystem::path out;
  SynthOptions options;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
};

struct InferArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path a;
  std::filesystem::path b;
  std::filesystem::path out_prefix;
  bool preprocessed = false;
};

struct SweepArgs {
  std::string grid = "table2";
  SweepGrid cells;
  std::filesystem::path out;
  bool dry_run = false;
};

struct ReportArgs {
  std::filesystem::path sweep;
  std::filesystem::path out;
  double epsilon = 0.005;
};

/// Subcommand plus its fully resolved configuration (file values, then
/// --key=value overrides, validated).
struct ParsedCommand {
  std::string command;
  TrainConfig config;
  SynthArgs synth;
  EvalArgs eval;
  InferArgs infer;
  SweepArgs sweep;
  ReportArgs report;
  /// Set when --help was requested; holds the help text.
  std::optional<std::string> help;
};

/// Throws ConfigError on unknown flags, unknown keys, type mismatches and
/// missing required paths.
ParsedCommand parse_cli(const std::vector<std::string>& args);

/// Parses and executes; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mirror::cli
