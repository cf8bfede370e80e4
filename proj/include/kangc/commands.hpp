#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kangc/config.hpp"

namespace kangc {

inline constexpr const char* kVersion = "0.1.0";

/// All commands throw std::invalid_argument for usage/config problems and
/// std::runtime_error for runtime/numeric failures; the CLI maps these to
/// exit codes 1 and 2.

/// Writes panel_###.csv (one per replicate), truth.csv, VAR coefficient
/// matrices A_#.csv, and manifest.json into cfg.out_dir.
void cmd_generate(const RunConfig& cfg);

/// Runs inference and writes G_###.csv, G_reversed_###.csv, G_fused_###.csv
/// (reversed/fused only when fusion is enabled), lag_profile_###.csv, and
/// manifest.json. On abort every partially written output is removed.
void cmd_infer(const RunConfig& cfg);

/// Scores GC matrix files against a truth file; prints one AUROC per file
/// plus a "mean +/- std" summary line, and writes eval.json when out_dir is
/// nonempty.
void cmd_eval(const std::vector<std::filesystem::path>& gc_files,
              const std::filesystem::path& truth_file, const EvalSpec& spec,
              const std::filesystem::path& out_dir);

/// Aggregates manifest.json files found under run_dir (recursively) into a
/// plain-text table, printed and written to report.md in run_dir.
void cmd_report(const std::filesystem::path& run_dir);

}  // namespace kangc
