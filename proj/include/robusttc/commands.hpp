#pragma once

#include "robusttc/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace robusttc {

/// Options shared by every subcommand. Flags override config-file values,
/// which override defaults.
struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  std::optional<int> k;
  std::optional<Scalar> lambda;
  std::optional<Scalar> p1;
  std::optional<Scalar> p2;
  std::optional<Scalar> budget;
  std::optional<Scalar> threshold;
};

/// Emits a planted matrix instance (mode "matrix": X_star.csv, observed.csv,
/// ground_truth.csv) or a synthetic task suite (mode "tasks": tasks.jsonl,
/// targets.jsonl, ground_truth.csv) into the output directory.
void cmd_simulate(const CommonOptions& options);

/// Reads a partial-matrix CSV, runs the completion solver, writes X.csv,
/// E.csv, diagnostics.json.
void cmd_complete(const CommonOptions& options);

/// Full run over a task suite (generated or loaded): transfer matrix,
/// filtering, completion, clustering, encoder training, per-target few-shot
/// evaluation with plain, adaptive, single-metric, and single-task rows.
/// Persists all intermediate artifacts plus results.csv and summary.json.
void cmd_pipeline(const CommonOptions& options);

/// Runs the planted-recovery sweep and writes sweep.csv.
void cmd_sweep(const CommonOptions& options);

}  // namespace robusttc
