#pragma once

#include "robusttc/completion.hpp"
#include "robusttc/task.hpp"
#include "robusttc/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace robusttc {

/// Square-matrix CSV: one row per matrix row, comma-separated fields,
/// unobserved entries written as the literal token NA. Writers emit a
/// header row (c0,c1,...); the readers accept files with or without it.
void write_partial_matrix_csv(const std::filesystem::path& path, const PartialMatrix& m);
PartialMatrix read_partial_matrix_csv(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Partition CSV with columns task_id,cluster_id.
void write_partition_csv(const std::filesystem::path& path, const Partition& p,
                         const std::vector<std::string>& ids);
Partition read_partition_csv(const std::filesystem::path& path,
                             std::vector<std::string>* ids = nullptr);

/// Solver diagnostics record {residual, iterations, converged, objective}.
void write_diagnostics_json(const std::filesystem::path& path, const CompletionResult& r);

/// Task instances as JSONL, one record per example:
/// {"task_id": ..., "split": "train"|"valid"|"test", "label": ..., "features": [...]}.
/// Tasks are returned in order of first appearance.
void write_tasks_jsonl(const std::filesystem::path& path, const std::vector<Task>& tasks);
std::vector<Task> read_tasks_jsonl(const std::filesystem::path& path);

/// Shortest round-trip decimal form, used by every CSV writer so reruns
/// are byte-identical.
std::string format_scalar(Scalar v);

}  // namespace robusttc
