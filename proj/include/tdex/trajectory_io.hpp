#pragma once

// JSON-lines trajectory files: one frame per line with fields `t`, `tactile`
// (15x4x4x3 nested arrays), `ee_pos`, `ee_quat`, `joints`, `fingertips` (4x3),
// optional `visual_feature` and optional `action` (23 numbers,
// ee_pos|ee_quat|joints).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdex/core.hpp"

namespace tdex {

Trajectory read_trajectory(std::istream& in);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const Trajectory& traj);
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);

/// Sorted list of `*.jsonl` files in `dir`. Throws DataError if `dir` is missing.
std::vector<std::filesystem::path> list_trajectory_files(const std::filesystem::path& dir);

std::vector<Trajectory> read_trajectory_dir(const std::filesystem::path& dir);

/// Writes traj_000.jsonl, traj_001.jsonl, ... into `dir` (created if needed).
void write_trajectory_dir(const std::filesystem::path& dir, const std::vector<Trajectory>& trajs);

}  // namespace tdex
