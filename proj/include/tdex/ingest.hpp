#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tdex/core.hpp"

namespace tdex {

struct SubsampleConfig {
    double threshold = 0.01;  // meters of accumulated fingertip + end-effector motion
    bool include_first = true;
};

/// Euclidean displacement of the 4 fingertips plus the end effector between two states.
double step_displacement(const RobotState& from, const RobotState& to);

/// Retains a frame once the displacement accumulated since the last retained
/// frame strictly exceeds the threshold; the accumulator then resets. Frame 0
/// anchors the accumulation and is emitted when `include_first` is set.
std::vector<std::size_t> motion_subsample(const Trajectory& traj, const SubsampleConfig& cfg);

Trajectory select_frames(const Trajectory& traj, std::span<const std::size_t> indices);

struct DatasetStats {
    std::size_t trajectories = 0;
    std::size_t frames_before = 0;
    std::size_t frames_after = 0;
    double duration_s = 0.0;
    double effective_rate_hz = 0.0;  // retained frames per second of recording
};

DatasetStats dataset_stats(std::span<const Trajectory> trajs, const SubsampleConfig& cfg);

}  // namespace tdex
