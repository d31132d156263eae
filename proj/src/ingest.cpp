#include "tdex/ingest.hpp"

#include <cmath>
#include <string>

#include "tdex/error.hpp"

namespace tdex {

namespace {

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double step_displacement(const RobotState& from, const RobotState& to) {
    double d = distance(from.ee_pos, to.ee_pos);
    for (std::size_t k = 0; k < kNumFingers; ++k) d += distance(from.fingertips[k], to.fingertips[k]);
    return d;
}

std::vector<std::size_t> motion_subsample(const Trajectory& traj, const SubsampleConfig& cfg) {
    if (traj.empty()) throw DataError("cannot subsample an empty trajectory");
    if (!(cfg.threshold >= 0.0)) throw UsageError("subsample threshold must be >= 0");
    std::vector<std::size_t> kept;
    if (cfg.include_first) kept.push_back(0);
    double accumulated = 0.0;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        accumulated += step_displacement(traj.frames[i - 1].state, traj.frames[i].state);
        if (accumulated > cfg.threshold) {
            kept.push_back(i);
            accumulated = 0.0;
        }
    }
    return kept;
}

Trajectory select_frames(const Trajectory& traj, std::span<const std::size_t> indices) {
    Trajectory out;
    out.frames.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= traj.size()) throw InvariantError("frame index out of range: " + std::to_string(i));
        out.frames.push_back(traj.frames[i]);
    }
    return out;
}

DatasetStats dataset_stats(std::span<const Trajectory> trajs, const SubsampleConfig& cfg) {
    DatasetStats s;
    for (const auto& traj : trajs) {
        if (traj.empty()) continue;
        ++s.trajectories;
        s.frames_before += traj.size();
        s.frames_after += motion_subsample(traj, cfg).size();
        s.duration_s += traj.frames.back().t - traj.frames.front().t;
    }
    s.effective_rate_hz = s.duration_s > 0.0 ? static_cast<double>(s.frames_after) / s.duration_s : 0.0;
    return s;
}

}  // namespace tdex
