#pragma once

// Flat `key = value` run configuration shared by every CLI stage. Lines
// starting with '#' are comments; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tdex {

struct RunConfig {
    std::uint64_t seed = 0;
    std::string task = "grasp";

    // paths
    std::string play_dir = "data/play";
    std::string demo_dir = "data/demos";
    std::string out_dir = "runs/ablate";

    // data generation and subsampling
    double play_minutes = 10.0;
    std::size_t demos = 6;
    double play_threshold = 0.01;
    double demo_threshold = 0.02;

    // representation learning
    std::string arch = "tdex3";
    std::string variant = "tdex_image_cnn";
    std::size_t epochs = 20;
    std::size_t batch = 64;
    std::size_t pca_k = 100;
    std::size_t bc_epochs = 200;

    // retrieval; unset values come from the task preset
    std::optional<double> weight_visual;
    std::optional<double> weight_tactile;
    std::optional<std::size_t> reject_k;

    // ablation
    std::vector<std::string> variants = {"tdex", "stacked", "shared", "raw", "pca", "sum_pooled",
                                         "shuffled", "torque", "image-only", "tactile-only",
                                         "task-data-only", "BC"};
    std::vector<double> play_fractions = {0.0, 0.125, 0.25, 0.5, 1.0};
    std::size_t episodes = 200;
    std::size_t replicates = 3;
    std::size_t trace_episodes = 5;

    bool operator==(const RunConfig&) const = default;
};

/// Throws UsageError on unknown keys, malformed lines or bad values.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key as if it appeared in a config file.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// TDEX_SEED, when set, replaces the seed.
void apply_env_overrides(RunConfig& cfg);

/// Fills unset retrieval values from the task preset.
RunConfig resolved(RunConfig cfg);

/// Canonical text form; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);

/// Writes `run_config.txt` into `dir`.
void write_snapshot(const std::filesystem::path& dir, const RunConfig& cfg);

}  // namespace tdex
