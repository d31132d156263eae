#pragma once

// Representation / modality ablations and the play-data sweep on ContactWorld.
//
// Every BYOL-dependent variant is trained `replicates` times with derived
// seeds and its success counts are pooled; deterministic variants run once.
// All policies are evaluated on the same initial-state list.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdex/config.hpp"
#include "tdex/core.hpp"

namespace tdex {

/// Names accepted in RunConfig::variants, in canonical order.
const std::vector<std::string>& ablation_variants();

struct AblateInputs {
    std::vector<Trajectory> play;
    std::vector<Trajectory> demos;
};

/// Reads cfg.play_dir and cfg.demo_dir; missing data is a DataError naming
/// the stage that should have produced it.
AblateInputs load_ablate_inputs(const RunConfig& cfg);

struct VariantResult {
    std::string kind;  // "grid" or "sweep"
    std::string variant;
    double play_fraction = 1.0;  // 0 means the encoder saw task data only
    std::size_t replicates = 0;
    std::size_t episodes = 0;  // pooled over replicates
    std::size_t successes = 0;
    double success_rate() const { return episodes ? double(successes) / double(episodes) : 0.0; }
};

struct EpisodeRow {
    std::string kind;
    std::string variant;
    double play_fraction = 1.0;
    std::size_t replicate = 0;
    std::size_t episode = 0;
    std::uint64_t seed = 0;
    bool success = false;
    std::size_t steps = 0;
};

struct TraceRow {
    std::string kind;
    std::string variant;
    double play_fraction = 1.0;
    std::size_t replicate = 0;
    std::size_t episode = 0;
    std::size_t step = 0;
    std::size_t neighbor = 0;
    double distance = 0.0;
};

struct LossRow {
    std::string encoder;
    std::size_t replicate = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
};

struct AblateReport {
    std::vector<VariantResult> results;
    std::vector<EpisodeRow> episodes;
    std::vector<TraceRow> traces;
    std::vector<LossRow> losses;

    /// First result with this kind, variant and fraction; throws InvariantError if absent.
    const VariantResult& find(std::string_view kind, std::string_view variant, double play_fraction = 1.0) const;
};

/// Throws UsageError for unknown variants or an unusable config.
AblateReport run_ablate(const RunConfig& cfg, const AblateInputs& inputs, std::ostream* log = nullptr);

/// results.tsv, episodes.tsv, traces.tsv and losses.tsv.
void write_ablate_report(const std::filesystem::path& dir, const AblateReport& report);

}  // namespace tdex
