#pragma once

// Non-parametric imitation: a database of (visual feature, tactile feature,
// action) rows, per-modality max-distance scaling, and nearest-neighbour
// retrieval with a reject buffer of recently executed rows.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdex/core.hpp"
#include "tdex/featurizer.hpp"
#include "tdex/ingest.hpp"

namespace tdex {

struct IndexRow {
    std::vector<double> visual;
    std::vector<double> tactile;
    Action action;
    std::string source;  // "<demo>:<frame>"
};

struct ModalityWeights {
    double visual = 1.0;
    double tactile = 1.0;
};

/// Largest Euclidean distance between any two of `points`; 0 for fewer than 2.
double max_pairwise_distance(std::span<const std::vector<double>> points);

class FeatureIndex {
public:
    /// Scales each modality so its maximum pairwise distance over the rows is 1
    /// (scale 1 when a modality has fewer than two distinct points).
    static FeatureIndex build(std::vector<IndexRow> rows, ModalityWeights weights = {});

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const std::vector<IndexRow>& rows() const { return rows_; }
    double scale_visual() const { return scale_visual_; }
    double scale_tactile() const { return scale_tactile_; }
    const ModalityWeights& weights() const { return weights_; }
    void set_weights(ModalityWeights w);

    std::size_t visual_dim() const { return rows_.empty() ? 0 : rows_.front().visual.size(); }
    std::size_t tactile_dim() const { return rows_.empty() ? 0 : rows_.front().tactile.size(); }

    /// w_V * ||s_V (y_V - y_V^i)|| + w_T * ||s_T (y_T - y_T^i)||
    double distance(std::size_t row, std::span<const double> visual, std::span<const double> tactile) const;

    void save(const std::filesystem::path& path, const nlohmann::json& meta = nlohmann::json::object()) const;
    static FeatureIndex load(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

private:
    std::vector<IndexRow> rows_;
    double scale_visual_ = 1.0;
    double scale_tactile_ = 1.0;
    ModalityWeights weights_;
};

/// FIFO of the most recently retrieved row indices.
class RejectBuffer {
public:
    explicit RejectBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    bool contains(std::size_t row) const;
    void push(std::size_t row);
    void clear() { items_.clear(); }
    const std::deque<std::size_t>& items() const { return items_; }

private:
    std::size_t capacity_;
    std::deque<std::size_t> items_;
};

struct QueryResult {
    std::size_t row = 0;
    double distance = 0.0;
};

/// Nearest row not in `reject` (ties -> lowest row index); the chosen row is
/// pushed into `reject`. Throws DataError("buffer exhausts index") when every
/// row is rejected.
QueryResult nn_query(const FeatureIndex& index, std::span<const double> visual,
                     std::span<const double> tactile, RejectBuffer& reject);

using VisualFeaturizer = std::function<std::vector<double>(std::span<const double>)>;
VisualFeaturizer identity_visual_featurizer();

/// Proprioceptive context of frame `i`: the tracked target is the previous
/// frame's commanded joints, velocity is the backward difference.
ProprioContext frame_context(const Trajectory& traj, std::size_t i);

/// Featurizes every frame that carries an action, optionally motion-subsampling
/// each demo first (features use the full-rate context either way). A retained
/// row's action is the last command issued before the next retained frame.
std::vector<IndexRow> featurize_demos(std::span<const Trajectory> demos, const Featurizer& tactile,
                                      const VisualFeaturizer& visual,
                                      const std::optional<SubsampleConfig>& subsample);

/// Throws DataError if no frame carries an action.
FeatureIndex build_index(std::span<const Trajectory> demos, const Featurizer& tactile,
                         const VisualFeaturizer& visual, ModalityWeights weights,
                         const std::optional<SubsampleConfig>& subsample = SubsampleConfig{0.02, true});

// ---------------------------------------------------------------------------
// Closed-loop interfaces

struct Observation {
    std::vector<double> visual;
    TactileFrame tactile;
    ProprioContext proprio;
};

struct StepResult {
    Observation obs;
    bool done = false;
    bool success = false;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual Observation reset(std::uint64_t episode_seed) = 0;
    virtual StepResult step(const Action& action) = 0;
};

struct PolicyOutput {
    Action action;
    std::optional<std::size_t> neighbor;
    double distance = 0.0;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual void reset() {}
    virtual PolicyOutput act(const Observation& obs) = 0;
};

class NNPolicy : public Policy {
public:
    /// Throws UsageError if `reject_k` is not smaller than the index.
    NNPolicy(const FeatureIndex& index, const Featurizer& tactile, VisualFeaturizer visual,
             std::size_t reject_k);

    void reset() override { reject_.clear(); }
    PolicyOutput act(const Observation& obs) override;

private:
    const FeatureIndex* index_;
    const Featurizer* tactile_;
    VisualFeaturizer visual_;
    RejectBuffer reject_;
};

struct StepRecord {
    std::size_t step = 0;
    std::optional<std::size_t> neighbor;
    double distance = 0.0;
    Action action;
};

struct EpisodeRecord {
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    bool success = false;
};

/// featurize -> query -> act until the env reports done or `max_steps` is hit.
EpisodeRecord rollout(Policy& policy, Environment& env, std::size_t max_steps, std::uint64_t episode_seed);

/// Replays a recorded trajectory's observations regardless of the actions taken.
class ReplayEnv : public Environment {
public:
    explicit ReplayEnv(Trajectory traj);
    Observation reset(std::uint64_t episode_seed) override;
    StepResult step(const Action& action) override;

private:
    Observation observe(std::size_t i) const;
    Trajectory traj_;
    std::size_t cursor_ = 0;
};

}  // namespace tdex
