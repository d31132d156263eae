#include "tdex/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tdex/error.hpp"

namespace tdex {

using nlohmann::json;

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

double scale_for(const std::vector<IndexRow>& rows, std::vector<double> IndexRow::*member) {
    std::vector<std::vector<double>> pts;
    pts.reserve(rows.size());
    for (const auto& r : rows) pts.push_back(r.*member);
    const double m = max_pairwise_distance(pts);
    return m > 0.0 ? 1.0 / m : 1.0;
}

}  // namespace

double max_pairwise_distance(std::span<const std::vector<double>> points) {
    double best = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            best = std::max(best, euclidean(points[i], points[j]));
        }
    }
    return best;
}

FeatureIndex FeatureIndex::build(std::vector<IndexRow> rows, ModalityWeights weights) {
    FeatureIndex idx;
    for (const auto& r : rows) {
        if (!rows.empty() && (r.visual.size() != rows.front().visual.size() ||
                              r.tactile.size() != rows.front().tactile.size())) {
            throw DataError("index rows have inconsistent feature dimensions");
        }
    }
    idx.rows_ = std::move(rows);
    idx.scale_visual_ = scale_for(idx.rows_, &IndexRow::visual);
    idx.scale_tactile_ = scale_for(idx.rows_, &IndexRow::tactile);
    idx.set_weights(weights);
    return idx;
}

void FeatureIndex::set_weights(ModalityWeights w) {
    if (w.visual < 0.0 || w.tactile < 0.0) throw UsageError("modality weights must be non-negative");
    weights_ = w;
}

double FeatureIndex::distance(std::size_t row, std::span<const double> visual,
                              std::span<const double> tactile) const {
    const IndexRow& r = rows_[row];
    return weights_.visual * scale_visual_ * euclidean(visual, r.visual) +
           weights_.tactile * scale_tactile_ * euclidean(tactile, r.tactile);
}

void FeatureIndex::save(const std::filesystem::path& path, const json& meta) const {
    json rows = json::array();
    for (const auto& r : rows_) {
        rows.push_back({{"visual", r.visual},
                        {"tactile", r.tactile},
                        {"action", r.action.to_array()},
                        {"source", r.source}});
    }
    json doc = {{"format", "tdex-index"},
                {"version", 1},
                {"weights", {{"visual", weights_.visual}, {"tactile", weights_.tactile}}},
                {"scale_visual", scale_visual_},
                {"scale_tactile", scale_tactile_},
                {"meta", meta},
                {"rows", rows}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump() << '\n';
}

FeatureIndex FeatureIndex::load(const std::filesystem::path& path, json* meta) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open index " + path.string());
    try {
        const json doc = json::parse(in);
        if (doc.value("format", "") != "tdex-index") throw DataError("not an index file: " + path.string());
        std::vector<IndexRow> rows;
        for (const auto& r : doc.at("rows")) {
            IndexRow row;
            row.visual = r.at("visual").get<std::vector<double>>();
            row.tactile = r.at("tactile").get<std::vector<double>>();
            row.action = Action::from_span(r.at("action").get<std::vector<double>>());
            row.source = r.value("source", "");
            rows.push_back(std::move(row));
        }
        FeatureIndex idx = build(std::move(rows), {doc.at("weights").at("visual").get<double>(),
                                                   doc.at("weights").at("tactile").get<double>()});
        if (meta) *meta = doc.value("meta", json::object());
        return idx;
    } catch (const json::exception& e) {
        throw DataError("malformed index " + path.string() + ": " + e.what());
    }
}

bool RejectBuffer::contains(std::size_t row) const {
    return std::find(items_.begin(), items_.end(), row) != items_.end();
}

void RejectBuffer::push(std::size_t row) {
    if (capacity_ == 0) return;
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(row);
}

QueryResult nn_query(const FeatureIndex& index, std::span<const double> visual,
                     std::span<const double> tactile, RejectBuffer& reject) {
    if (index.empty()) throw DataError("empty index");
    if (visual.size() != index.visual_dim() || tactile.size() != index.tactile_dim()) {
        throw DataError("query dimensions (" + std::to_string(visual.size()) + ", " +
                        std::to_string(tactile.size()) + ") do not match index (" +
                        std::to_string(index.visual_dim()) + ", " + std::to_string(index.tactile_dim()) +
                        ")");
    }
    std::optional<QueryResult> best;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (reject.contains(i)) continue;
        const double d = index.distance(i, visual, tactile);
        if (!best || d < best->distance) best = QueryResult{i, d};
    }
    if (!best) throw DataError("buffer exhausts index");
    reject.push(best->row);
    return *best;
}

VisualFeaturizer identity_visual_featurizer() {
    return [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
}

ProprioContext frame_context(const Trajectory& traj, std::size_t i) {
    ProprioContext ctx;
    const auto& f = traj.frames.at(i);
    ctx.state = f.state;
    ctx.desired_joints = f.state.joints;
    if (i > 0) {
        const auto& prev = traj.frames[i - 1];
        if (prev.action) ctx.desired_joints = prev.action->joints;
        const double dt = f.t - prev.t;
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            ctx.joint_velocity[j] = (f.state.joints[j] - prev.state.joints[j]) / dt;
        }
    }
    return ctx;
}

std::vector<IndexRow> featurize_demos(std::span<const Trajectory> demos, const Featurizer& tactile,
                                      const VisualFeaturizer& visual,
                                      const std::optional<SubsampleConfig>& subsample) {
    std::vector<IndexRow> rows;
    for (std::size_t d = 0; d < demos.size(); ++d) {
        const Trajectory& traj = demos[d];
        if (traj.empty()) continue;
        std::vector<std::size_t> keep;
        if (subsample) {
            keep = motion_subsample(traj, *subsample);
        } else {
            keep.resize(traj.size());
            for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
        }
        std::erase_if(keep, [&](std::size_t i) { return !traj.frames[i].action.has_value(); });
        std::vector<TactileFrame> frames;
        std::vector<ProprioContext> ctx;
        for (std::size_t i : keep) {
            frames.push_back(traj.frames[i].tactile);
            ctx.push_back(frame_context(traj, i));
        }
        const auto feats = tactile.batch(frames, ctx);
        for (std::size_t k = 0; k < keep.size(); ++k) {
            const auto& f = traj.frames[keep[k]];
            IndexRow row;
            row.visual = f.visual ? visual(*f.visual) : std::vector<double>{};
            row.tactile = feats[k];
            // Commands are absolute targets, so the last command before the next
            // retained frame is the one that reaches it.
            const std::size_t next = k + 1 < keep.size() ? keep[k + 1] : traj.size();
            row.action = *f.action;
            for (std::size_t i = next; i-- > keep[k] + 1;) {
                if (traj.frames[i].action) {
                    row.action = *traj.frames[i].action;
                    break;
                }
            }
            row.source = std::to_string(d) + ":" + std::to_string(keep[k]);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

FeatureIndex build_index(std::span<const Trajectory> demos, const Featurizer& tactile,
                         const VisualFeaturizer& visual, ModalityWeights weights,
                         const std::optional<SubsampleConfig>& subsample) {
    auto rows = featurize_demos(demos, tactile, visual, subsample);
    if (rows.empty()) throw DataError("demonstrations carry no actions");
    return FeatureIndex::build(std::move(rows), weights);
}

NNPolicy::NNPolicy(const FeatureIndex& index, const Featurizer& tactile, VisualFeaturizer visual,
                   std::size_t reject_k)
    : index_(&index), tactile_(&tactile), visual_(std::move(visual)), reject_(reject_k) {
    if (index.empty()) throw DataError("empty index");
    if (reject_k >= index.size()) {
        throw UsageError("reject buffer size " + std::to_string(reject_k) +
                         " must be smaller than the index (" + std::to_string(index.size()) + " rows)");
    }
}

PolicyOutput NNPolicy::act(const Observation& obs) {
    const std::vector<double> yv = visual_(obs.visual);
    const std::vector<double> yt = (*tactile_)(obs.tactile, &obs.proprio);
    const QueryResult q = nn_query(*index_, yv, yt, reject_);
    return PolicyOutput{index_->rows()[q.row].action, q.row, q.distance};
}

EpisodeRecord rollout(Policy& policy, Environment& env, std::size_t max_steps, std::uint64_t episode_seed) {
    EpisodeRecord rec;
    rec.seed = episode_seed;
    if (max_steps == 0) return rec;
    policy.reset();
    Observation obs = env.reset(episode_seed);
    for (std::size_t t = 0; t < max_steps; ++t) {
        const PolicyOutput out = policy.act(obs);
        rec.steps.push_back(StepRecord{t, out.neighbor, out.distance, out.action});
        StepResult r = env.step(out.action);
        obs = std::move(r.obs);
        if (r.done) {
            rec.success = r.success;
            break;
        }
    }
    return rec;
}

ReplayEnv::ReplayEnv(Trajectory traj) : traj_(std::move(traj)) {
    if (traj_.empty()) throw DataError("cannot replay an empty trajectory");
}

Observation ReplayEnv::observe(std::size_t i) const {
    Observation obs;
    const auto& f = traj_.frames[i];
    obs.visual = f.visual.value_or(std::vector<double>{});
    obs.tactile = f.tactile;
    obs.proprio = frame_context(traj_, i);
    return obs;
}

Observation ReplayEnv::reset(std::uint64_t) {
    cursor_ = 0;
    return observe(0);
}

StepResult ReplayEnv::step(const Action&) {
    ++cursor_;
    StepResult r;
    if (cursor_ >= traj_.size()) {
        r.obs = observe(traj_.size() - 1);
        r.done = true;
        return r;
    }
    r.obs = observe(cursor_);
    return r;
}

}  // namespace tdex
