#include "tdex/ablate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "tdex/bc.hpp"
#include "tdex/contact_world.hpp"
#include "tdex/error.hpp"
#include "tdex/featurizer.hpp"
#include "tdex/retrieval.hpp"
#include "tdex/rng.hpp"
#include "tdex/trajectory_io.hpp"

namespace tdex {

namespace {

bool uses_byol(std::string_view v) {
    return v == "tdex" || v == "stacked" || v == "shared" || v == "shuffled" || v == "tactile-only" ||
           v == "task-data-only" || v == "BC";
}

std::string fmt(const char* spec, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string fraction_label(double f) { return fmt("%.6g", f); }

class Runner {
public:
    Runner(const RunConfig& cfg, const AblateInputs& in, std::ostream* log)
        : cfg_(resolved(cfg)), spec_(contact_world_spec(cfg_.task)), in_(in), log_(log) {
        for (const auto& t : in.play)
            for (const auto& f : t.frames) play_.push_back(f.tactile);
        for (const auto& t : in.demos)
            for (const auto& f : t.frames) task_.push_back(f.tactile);
        eval_seed_ = derive_seed(cfg_.seed, "ablate/eval");
        weights_ = {*cfg_.weight_visual, *cfg_.weight_tactile};
        subsample_ = SubsampleConfig{cfg_.demo_threshold, true};
    }

    AblateReport run() {
        for (const auto& v : cfg_.variants) {
            const std::size_t reps = uses_byol(v) ? cfg_.replicates : 1;
            VariantResult res{"grid", v, v == "task-data-only" ? 0.0 : 1.0, reps, 0, 0};
            for (std::size_t r = 0; r < reps; ++r) record(res, r, grid_eval(v, r));
            report_.results.push_back(res);
        }
        for (double f : cfg_.play_fractions) {
            VariantResult res{"sweep", "tdex", f, cfg_.replicates, 0, 0};
            for (std::size_t r = 0; r < cfg_.replicates; ++r) {
                record(res, r, nn_eval(tdex_on_fraction(f, r), weights_));
            }
            report_.results.push_back(res);
        }
        return std::move(report_);
    }

private:
    void say(const std::string& s) {
        if (log_) *log_ << s << std::endl;
    }

    void record(VariantResult& res, std::size_t rep, const EvalResult& ev) {
        res.episodes += ev.episodes.size();
        res.successes += ev.successes;
        for (std::size_t e = 0; e < ev.episodes.size(); ++e) {
            const EpisodeRecord& ep = ev.episodes[e];
            report_.episodes.push_back(
                {res.kind, res.variant, res.play_fraction, rep, e, ep.seed, ep.success, ep.steps.size()});
            if (e >= cfg_.trace_episodes) continue;
            for (const auto& s : ep.steps) {
                if (!s.neighbor) continue;
                report_.traces.push_back(
                    {res.kind, res.variant, res.play_fraction, rep, e, s.step, *s.neighbor, s.distance});
            }
        }
        say(res.kind + " " + res.variant + " fraction " + fraction_label(res.play_fraction) + " replicate " +
            std::to_string(rep) + ": " + std::to_string(ev.successes) + "/" + std::to_string(ev.episodes.size()));
    }

    std::uint64_t byol_seed(std::size_t rep) const { return derive_seed(derive_seed(cfg_.seed, "ablate/byol"), rep); }

    /// Pretrained encoders are shared between variants within a replicate.
    const Featurizer& encoder(FeatureVariant variant, const std::string& data_label,
                              std::span<const TactileFrame> data, std::size_t rep) {
        const std::string key = std::string(to_string(variant)) + "@" + data_label + "#" + std::to_string(rep);
        if (auto it = encoders_.find(key); it != encoders_.end()) return it->second;
        if (data.empty()) throw DataError("no tactile frames to pretrain " + key);
        ByolConfig bc;
        bc.arch = arch_for(variant);
        bc.epochs = cfg_.epochs;
        bc.batch = cfg_.batch;
        bc.seed = byol_seed(rep);
        std::optional<PadPermutation> perm;
        if (variant == FeatureVariant::shuffled_image_cnn) {
            perm = make_pad_permutation(derive_seed(cfg_.seed, "ablate/shuffle"));
            bc.permutation = perm;
        }
        say("pretraining " + key + " on " + std::to_string(data.size()) + " frames");
        const PretrainResult pr = pretrain(data, bc);
        const std::string label = std::string(to_string(variant)) + "@" + data_label;
        for (std::size_t e = 0; e < pr.epoch_losses.size(); ++e) {
            report_.losses.push_back({label, rep, e, pr.epoch_losses[e]});
        }
        return encoders_.emplace(key, Featurizer::from_pretrain(variant, pr, perm)).first->second;
    }

    const Featurizer& tdex_on_fraction(double f, std::size_t rep) {
        if (f <= 0.0) return encoder(FeatureVariant::tdex_image_cnn, "task", task_, rep);
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(f * double(play_.size())));
        return encoder(FeatureVariant::tdex_image_cnn, "play" + fraction_label(f),
                       std::span<const TactileFrame>(play_.data(), std::min(n, play_.size())), rep);
    }

    const Featurizer& fixed(const std::string& name) {
        if (auto it = fixed_.find(name); it != fixed_.end()) return it->second;
        Featurizer f = Featurizer::raw();
        if (name == "sum_pooled") f = Featurizer::sum_pooled_45();
        if (name == "torque") f = Featurizer::torque();
        if (name == "pca") {
            if (play_.empty()) throw DataError("no play frames to fit PCA on");
            const std::size_t k = std::min({cfg_.pca_k, play_.size(), kTactileDim});
            if (k == 0) throw UsageError("pca_k must be positive");
            say("fitting PCA with " + std::to_string(k) + " components");
            f = Featurizer::pca(pca_fit(play_, k));
        }
        return fixed_.emplace(name, std::move(f)).first->second;
    }

    EvalResult nn_eval(const Featurizer& feat, ModalityWeights w) {
        // Identical (featurizer, weights) pairs are evaluated once.
        const std::string key = std::to_string(reinterpret_cast<std::uintptr_t>(&feat)) + "/" +
                                fmt("%.17g", w.visual) + "/" + fmt("%.17g", w.tactile);
        if (auto it = evals_.find(key); it != evals_.end()) return it->second;
        const FeatureIndex index = build_index(in_.demos, feat, identity_visual_featurizer(), w, subsample_);
        if (*cfg_.reject_k >= index.size()) {
            throw UsageError("reject_k " + std::to_string(*cfg_.reject_k) + " leaves no candidates in a " +
                             std::to_string(index.size()) + "-row index");
        }
        NNPolicy policy(index, feat, identity_visual_featurizer(), *cfg_.reject_k);
        return evals_.emplace(key, evaluate(policy, spec_, cfg_.episodes, eval_seed_)).first->second;
    }

    EvalResult bc_eval(const Featurizer& feat, std::size_t rep) {
        const auto rows = featurize_demos(in_.demos, feat, identity_visual_featurizer(), subsample_);
        BcConfig bc;
        bc.epochs = cfg_.bc_epochs;
        bc.seed = derive_seed(byol_seed(rep), "bc");
        say("training BC on " + std::to_string(rows.size()) + " rows");
        const BcModel model = bc_train(rows, bc);
        BcPolicy policy(model, feat, identity_visual_featurizer());
        return evaluate(policy, spec_, cfg_.episodes, eval_seed_);
    }

    EvalResult grid_eval(const std::string& v, std::size_t rep) {
        const auto play_cnn = [&](FeatureVariant fv) -> const Featurizer& {
            return encoder(fv, "play" + fraction_label(1.0), play_, rep);
        };
        if (v == "tdex") return nn_eval(tdex_on_fraction(1.0, rep), weights_);
        if (v == "stacked") return nn_eval(play_cnn(FeatureVariant::stacked_45ch_cnn), weights_);
        if (v == "shared") return nn_eval(play_cnn(FeatureVariant::shared_per_pad_cnn), weights_);
        if (v == "shuffled") return nn_eval(play_cnn(FeatureVariant::shuffled_image_cnn), weights_);
        if (v == "raw" || v == "pca" || v == "sum_pooled" || v == "torque") return nn_eval(fixed(v), weights_);
        // Tactile features are irrelevant at zero tactile weight.
        if (v == "image-only") return nn_eval(fixed("raw"), {weights_.visual, 0.0});
        if (v == "tactile-only") return nn_eval(tdex_on_fraction(1.0, rep), {0.0, weights_.tactile});
        if (v == "task-data-only") return nn_eval(tdex_on_fraction(0.0, rep), weights_);
        if (v == "BC") return bc_eval(tdex_on_fraction(1.0, rep), rep);
        throw UsageError("unknown ablation variant '" + v + "'");
    }

    RunConfig cfg_;
    ContactWorldSpec spec_;
    const AblateInputs& in_;
    std::ostream* log_;
    std::vector<TactileFrame> play_, task_;
    std::uint64_t eval_seed_ = 0;
    ModalityWeights weights_;
    SubsampleConfig subsample_;
    std::map<std::string, Featurizer> encoders_, fixed_;
    std::map<std::string, EvalResult> evals_;
    AblateReport report_;
};

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

}  // namespace

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> v = RunConfig{}.variants;
    return v;
}

AblateInputs load_ablate_inputs(const RunConfig& cfg) {
    AblateInputs in;
    const auto load = [](const std::string& dir, const char* what) {
        if (!std::filesystem::is_directory(dir)) {
            throw DataError(std::string("gen-synth stage: missing ") + what + " directory '" + dir + "'");
        }
        auto trajs = read_trajectory_dir(dir);
        if (trajs.empty()) throw DataError(std::string("gen-synth stage: no ") + what + " trajectories in '" + dir + "'");
        return trajs;
    };
    in.play = load(cfg.play_dir, "play");
    in.demos = load(cfg.demo_dir, "demonstration");
    return in;
}

AblateReport run_ablate(const RunConfig& cfg, const AblateInputs& inputs, std::ostream* log) {
    std::set<std::string> seen;
    for (const auto& v : cfg.variants) {
        const auto& known = ablation_variants();
        if (std::find(known.begin(), known.end(), v) == known.end()) {
            throw UsageError("unknown ablation variant '" + v + "'");
        }
        if (!seen.insert(v).second) throw UsageError("variant '" + v + "' listed twice");
    }
    if (cfg.episodes == 0) throw UsageError("episodes must be positive");
    if (cfg.replicates == 0) throw UsageError("replicates must be positive");
    if (cfg.batch == 0) throw UsageError("batch must be positive");
    if (inputs.demos.empty()) throw DataError("gen-synth stage: no demonstrations");
    return Runner(cfg, inputs, log).run();
}

const VariantResult& AblateReport::find(std::string_view kind, std::string_view variant, double f) const {
    for (const auto& r : results) {
        if (r.kind == kind && r.variant == variant && r.play_fraction == f) return r;
    }
    throw InvariantError("no ablation result for " + std::string(kind) + "/" + std::string(variant));
}

void write_ablate_report(const std::filesystem::path& dir, const AblateReport& report) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "results.tsv");
        out << "kind\tvariant\tplay_fraction\treplicates\tepisodes\tsuccesses\tsuccess_rate\n";
        for (const auto& r : report.results) {
            out << r.kind << '\t' << r.variant << '\t' << fraction_label(r.play_fraction) << '\t' << r.replicates
                << '\t' << r.episodes << '\t' << r.successes << '\t' << fmt("%.6f", r.success_rate()) << '\n';
        }
    }
    {
        auto out = open_out(dir / "episodes.tsv");
        out << "kind\tvariant\tplay_fraction\treplicate\tepisode\tseed\tsuccess\tsteps\n";
        for (const auto& e : report.episodes) {
            out << e.kind << '\t' << e.variant << '\t' << fraction_label(e.play_fraction) << '\t' << e.replicate
                << '\t' << e.episode << '\t' << e.seed << '\t' << (e.success ? 1 : 0) << '\t' << e.steps << '\n';
        }
    }
    {
        auto out = open_out(dir / "traces.tsv");
        out << "kind\tvariant\tplay_fraction\treplicate\tepisode\tstep\tneighbor\tdistance\n";
        for (const auto& t : report.traces) {
            out << t.kind << '\t' << t.variant << '\t' << fraction_label(t.play_fraction) << '\t' << t.replicate
                << '\t' << t.episode << '\t' << t.step << '\t' << t.neighbor << '\t' << fmt("%.9g", t.distance)
                << '\n';
        }
    }
    {
        auto out = open_out(dir / "losses.tsv");
        out << "encoder\treplicate\tepoch\tloss\n";
        for (const auto& l : report.losses) {
            out << l.encoder << '\t' << l.replicate << '\t' << l.epoch << '\t' << fmt("%.9g", l.loss) << '\n';
        }
    }
}

}  // namespace tdex
