// tdex: command-line front end for the tactile imitation pipeline.
// Exit codes: 0 ok, 1 usage, 2 data, 3 internal invariant.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdex/ablate.hpp"
#include "tdex/checkpoint.hpp"
#include "tdex/config.hpp"
#include "tdex/contact_world.hpp"
#include "tdex/error.hpp"
#include "tdex/featurizer.hpp"
#include "tdex/ingest.hpp"
#include "tdex/report.hpp"
#include "tdex/retrieval.hpp"
#include "tdex/rng.hpp"
#include "tdex/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace tdex;

namespace {

std::string num(double v, const char* spec = "%.9g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

FeatureVariant variant_for_arch(const std::string& arch, bool shuffle) {
    switch (encoder_arch_from_string(arch)) {
        case EncoderArch::tdex3: return shuffle ? FeatureVariant::shuffled_image_cnn : FeatureVariant::tdex_image_cnn;
        case EncoderArch::stacked:
            if (shuffle) break;
            return FeatureVariant::stacked_45ch_cnn;
        case EncoderArch::shared:
            if (shuffle) break;
            return FeatureVariant::shared_per_pad_cnn;
    }
    throw UsageError("--shuffle-pads applies to the tdex3 architecture only");
}

std::vector<TactileFrame> tactile_frames(const std::vector<Trajectory>& trajs) {
    std::vector<TactileFrame> out;
    for (const auto& t : trajs)
        for (const auto& f : t.frames) out.push_back(f.tactile);
    return out;
}

/// Builds a featurizer from a checkpoint directory, or a stateless/fitted one from its tag.
Featurizer make_featurizer(const std::string& variant, const std::string& ckpt, std::size_t pca_k,
                           const std::vector<Trajectory>& fit_data) {
    if (!ckpt.empty()) {
        Featurizer f = Featurizer::load(ckpt);
        if (!variant.empty() && feature_variant_from_string(variant) != f.variant()) {
            throw UsageError("checkpoint holds variant " + std::string(to_string(f.variant())) + ", not " + variant);
        }
        return f;
    }
    const FeatureVariant v = feature_variant_from_string(variant);
    switch (v) {
        case FeatureVariant::raw_720: return Featurizer::raw();
        case FeatureVariant::sum_pooled_45: return Featurizer::sum_pooled_45();
        case FeatureVariant::torque_proxy: return Featurizer::torque();
        case FeatureVariant::pca_k: {
            const auto frames = tactile_frames(fit_data);
            if (frames.empty()) throw DataError("no frames to fit PCA on");
            return Featurizer::pca(pca_fit(frames, std::min({pca_k, frames.size(), kTactileDim})));
        }
        default: throw UsageError("variant " + variant + " needs --ckpt");
    }
}

struct Ctx {
    RunConfig cfg;
    std::string config_path;
    std::optional<std::uint64_t> seed;

    RunConfig resolve() {
        RunConfig c = cfg;
        if (!config_path.empty()) c = load_config(config_path, c);
        apply_env_overrides(c);
        if (seed) c.seed = *seed;
        return c;
    }
};

// Options bound before config loading are applied afterwards so that
// explicit flags win over the config file.
struct Overrides {
    std::vector<std::pair<std::string, std::string>> kv;
    void apply(RunConfig& c) const {
        for (const auto& [k, v] : kv) set_config_value(c, k, v);
    }
};

void add_override(CLI::App* sub, Overrides& ov, const std::string& flag, const std::string& key,
                  const std::string& help) {
    sub->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov.kv.emplace_back(key, v); },
                                          help);
}

int run(int argc, char** argv) {
    CLI::App app{"Tactile-dexterity pipeline: data generation, pretraining, retrieval and evaluation"};
    app.require_subcommand(1);
    Ctx ctx;
    app.add_option("--config", ctx.config_path, "key = value run configuration");

    Overrides ov;
    std::string in_dir, out_dir, data_dir, ckpt, index_path, env_uri = "synth:grasp", demos_dir;
    bool shuffle = false;
    bool no_predictor = false;
    std::vector<std::string> runs;

    auto* gen = app.add_subcommand("gen-synth", "generate ContactWorld play data and demonstrations");
    add_override(gen, ov, "--task", "task", "ContactWorld task");
    add_override(gen, ov, "--play-minutes", "play_minutes", "minutes of play data");
    add_override(gen, ov, "--demos", "demos", "number of demonstrations");
    gen->add_option("--seed", ctx.seed, "master seed");
    gen->add_option("--out", out_dir, "output directory (play/ and demos/ inside)")->required();

    auto* ing = app.add_subcommand("ingest", "motion-subsample trajectories");
    ing->add_option("--in", in_dir, "directory of trajectory files")->required();
    ing->add_option("--out", out_dir, "output directory")->required();
    add_override(ing, ov, "--threshold-m", "play_threshold", "displacement threshold in meters");

    auto* pre = app.add_subcommand("pretrain", "BYOL-pretrain a tactile encoder");
    pre->add_option("--data", data_dir, "directory of trajectory files")->required();
    add_override(pre, ov, "--arch", "arch", "tdex3, stacked or shared");
    add_override(pre, ov, "--epochs", "epochs", "training epochs");
    add_override(pre, ov, "--batch", "batch", "batch size");
    pre->add_flag("--shuffle-pads", shuffle, "randomly permute pad positions in the tactile image");
    pre->add_flag("--no-predictor", no_predictor, "train without the BYOL predictor head");
    pre->add_option("--seed", ctx.seed, "master seed");
    pre->add_option("--out", out_dir, "checkpoint directory")->required();

    auto* fea = app.add_subcommand("featurize", "compute tactile features for every frame");
    add_override(fea, ov, "--variant", "variant", "feature variant");
    fea->add_option("--ckpt", ckpt, "featurizer checkpoint directory");
    fea->add_option("--data", data_dir, "directory of trajectory files")->required();
    add_override(fea, ov, "--pca-k", "pca_k", "components for the pca_k variant");
    fea->add_option("--out", out_dir, "feature file (a .json manifest is written beside it)")->required();

    auto* idx = app.add_subcommand("index", "build a nearest-neighbour index from demonstrations");
    idx->add_option("--demos", demos_dir, "directory of demonstration trajectories")->required();
    add_override(idx, ov, "--variant", "variant", "feature variant");
    idx->add_option("--ckpt", ckpt, "featurizer checkpoint directory");
    add_override(idx, ov, "--threshold-m", "demo_threshold", "subsampling threshold in meters");
    add_override(idx, ov, "--wv", "weight_visual", "visual distance weight");
    add_override(idx, ov, "--wt", "weight_tactile", "tactile distance weight");
    add_override(idx, ov, "--pca-k", "pca_k", "components for the pca_k variant");
    idx->add_option("--out", index_path, "index file")->required();

    auto* rol = app.add_subcommand("rollout", "run the nearest-neighbour policy in an environment");
    rol->add_option("--index", index_path, "index file")->required();
    add_override(rol, ov, "--wv", "weight_visual", "visual distance weight");
    add_override(rol, ov, "--wt", "weight_tactile", "tactile distance weight");
    add_override(rol, ov, "--reject-k", "reject_k", "reject buffer size");
    rol->add_option("--env", env_uri, "environment, synth:<task>");
    add_override(rol, ov, "--episodes", "episodes", "number of episodes");
    rol->add_option("--seed", ctx.seed, "master seed");
    rol->add_option("--out", out_dir, "output directory")->required();

    auto* abl = app.add_subcommand("ablate", "run the representation and play-data ablations");
    add_override(abl, ov, "--play", "play_dir", "play data directory");
    add_override(abl, ov, "--demos", "demo_dir", "demonstration directory");
    add_override(abl, ov, "--out", "out_dir", "report directory");
    abl->add_option("--seed", ctx.seed, "master seed");

    auto* rep = app.add_subcommand("report", "aggregate ablate runs into plot-ready tables");
    rep->add_option("runs", runs, "ablate run directories");
    rep->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    RunConfig cfg = ctx.resolve();
    ov.apply(cfg);

    if (*gen) {
        const ContactWorldSpec spec = contact_world_spec(cfg.task);
        if (cfg.demos == 0) throw UsageError("--demos must be at least 1");
        const auto play = generate_play(spec, cfg.play_minutes, derive_seed(cfg.seed, "gen-synth/play"));
        const auto demos = generate_demos(spec, cfg.demos, derive_seed(cfg.seed, "gen-synth/demos"));
        write_trajectory_dir(fs::path(out_dir) / "play", play);
        write_trajectory_dir(fs::path(out_dir) / "demos", demos);
        write_snapshot(out_dir, cfg);
        std::size_t pf = 0, df = 0;
        for (const auto& t : play) pf += t.size();
        for (const auto& t : demos) df += t.size();
        std::cout << "play\t" << play.size() << " trajectories\t" << pf << " frames\n"
                  << "demos\t" << demos.size() << " trajectories\t" << df << " frames\n";
        return 0;
    }

    if (*ing) {
        const auto trajs = read_trajectory_dir(in_dir);
        const SubsampleConfig sc{cfg.play_threshold, true};
        std::vector<Trajectory> kept;
        for (const auto& t : trajs) {
            const auto keep = motion_subsample(t, sc);
            kept.push_back(select_frames(t, keep));
        }
        write_trajectory_dir(out_dir, kept);
        const DatasetStats st = dataset_stats(trajs, sc);
        std::ofstream stats(fs::path(out_dir) / "stats.txt");
        stats << "trajectories\t" << st.trajectories << "\nframes_before\t" << st.frames_before << "\nframes_after\t"
              << st.frames_after << "\nduration_s\t" << num(st.duration_s) << "\neffective_rate_hz\t"
              << num(st.effective_rate_hz) << "\nthreshold_m\t" << num(cfg.play_threshold) << '\n';
        write_snapshot(out_dir, cfg);
        std::cout << st.frames_before << " -> " << st.frames_after << " frames (" << num(st.effective_rate_hz, "%.2f")
                  << " Hz effective)\n";
        return 0;
    }

    if (*pre) {
        const FeatureVariant variant = variant_for_arch(cfg.arch, shuffle);
        const auto frames = tactile_frames(read_trajectory_dir(data_dir));
        if (frames.empty()) throw DataError("no frames in " + data_dir);
        ByolConfig bc;
        bc.arch = arch_for(variant);
        bc.epochs = cfg.epochs;
        bc.batch = cfg.batch;
        bc.seed = derive_seed(cfg.seed, "pretrain");
        bc.use_predictor = !no_predictor;
        std::optional<PadPermutation> perm;
        if (shuffle) perm = bc.permutation = make_pad_permutation(derive_seed(cfg.seed, "pretrain/shuffle"));
        const PretrainResult pr = pretrain(frames, bc, [](std::size_t epoch, double loss) {
            std::cout << "epoch\t" << epoch << "\tloss\t" << num(loss) << std::endl;
        });
        Featurizer::from_pretrain(variant, pr, perm).save(out_dir);
        std::ofstream losses(fs::path(out_dir) / "losses.tsv");
        losses << "epoch\tloss\n";
        for (std::size_t e = 0; e < pr.epoch_losses.size(); ++e) losses << e << '\t' << num(pr.epoch_losses[e]) << '\n';
        write_snapshot(out_dir, cfg);
        std::cout << "best_epoch\t" << pr.best_epoch << '\n';
        return 0;
    }

    if (*fea) {
        const auto trajs = read_trajectory_dir(data_dir);
        const Featurizer f = make_featurizer(ckpt.empty() ? cfg.variant : "", ckpt, cfg.pca_k, trajs);
        std::vector<TactileFrame> frames;
        std::vector<ProprioContext> ctxs;
        nlohmann::json sources = nlohmann::json::array();
        for (std::size_t d = 0; d < trajs.size(); ++d) {
            for (std::size_t i = 0; i < trajs[d].size(); ++i) {
                frames.push_back(trajs[d].frames[i].tactile);
                ctxs.push_back(frame_context(trajs[d], i));
                sources.push_back(std::to_string(d) + ":" + std::to_string(i));
            }
        }
        const auto feats = f.batch(frames, ctxs);
        std::ofstream bin(out_dir, std::ios::binary);
        if (!bin) throw DataError("cannot write " + out_dir);
        for (const auto& row : feats) write_f32_le(bin, row);
        const nlohmann::json manifest = {{"format", "tdex-features"},
                                         {"variant", to_string(f.variant())},
                                         {"rows", feats.size()},
                                         {"dim", f.dim()},
                                         {"dtype", "float32-le"},
                                         {"sources", sources}};
        std::ofstream(out_dir + ".json") << manifest.dump(2) << '\n';
        write_snapshot(fs::path(out_dir).parent_path().empty() ? fs::path(".") : fs::path(out_dir).parent_path(), cfg);
        std::cout << feats.size() << " x " << f.dim() << " features\n";
        return 0;
    }

    if (*idx) {
        const auto demos = read_trajectory_dir(demos_dir);
        cfg = resolved(cfg);
        const Featurizer f = make_featurizer(ckpt.empty() ? cfg.variant : "", ckpt, cfg.pca_k, demos);
        const FeatureIndex index = build_index(demos, f, identity_visual_featurizer(),
                                               {*cfg.weight_visual, *cfg.weight_tactile},
                                               SubsampleConfig{cfg.demo_threshold, true});
        const fs::path ipath(index_path);
        const std::string feat_dir = ipath.filename().string() + ".featurizer";
        f.save(ipath.parent_path() / feat_dir);
        index.save(ipath, {{"featurizer", feat_dir}, {"threshold_m", cfg.demo_threshold}, {"task", cfg.task}});
        write_snapshot(ipath.parent_path().empty() ? fs::path(".") : ipath.parent_path(), cfg);
        std::cout << index.size() << " rows, visual dim " << index.visual_dim() << ", tactile dim "
                  << index.tactile_dim() << '\n';
        return 0;
    }

    if (*rol) {
        nlohmann::json meta;
        FeatureIndex index = FeatureIndex::load(index_path, &meta);
        const fs::path ipath(index_path);
        const Featurizer f = Featurizer::load(ipath.parent_path() / meta.value("featurizer", ""));
        const ContactWorldSpec spec = parse_env_uri(env_uri);
        cfg.task = spec.task;
        cfg = resolved(cfg);
        // Flags override the weights stored in the index; otherwise keep them.
        bool wv = false, wt = false;
        for (const auto& [k, v] : ov.kv) {
            wv |= k == "weight_visual";
            wt |= k == "weight_tactile";
        }
        ModalityWeights w = index.weights();
        if (wv) w.visual = *cfg.weight_visual;
        if (wt) w.tactile = *cfg.weight_tactile;
        index.set_weights(w);
        cfg.weight_visual = w.visual;
        cfg.weight_tactile = w.tactile;
        if (cfg.episodes == 0) throw UsageError("--episodes must be positive");

        NNPolicy policy(index, f, identity_visual_featurizer(), *cfg.reject_k);
        const EvalResult ev = evaluate(policy, spec, cfg.episodes, derive_seed(cfg.seed, "rollout/eval"));
        fs::create_directories(out_dir);
        std::ofstream steps(fs::path(out_dir) / "rollouts.tsv");
        steps << "episode\tstep\tneighbor\tdistance";
        for (std::size_t k = 0; k < kActionDim; ++k) steps << "\ta" << k;
        steps << '\n';
        std::ofstream eps(fs::path(out_dir) / "episodes.tsv");
        eps << "episode\tseed\tsuccess\tsteps\n";
        for (std::size_t e = 0; e < ev.episodes.size(); ++e) {
            const auto& ep = ev.episodes[e];
            eps << e << '\t' << ep.seed << '\t' << (ep.success ? 1 : 0) << '\t' << ep.steps.size() << '\n';
            for (const auto& s : ep.steps) {
                steps << e << '\t' << s.step << '\t' << (s.neighbor ? std::to_string(*s.neighbor) : "-") << '\t'
                      << num(s.distance);
                for (double a : s.action.to_array()) steps << '\t' << num(a);
                steps << '\n';
            }
        }
        write_snapshot(out_dir, cfg);
        std::cout << "success_rate\t" << num(ev.success_rate, "%.6f") << "\t(" << ev.successes << "/"
                  << ev.episodes.size() << ")\n";
        return 0;
    }

    if (*abl) {
        cfg = resolved(cfg);
        const AblateInputs inputs = load_ablate_inputs(cfg);
        const AblateReport report = run_ablate(cfg, inputs, &std::cerr);
        write_ablate_report(cfg.out_dir, report);
        write_snapshot(cfg.out_dir, cfg);
        std::cout << "kind\tvariant\tplay_fraction\tsuccess_rate\tepisodes\n";
        for (const auto& r : report.results) {
            std::cout << r.kind << '\t' << r.variant << '\t' << num(r.play_fraction, "%.6g") << '\t'
                      << num(r.success_rate(), "%.6f") << '\t' << r.episodes << '\n';
        }
        return 0;
    }

    if (*rep) {
        std::vector<fs::path> dirs(runs.begin(), runs.end());
        const ReportCounts c = write_report(dirs, out_dir);
        std::cout << c.runs << " runs\t" << c.results << " results\t" << c.episodes << " episodes\t" << c.traces
                  << " trace steps\t" << c.losses << " loss points\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
