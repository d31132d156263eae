#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tdex/ablate.hpp"
#include "tdex/config.hpp"
#include "tdex/contact_world.hpp"
#include "tdex/error.hpp"
#include "tdex/report.hpp"

using namespace tdex;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tdex_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TDEX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig tiny_ablate_config() {
    RunConfig c;
    c.epochs = 1;
    c.batch = 32;
    c.episodes = 4;
    c.replicates = 1;
    c.trace_episodes = 1;
    c.pca_k = 5;
    c.bc_epochs = 2;
    c.variants = {"tdex", "raw", "pca", "image-only", "BC"};
    c.play_fractions = {0.0, 1.0};
    return c;
}

AblateInputs tiny_inputs() {
    const auto spec = contact_world_spec("grasp");
    return {generate_play(spec, 0.5, 1), generate_demos(spec, 2, 2)};
}

}  // namespace

TEST_CASE("config text parses, round trips and rejects unknown keys") {
    const RunConfig c = parse_config("# comment\nseed = 9\n\ntask = bottle\nvariants = raw_720, pca_k\n"
                                     "play_fractions = 0,0.5\nweight_tactile = 0.25\n");
    CHECK(c.seed == 9);
    CHECK(c.task == "bottle");
    CHECK(c.variants == std::vector<std::string>{"raw_720", "pca_k"});
    CHECK(c.play_fractions == std::vector<double>{0.0, 0.5});
    CHECK(c.weight_tactile == 0.25);
    CHECK_FALSE(c.weight_visual.has_value());
    CHECK(parse_config(to_text(c)) == c);
    CHECK_THROWS_AS(parse_config("sede = 3"), UsageError);
    CHECK_THROWS_AS(parse_config("seed = -3"), UsageError);
    CHECK_THROWS_AS(parse_config("seed 3"), UsageError);
    CHECK_THROWS_AS(parse_config("play_fractions = 1.5"), UsageError);
}

TEST_CASE("resolved configs take weights and reject_k from the task preset") {
    RunConfig c;
    c.task = "joystick";
    const RunConfig r = resolved(c);
    const auto spec = contact_world_spec("joystick");
    CHECK(*r.weight_visual == spec.weights.visual);
    CHECK(*r.reject_k == spec.reject_k);
    c.reject_k = 2;
    CHECK(*resolved(c).reject_k == 2);
}

TEST_CASE("TDEX_SEED overrides the configured seed") {
    RunConfig c;
    c.seed = 1;
    setenv("TDEX_SEED", "42", 1);
    apply_env_overrides(c);
    unsetenv("TDEX_SEED");
    CHECK(c.seed == 42);
    apply_env_overrides(c);
    CHECK(c.seed == 42);
}

TEST_CASE("ablate is deterministic and report aggregates its tables") {
    const auto inputs = tiny_inputs();
    const RunConfig cfg = tiny_ablate_config();
    const auto a = scratch("ablate_a"), b = scratch("ablate_b");
    const AblateReport ra = run_ablate(cfg, inputs);
    write_ablate_report(a, ra);
    write_ablate_report(b, run_ablate(cfg, inputs));
    for (const char* f : {"results.tsv", "episodes.tsv", "traces.tsv", "losses.tsv"}) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    // grid: 5 variants, sweep: 2 fractions.
    CHECK(ra.results.size() == 7);
    CHECK(ra.find("sweep", "tdex", 0.0).episodes == 4);
    CHECK(ra.find("grid", "raw").replicates == 1);
    CHECK_THROWS_AS(ra.find("grid", "torque"), InvariantError);

    const auto out = scratch("report");
    const ReportCounts counts = write_report({a, b}, out);
    CHECK(counts.runs == 2);
    CHECK(counts.results == 14);
    CHECK(line_count(out / "summary.tsv") == 15);
    CHECK(line_count(out / "episodes.tsv") == 1 + 2 * ra.episodes.size());

    const auto empty = scratch("report_empty");
    CHECK(write_report({}, empty).results == 0);
    CHECK(line_count(empty / "summary.tsv") == 1);
    CHECK_THROWS_AS(write_report({out}, scratch("report_bad")), DataError);

    RunConfig bad = cfg;
    bad.variants = {"tdex", "tdex"};
    CHECK_THROWS_AS(run_ablate(bad, inputs), UsageError);
    bad.variants = {"resnet"};
    CHECK_THROWS_AS(run_ablate(bad, inputs), UsageError);
}

TEST_CASE("CLI pipeline and exit codes") {
    const fs::path d = scratch("pipeline");
    const std::string D = d.string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("gen-synth --task grasp --play-minutes 0.5 --demos 2 --seed 3 --out " + D + "/data") == 0);
    CHECK(fs::exists(d / "data" / "run_config.txt"));
    CHECK(run_cli("gen-synth --task nope --out " + D + "/x") == 1);
    CHECK(run_cli("ingest --in " + D + "/data/play --out " + D + "/ingested --threshold-m 0.01") == 0);
    CHECK(fs::exists(d / "ingested" / "stats.txt"));
    CHECK(run_cli("pretrain --data " + D + "/data/play --arch tdex3 --epochs 1 --batch 64 --out " + D + "/ckpt") == 0);
    CHECK(run_cli("pretrain --data " + D + "/data/play --arch vit --out " + D + "/ckpt2") == 1);
    CHECK(run_cli("pretrain --data " + D + "/missing --out " + D + "/ckpt3") == 2);
    CHECK(run_cli("featurize --variant tdex_image_cnn --ckpt " + D + "/ckpt --data " + D + "/data/demos --out " + D +
                  "/feat.f32") == 0);
    CHECK(fs::exists(d / "feat.f32.json"));
    CHECK(run_cli("index --demos " + D + "/data/demos --variant tdex_image_cnn --ckpt " + D + "/ckpt --out " + D +
                  "/index.json") == 0);
    CHECK(run_cli("rollout --index " + D + "/index.json --env synth:grasp --episodes 3 --out " + D + "/roll") == 0);
    CHECK(line_count(d / "roll" / "episodes.tsv") == 4);
    CHECK(run_cli("rollout --index " + D + "/nothing.json --out " + D + "/roll2") == 2);
    CHECK(run_cli("rollout --index " + D + "/index.json --reject-k 100000 --out " + D + "/roll3") == 1);
    CHECK(run_cli("report --out " + D + "/rep") == 0);
    CHECK(run_cli("--config " + D + "/no_such.cfg report --out " + D + "/rep") == 1);
}
