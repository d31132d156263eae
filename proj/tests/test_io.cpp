#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "support.hpp"
#include "tdex/checkpoint.hpp"
#include "tdex/error.hpp"
#include "tdex/trajectory_io.hpp"

using namespace tdex;
namespace fs = std::filesystem;

namespace {

Trajectory sample_trajectory() {
    Rng rng(11);
    Trajectory t = testing::random_trajectory(rng, 5);
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto& f = t.frames[i];
        std::vector<double> v(kTactileDim);
        for (double& x : v) x = uniform(rng, -3.0, 3.0);
        f.tactile = TactileFrame::from_flat(v);
        f.visual = std::vector<double>{0.1 * double(i), -0.3};
        if (i % 2 == 0) {
            Action a;
            a.ee_pos = {uniform(rng, -1, 1), 0.5, 1.0 / 3.0};
            a.joints[3] = 0.7;
            f.action = a;
        }
    }
    return t;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tdex_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("trajectory JSON lines round trip exactly") {
    const Trajectory t = sample_trajectory();
    std::stringstream ss;
    write_trajectory(ss, t);
    const Trajectory back = read_trajectory(ss);
    REQUIRE(back.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back.frames[i].t == t.frames[i].t);
        CHECK(back.frames[i].tactile == t.frames[i].tactile);
        CHECK(back.frames[i].state == t.frames[i].state);
        CHECK(back.frames[i].visual == t.frames[i].visual);
        CHECK(back.frames[i].action == t.frames[i].action);
    }
}

TEST_CASE("malformed trajectory lines report the line") {
    std::stringstream ss("{\"t\": 0}\n");
    CHECK_THROWS_AS(read_trajectory(ss), DataError);
    std::stringstream junk("not json\n");
    CHECK_THROWS_WITH_AS(read_trajectory(junk), doctest::Contains("line 1"), DataError);
}

TEST_CASE("trajectory directories are written and listed in order") {
    const fs::path dir = scratch_dir("trajdir");
    const std::vector<Trajectory> ts{sample_trajectory(), sample_trajectory()};
    write_trajectory_dir(dir, ts);
    const auto files = list_trajectory_files(dir);
    REQUIRE(files.size() == 2);
    CHECK(files[0].filename() == "traj_000.jsonl");
    CHECK(read_trajectory_dir(dir).size() == 2);
    CHECK_THROWS_AS(list_trajectory_files(dir / "missing"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("checkpoints store float32 parameters and metadata") {
    const fs::path dir = scratch_dir("ckpt");
    ParamStore p;
    p.add("a.0.weight", Tensor({2, 3}, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 1.0 / 3.0}));
    p.add("a.0.bias", Tensor({2}, std::vector<double>{-1.0, 2.0}));
    save_checkpoint(dir, p, {{"arch", "tdex3"}});
    const Checkpoint ck = load_checkpoint(dir);
    CHECK(ck.meta.at("arch") == "tdex3");
    REQUIRE(ck.params.size() == 2);
    CHECK(ck.params.get("a.0.weight").shape() == Shape{2, 3});
    CHECK(ck.params.get("a.0.weight")[5] == static_cast<double>(static_cast<float>(1.0 / 3.0)));
    CHECK(ck.params.get("a.0.bias")[1] == 2.0);
    CHECK_THROWS_AS(load_checkpoint(dir / "nope"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("float32 little-endian helpers round trip and detect truncation") {
    std::stringstream ss;
    const std::vector<double> v{1.5, -2.25, 0.0};
    write_f32_le(ss, v);
    CHECK(ss.str().size() == 12);
    CHECK(static_cast<unsigned char>(ss.str()[3]) == 0x3f);  // 1.5f = 0x3fc00000, little-endian
    CHECK(read_f32_le(ss, 3) == v);
    std::stringstream shortbuf(std::string(5, '\0'));
    CHECK_THROWS_AS(read_f32_le(shortbuf, 2), DataError);
}
