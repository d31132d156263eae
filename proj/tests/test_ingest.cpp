#include <doctest.h>

#include "support.hpp"
#include "tdex/error.hpp"
#include "tdex/ingest.hpp"

using namespace tdex;

namespace {

Trajectory line_trajectory(std::size_t n, double step) {
    Trajectory t;
    for (std::size_t i = 0; i < n; ++i) {
        TrajectoryFrame f;
        f.t = double(i);
        f.state.ee_pos = {step * double(i), 0.0, 0.0};
        t.frames.push_back(f);
    }
    return t;
}

}  // namespace

TEST_CASE("stationary trajectory keeps only the first frame") {
    const Trajectory t = line_trajectory(100, 0.0);
    CHECK(motion_subsample(t, {0.01, true}) == std::vector<std::size_t>{0});
    const DatasetStats s = dataset_stats(std::vector<Trajectory>{t}, {0.01, true});
    CHECK(s.frames_before == 100);
    CHECK(s.frames_after == 1);
}

TEST_CASE("ties at exactly the threshold are not retained") {
    // 0.25 is exact in binary, so the accumulator hits 0.5 exactly after two steps.
    const Trajectory t = line_trajectory(6, 0.25);
    CHECK(motion_subsample(t, {0.5, true}) == std::vector<std::size_t>{0, 3});
    CHECK(motion_subsample(t, {0.49, true}) == std::vector<std::size_t>{0, 2, 4});
}

TEST_CASE("displacement sums the end effector and four fingertips") {
    RobotState a, b;
    b.ee_pos = {0.003, 0.004, 0.0};
    b.fingertips[2] = {0.0, 0.0, 0.01};
    CHECK(step_displacement(a, b) == doctest::Approx(0.015));
    CHECK(step_displacement(a, b) == doctest::Approx(testing::oracle_displacement(a, b)));
}

TEST_CASE("subsampler satisfies the contract on random trajectories") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const Trajectory t = testing::random_trajectory(rng, 300);
        for (double thr : {0.01, 0.02}) {
            const auto kept = motion_subsample(t, {thr, true});
            CHECK(testing::check_subsample_contract(t, kept, thr) == "");
        }
    }
}

TEST_CASE("subsampling is idempotent for straight monotone motion") {
    const Trajectory t = line_trajectory(200, 0.003);
    const auto kept = motion_subsample(t, {0.01, true});
    const Trajectory once = select_frames(t, kept);
    CHECK(motion_subsample(once, {0.01, true}).size() == once.size());
}

TEST_CASE("path-length accumulation is not idempotent when motion doubles back") {
    // Out 0.008, back 0.008: accumulated path 0.016 > 0.01 retains frame 2, but
    // frame 2 sits where frame 0 was, so re-subsampling drops it.
    Trajectory t;
    for (double x : {0.0, 0.008, 0.0}) {
        TrajectoryFrame f;
        f.t = double(t.size());
        f.state.ee_pos = {x, 0.0, 0.0};
        t.frames.push_back(f);
    }
    const auto kept = motion_subsample(t, {0.01, true});
    REQUIRE(kept == std::vector<std::size_t>{0, 2});
    const Trajectory once = select_frames(t, kept);
    CHECK(motion_subsample(once, {0.01, true}) == std::vector<std::size_t>{0});
}

TEST_CASE("bad inputs") {
    CHECK_THROWS_AS(motion_subsample(Trajectory{}, {0.01, true}), DataError);
    CHECK_THROWS_AS(motion_subsample(line_trajectory(3, 0.1), {-1.0, true}), UsageError);
    CHECK_THROWS_AS(select_frames(line_trajectory(3, 0.1), std::vector<std::size_t>{5}), InvariantError);
    const DatasetStats empty = dataset_stats(std::vector<Trajectory>{}, {0.01, true});
    CHECK(empty.frames_before == 0);
    CHECK(empty.frames_after == 0);
}

TEST_CASE("effective rate counts retained frames per second") {
    const Trajectory t = line_trajectory(11, 0.006);  // 10 s, one retained frame every 2 steps
    const DatasetStats s = dataset_stats(std::vector<Trajectory>{t}, {0.01, true});
    CHECK(s.frames_after == 6);
    CHECK(s.effective_rate_hz == doctest::Approx(0.6));
}
