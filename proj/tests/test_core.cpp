#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "tdex/error.hpp"

using namespace tdex;

TEST_CASE("flat index round trip covers all 720 taxels") {
    for (std::size_t i = 0; i < kTactileDim; ++i) CHECK(flat_index(taxel_from_flat(i)) == i);
}

TEST_CASE("tactile image layout matches the written-out oracle and is a bijection") {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> used;
    for (std::size_t i = 0; i < kTactileDim; ++i) {
        const TaxelIndex t = taxel_from_flat(i);
        const PixelIndex p = pixel_of(t);
        CHECK(p == testing::layout_oracle(t));
        CHECK(taxel_of(p) == t);
        CHECK_FALSE(is_padding(p.row, p.col));
        used.insert({p.channel, p.row, p.col});
    }
    CHECK(used.size() == kTactileDim);
    // The thumb block has 4 padded rows per channel: 3 * 4 * 4 = 48 padding pixels.
    std::size_t padding = 0;
    for (std::size_t c = 0; c < kAxes; ++c)
        for (std::size_t r = 0; r < kImageSize; ++r)
            for (std::size_t q = 0; q < kImageSize; ++q) {
                if (is_padding(r, q)) {
                    ++padding;
                    CHECK_FALSE(taxel_of({c, r, q}).has_value());
                }
            }
    CHECK(padding == 48);
}

TEST_CASE("image of a frame inverts back to the frame") {
    Rng rng(4);
    std::vector<double> v(kTactileDim);
    for (double& x : v) x = uniform(rng, 0.0, 1.0);
    const TactileFrame f = TactileFrame::from_flat(v);
    const Image img = tactile_image(f, 0.25);
    CHECK(frame_from_image(img) == f);
    for (std::size_t r = 12; r < 16; ++r) CHECK(img.at(0, r, 13) == 0.25);
}

TEST_CASE("frames reject wrong sizes and non-finite values") {
    std::vector<double> v(719, 0.0);
    CHECK_THROWS_AS(TactileFrame::from_flat(v), DataError);
    v.push_back(NAN);
    CHECK_THROWS_AS(TactileFrame::from_flat(v), DataError);
    TactileFrame f;
    CHECK_THROWS_AS(f.set({0, 0, 0, 0}, INFINITY), DataError);
}

TEST_CASE("normalization is per-axis min-max with clamping") {
    TactileFrame a, b;
    a.set({0, 0, 0, 0}, -2.0);
    b.set({1, 0, 0, 0}, 6.0);
    b.set({1, 0, 0, 2}, 3.0);
    const std::vector<TactileFrame> frames{a, b};
    const NormStats s = fit_norm_stats(frames);
    CHECK(s.min[0] == -2.0);
    CHECK(s.max[0] == 6.0);
    CHECK(s.min[1] == 0.0);
    CHECK(s.max[1] == 0.0);
    const TactileFrame n = normalize(b, s);
    CHECK(n.at(1, 0, 0, 0) == doctest::Approx(1.0));
    CHECK(n.at(0, 0, 0, 0) == doctest::Approx(0.25));
    CHECK(n.at(0, 0, 0, 1) == 0.0);  // constant axis
    TactileFrame big;
    big.set({2, 1, 1, 0}, 100.0);
    CHECK(normalize(big, s).at(2, 1, 1, 0) == 1.0);
}

TEST_CASE("upscale is nearest neighbour and rejects shrinking") {
    Image img(1, 16, 16);
    img.at(0, 3, 5) = 1.0;
    const Image up = upscale(img, 32);
    CHECK(up.at(0, 6, 10) == 1.0);
    CHECK(up.at(0, 7, 11) == 1.0);
    CHECK(up.at(0, 8, 10) == 0.0);
    CHECK_THROWS_AS(upscale(img, 8), UsageError);
}

TEST_CASE("pad permutation moves whole pads") {
    PadPermutation p = identity_permutation();
    CHECK(is_valid_permutation(p));
    std::swap(p[0], p[14]);
    CHECK(is_valid_permutation(p));
    PadPermutation bad = p;
    bad[1] = bad[2];
    CHECK_FALSE(is_valid_permutation(bad));
    TactileFrame f;
    f.set({14, 2, 3, 1}, 5.0);
    CHECK(permute_pads(f, p).at(0, 2, 3, 1) == 5.0);
    CHECK(permute_pads(f, identity_permutation()) == f);
}

TEST_CASE("action array round trip and validation") {
    Action a;
    a.ee_pos = {0.1, 0.2, 0.3};
    a.joints[7] = 0.5;
    const auto arr = a.to_array();
    CHECK(arr.size() == kActionDim);
    CHECK(Action::from_span(arr) == a);
    CHECK_THROWS_AS(Action::from_span(std::vector<double>(22)), DataError);
    a.ee_quat = {2.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(validate_action(a), DataError);
}

TEST_CASE("trajectory validation catches time reversal") {
    Trajectory t;
    t.frames.resize(2);
    t.frames[0].t = 1.0;
    t.frames[1].t = 1.0;
    CHECK_THROWS_AS(t.validate(), DataError);
    t.frames[1].t = 1.1;
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("derived seeds are stable and stage-specific") {
    static_assert(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(5, 1, 2) == derive_seed(derive_seed(5, 1), 2));
}
