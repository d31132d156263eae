#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdex/augment.hpp"
#include "tdex/byol.hpp"
#include "tdex/error.hpp"

using namespace tdex;

namespace {

ByolConfig small_config(EncoderArch arch, bool predictor, std::uint64_t seed) {
    ByolConfig cfg;
    cfg.arch = arch;
    cfg.use_predictor = predictor;
    cfg.proj_hidden = 16;
    cfg.proj_dim = 8;
    cfg.pred_hidden = 12;
    cfg.seed = seed;
    return cfg;
}

Tensor views(EncoderArch arch, Rng& rng, std::size_t n) {
    const auto frames = testing::random_frames(rng, n);
    const auto images = encoder_images(frames, fit_norm_stats(frames), std::nullopt);
    return encoder_batch(arch, images);
}

}  // namespace

TEST_CASE("loss is exactly zero when both views match and target equals online without a predictor") {
    Rng rng(1);
    ByolState s = ByolState::create(small_config(EncoderArch::tdex3, false, 3));
    const Tensor v = views(EncoderArch::tdex3, rng, 4);
    const ByolLoss l = byol_loss(s, v, v);
    CHECK(l.loss == 0.0);
    for (double t : l.terms) CHECK(t == 0.0);
}

TEST_CASE("antipodal predictions give the maximal loss of 4") {
    Rng rng(2);
    ByolState s = ByolState::create(small_config(EncoderArch::tdex3, false, 4));
    // Negating the target projector's last layer flips every target projection.
    for (const char* name : {"proj.2.weight", "proj.2.bias"}) {
        Tensor& t = s.target.mutable_value(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = -t[i];
    }
    const Tensor v = views(EncoderArch::tdex3, rng, 3);
    const ByolLoss l = byol_loss(s, v, v);
    CHECK(l.loss == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("loss stays within [0, 4] for random states and views") {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ByolState s = ByolState::create(small_config(EncoderArch::stacked, true, seed));
        const ByolLoss l = byol_loss(s, views(EncoderArch::stacked, rng, 3), views(EncoderArch::stacked, rng, 3));
        CHECK(l.loss >= 0.0);
        CHECK(l.loss <= 4.0);
        for (double t : l.terms) {
            CHECK(t >= 0.0);
            CHECK(t <= 4.0 + 1e-12);
        }
    }
}

TEST_CASE("BYOL gradients match finite differences for every architecture") {
    Rng rng(7);
    for (EncoderArch arch : {EncoderArch::tdex3, EncoderArch::stacked, EncoderArch::shared}) {
        for (bool pred : {true, false}) {
            ByolState s = ByolState::create(small_config(arch, pred, 11));
            testing::jitter_biases(s.online, rng);
            // Move the target away from the online network so the loss is non-trivial.
            for (auto& e : s.target.mutable_entries())
                for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += 0.05 * gaussian(rng, 1.0);
            const Tensor v1 = views(arch, rng, 2);
            const Tensor v2 = views(arch, rng, 2);
            const auto g = testing::check_byol_gradients(s, v1, v2, 13, 4);
            const std::string msg =
                std::string(to_string(arch)) + (pred ? " with" : " without") + " predictor: " + g.worst;
            INFO(msg);
            CHECK(g.max_rel < 1e-4);
        }
    }
}

TEST_CASE("gradients cover only the online branch and leave the target untouched") {
    Rng rng(8);
    ByolState s = ByolState::create(small_config(EncoderArch::tdex3, true, 2));
    const ParamStore before = s.target;
    const ByolLoss l = byol_loss(s, views(EncoderArch::tdex3, rng, 2), views(EncoderArch::tdex3, rng, 2));
    for (const auto& [name, g] : l.grads) CHECK(s.online.contains(name));
    CHECK(l.grads.count("pred.0.weight") == 1);
    for (const auto& e : before.entries()) CHECK(s.target.get(e.name) == e.value);
}

TEST_CASE("empty batches and mismatched views are rejected") {
    ByolState s = ByolState::create(small_config(EncoderArch::tdex3, true, 2));
    CHECK_THROWS_AS(byol_loss(s, Tensor({0, 3, 16, 16}), Tensor({0, 3, 16, 16})), DataError);
    CHECK_THROWS_AS(byol_loss(s, Tensor({1, 3, 16, 16}), Tensor({2, 3, 16, 16})), InvariantError);
}

TEST_CASE("EMA update endpoints and arithmetic") {
    ByolState s;
    s.online.add("enc.0.weight", Tensor({1}, 1.0));
    s.target.add("enc.0.weight", Tensor({1}, 0.0));
    s.ema_tau = 1.0;
    ema_update(s);
    CHECK(s.target.get("enc.0.weight")[0] == 0.0);
    s.ema_tau = 0.99;
    ema_update(s);
    CHECK(s.target.get("enc.0.weight")[0] == doctest::Approx(0.01).epsilon(1e-12));
    s.ema_tau = 0.0;
    ema_update(s);
    CHECK(s.target.get("enc.0.weight")[0] == 1.0);
}

TEST_CASE("loss falls over the first 50 training steps") {
    Rng rng(21);
    ByolConfig cfg = small_config(EncoderArch::tdex3, true, 5);
    ByolState s = ByolState::create(cfg);
    const auto frames = testing::random_frames(rng, 16);
    const auto images = encoder_images(frames, fit_norm_stats(frames), std::nullopt);
    std::vector<double> losses;
    for (std::size_t step = 0; step < 50; ++step) {
        std::vector<Image> a, b;
        for (const auto& img : images) {
            a.push_back(augment(img, cfg.augment, rng));
            b.push_back(augment(img, cfg.augment, rng));
        }
        const ByolLoss l = byol_loss(s, encoder_batch(cfg.arch, a), encoder_batch(cfg.arch, b));
        losses.push_back(l.loss);
        adam_step(s.online, l.grads, cfg.adam);
        ema_update(s);
    }
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        first += losses[i];
        last += losses[40 + i];
    }
    CHECK(last < first);
}

TEST_CASE("pretraining is deterministic and keeps the lowest-loss epoch") {
    Rng rng(30);
    const auto frames = testing::random_frames(rng, 24);
    ByolConfig cfg = small_config(EncoderArch::tdex3, true, 6);
    cfg.epochs = 4;
    cfg.batch = 8;
    std::vector<double> seen;
    const PretrainResult a = pretrain(frames, cfg, [&](std::size_t, double l) { seen.push_back(l); });
    const PretrainResult b = pretrain(frames, cfg);
    CHECK(a.epoch_losses == b.epoch_losses);
    CHECK(seen == a.epoch_losses);
    CHECK(a.encoder_params.get("enc.0.weight") == b.encoder_params.get("enc.0.weight"));
    const auto best = std::min_element(a.epoch_losses.begin(), a.epoch_losses.end()) - a.epoch_losses.begin();
    CHECK(a.best_epoch == static_cast<std::size_t>(best));
    for (double w : a.encoder_params.get("enc.0.weight").vec()) CHECK(w == static_cast<double>(static_cast<float>(w)));
    CHECK_THROWS_AS(pretrain(std::vector<TactileFrame>{}, cfg), DataError);
}

TEST_CASE("augmentations: constant blur, identity crop, validation") {
    Image flat(3, 16, 16, 0.7);
    const Image blurred = gaussian_blur3(flat, 1.5);
    for (double v : blurred.pixels()) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
    Rng rng(1);
    Image img(3, 16, 16);
    for (double& v : img.pixels()) v = uniform(rng, 0.0, 1.0);
    const Image same = resized_crop(img, 1.0, 0.0, 0.0);
    for (std::size_t i = 0; i < img.pixels().size(); ++i) CHECK(same.pixels()[i] == doctest::Approx(img.pixels()[i]));
    CHECK(augment(img, AugmentConfig::none(), rng) == img);
    AugmentConfig bad;
    bad.blur_p = 1.5;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("identity pad permutation gives a bit-identical encoder image") {
    Rng rng(12);
    const auto frames = testing::random_frames(rng, 5);
    const NormStats st = fit_norm_stats(frames);
    CHECK(encoder_images(frames, st, identity_permutation()) == encoder_images(frames, st, std::nullopt));
    const auto perm = make_pad_permutation(3);
    CHECK(is_valid_permutation(perm));
    CHECK(perm == make_pad_permutation(3));
}
