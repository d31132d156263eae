#include "tdex/byol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tdex/error.hpp"
#include "tdex/rng.hpp"

namespace tdex {

namespace {

NetSpec mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out) {
    NetSpec net;
    net.name = name;
    net.input_shape = {in};
    net.layers = {layer::Linear{in, hidden}, layer::Relu{}, layer::Linear{hidden, out}};
    return net;
}

double norm_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

constexpr double kEps = 1e-12;

// Accumulates the directional term ||p/|p| - t/|t| ||^2 of one sample and
// writes d(scale * term)/dp into `grad`.
double directional_term(std::span<const double> p, std::span<const double> t, double scale,
                         std::span<double> grad) {
    const double pn = std::max(norm_of(p), kEps);
    const double tn = std::max(norm_of(t), kEps);
    double term = 0.0;
    double u_dot_d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double u = p[k] / pn;
        const double d = u - t[k] / tn;
        term += d * d;
        u_dot_d += u * d;
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double u = p[k] / pn;
        const double d = u - t[k] / tn;
        grad[k] = scale * 2.0 * (d - u * u_dot_d) / pn;
    }
    return term;
}

}  // namespace

ByolState ByolState::create(const ByolConfig& cfg) {
    if (cfg.ema_tau < 0.0 || cfg.ema_tau > 1.0) throw UsageError("ema_tau must be in [0,1]");
    ByolState s;
    s.encoder = encoder_net(cfg.arch, cfg.image_size, "enc");
    const std::size_t feat = s.encoder.output_dim();
    s.projector = mlp("proj", feat, cfg.proj_hidden, cfg.proj_dim);
    s.predictor = mlp("pred", cfg.proj_dim, cfg.pred_hidden, cfg.proj_dim);
    s.use_predictor = cfg.use_predictor;
    s.ema_tau = cfg.ema_tau;
    init_params(s.encoder, s.online, derive_seed(cfg.seed, "byol/encoder"));
    init_params(s.projector, s.online, derive_seed(cfg.seed, "byol/projector"));
    if (s.use_predictor) init_params(s.predictor, s.online, derive_seed(cfg.seed, "byol/predictor"));
    for (const auto& e : s.online.entries()) {
        if (e.name.rfind("pred.", 0) != 0) s.target.add(e.name, e.value);
    }
    return s;
}

ByolLoss byol_loss(const ByolState& state, const Tensor& view1, const Tensor& view2) {
    if (view1.shape() != view2.shape()) throw InvariantError("BYOL views differ in shape");
    if (view1.rank() == 0 || view1.dim(0) == 0) throw DataError("BYOL batch is empty");

    struct Branch {
        ForwardResult enc, proj;
        std::optional<ForwardResult> pred;
        const Tensor& prediction() const { return pred ? pred->output : proj.output; }
    };
    auto online = [&](const Tensor& v) {
        Branch b{forward(state.encoder, state.online, v), {}, std::nullopt};
        b.proj = forward(state.projector, state.online, b.enc.output);
        if (state.use_predictor) b.pred = forward(state.predictor, state.online, b.proj.output);
        return b;
    };
    auto target = [&](const Tensor& v) {
        return forward_only(state.projector, state.target, forward_only(state.encoder, state.target, v));
    };

    const Branch b1 = online(view1);
    const Branch b2 = online(view2);
    const Tensor t1 = target(view1);
    const Tensor t2 = target(view2);

    const Tensor& p1 = b1.prediction();
    const Tensor& p2 = b2.prediction();
    const std::size_t batch = p1.dim(0);
    const double scale = 1.0 / (2.0 * static_cast<double>(batch));

    ByolLoss out;
    out.terms.resize(2 * batch);
    Tensor g1(p1.shape());
    Tensor g2(p2.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        out.terms[i] = directional_term(p1.row(i), t2.row(i), scale, g1.row(i));
        out.terms[batch + i] = directional_term(p2.row(i), t1.row(i), scale, g2.row(i));
    }
    for (double t : out.terms) total += t;
    out.loss = total * scale;

    auto back = [&](const Branch& b, const Tensor& g) {
        Tensor grad = g;
        if (b.pred) {
            auto r = backward(b.pred->tape, grad);
            accumulate(out.grads, r.params);
            grad = std::move(r.input);
        }
        auto rp = backward(b.proj.tape, grad);
        accumulate(out.grads, rp.params);
        auto re = backward(b.enc.tape, rp.input);
        accumulate(out.grads, re.params);
    };
    back(b1, g1);
    back(b2, g2);
    return out;
}

void ema_update(ByolState& state) {
    const double tau = state.ema_tau;
    for (auto& e : state.target.mutable_entries()) {
        const Tensor& online = state.online.get(e.name);
        if (online.shape() != e.value.shape()) throw InvariantError("EMA shape mismatch for " + e.name);
        auto t = e.value.data();
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = tau * t[k] + (1.0 - tau) * online[k];
    }
}

std::vector<Image> encoder_images(std::span<const TactileFrame> frames, const NormStats& stats,
                                  const std::optional<PadPermutation>& permutation) {
    std::vector<Image> images;
    images.reserve(frames.size());
    for (const auto& f : frames) {
        const TactileFrame n = normalize(f, stats);
        images.push_back(tactile_image(permutation ? permute_pads(n, *permutation) : n));
    }
    return images;
}

PretrainResult pretrain(std::span<const TactileFrame> frames, const ByolConfig& cfg,
                        const EpochCallback& on_epoch) {
    if (frames.empty()) throw DataError("empty dataset");
    if (cfg.batch == 0) throw UsageError("batch size must be positive");
    cfg.augment.validate();

    PretrainResult result;
    result.stats = fit_norm_stats(frames);
    const std::vector<Image> images = encoder_images(frames, result.stats, cfg.permutation);

    ByolState state = ByolState::create(cfg);
    result.encoder = state.encoder;
    result.encoder_params = state.online.subset("enc.");
    double best = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(images.size());
    std::vector<Image> v1, v2;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, "byol/order"), epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            v1.clear();
            v2.clear();
            for (std::size_t k = start; k < end; ++k) {
                Rng rng(derive_seed(cfg.seed, epoch, order[k]));
                v1.push_back(augment(images[order[k]], cfg.augment, rng));
                v2.push_back(augment(images[order[k]], cfg.augment, rng));
            }
            const ByolLoss l = byol_loss(state, encoder_batch(cfg.arch, v1, cfg.image_size),
                                         encoder_batch(cfg.arch, v2, cfg.image_size));
            adam_step(state.online, l.grads, cfg.adam);
            ema_update(state);
            ++state.step;
            loss_sum += l.loss * static_cast<double>(end - start);
        }
        const double mean = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(mean)) throw InvariantError("BYOL loss became non-finite");
        result.epoch_losses.push_back(mean);
        if (mean < best) {
            best = mean;
            result.best_epoch = epoch;
            result.encoder_params = state.online.subset("enc.");
        }
        if (on_epoch) on_epoch(epoch, mean);
    }
    result.encoder_params.round_to_f32();
    return result;
}

}  // namespace tdex
