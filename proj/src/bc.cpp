#include "tdex/bc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tdex/error.hpp"
#include "tdex/rng.hpp"

namespace tdex {

namespace {

constexpr double kStdFloor = 1e-6;

void fit_standardizer(const std::vector<std::vector<double>>& xs, std::vector<double>& mean,
                      std::vector<double>& stdev) {
    const std::size_t d = xs.front().size();
    mean.assign(d, 0.0);
    stdev.assign(d, 0.0);
    for (const auto& x : xs)
        for (std::size_t k = 0; k < d; ++k) mean[k] += x[k];
    for (double& m : mean) m /= static_cast<double>(xs.size());
    for (const auto& x : xs)
        for (std::size_t k = 0; k < d; ++k) stdev[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
    for (double& s : stdev) {
        s = std::sqrt(s / static_cast<double>(xs.size()));
        if (s < kStdFloor) s = 1.0;
    }
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Tensor input_batch(const BcModel& m, const std::vector<std::vector<double>>& xs,
                   std::span<const std::size_t> idx) {
    const std::size_t d = m.in_mean.size();
    Tensor t({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) t[i * d + k] = (xs[idx[i]][k] - m.in_mean[k]) / m.in_std[k];
    return t;
}

Tensor target_batch(const BcModel& m, const std::vector<std::vector<double>>& ys,
                    std::span<const std::size_t> idx) {
    Tensor t({idx.size(), kActionDim});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t k = 0; k < kActionDim; ++k)
            t[i * kActionDim + k] = (ys[idx[i]][k] - m.out_mean[k]) / m.out_std[k];
    return t;
}

double mse(const Tensor& pred, const Tensor& target, Tensor* grad) {
    const double n = static_cast<double>(pred.size());
    double s = 0.0;
    if (grad) *grad = Tensor(pred.shape());
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred[k] - target[k];
        s += d * d;
        if (grad) (*grad)[k] = 2.0 * d / n;
    }
    return s / n;
}

void split_rows(std::span<const IndexRow> rows, std::vector<std::vector<double>>& xs,
                std::vector<std::vector<double>>& ys) {
    for (const auto& r : rows) {
        xs.push_back(concat(r.visual, r.tactile));
        const auto a = r.action.to_array();
        ys.emplace_back(a.begin(), a.end());
    }
}

}  // namespace

BcModel bc_train(std::span<const IndexRow> rows, const BcConfig& cfg) {
    if (rows.empty()) throw DataError("behaviour cloning needs at least one demonstration frame");
    if (cfg.batch == 0) throw UsageError("batch size must be positive");

    BcModel m;
    m.visual_dim = rows.front().visual.size();
    m.tactile_dim = rows.front().tactile.size();
    std::vector<std::vector<double>> xs, ys;
    split_rows(rows, xs, ys);
    for (const auto& x : xs) {
        if (x.size() != m.visual_dim + m.tactile_dim) throw DataError("inconsistent feature dimensions");
    }
    fit_standardizer(xs, m.in_mean, m.in_std);
    fit_standardizer(ys, m.out_mean, m.out_std);

    const std::size_t in = m.visual_dim + m.tactile_dim;
    m.net.name = "bc";
    m.net.input_shape = {in};
    m.net.layers = {layer::Linear{in, cfg.hidden1}, layer::Relu{}, layer::Linear{cfg.hidden1, cfg.hidden2},
                    layer::Relu{}, layer::Linear{cfg.hidden2, kActionDim}};
    init_params(m.net, m.params, derive_seed(cfg.seed, "bc/init"));

    std::vector<std::size_t> order(xs.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(derive_seed(cfg.seed, "bc/order"), epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const ForwardResult fr = forward(m.net, m.params, input_batch(m, xs, idx));
            Tensor grad;
            m.step_losses.push_back(mse(fr.output, target_batch(m, ys, idx), &grad));
            const BackwardResult br = backward(fr.tape, grad);
            adam_step(m.params, br.params, cfg.adam);
        }
    }
    return m;
}

double bc_loss(const BcModel& model, std::span<const IndexRow> rows) {
    if (rows.empty()) throw DataError("empty row set");
    std::vector<std::vector<double>> xs, ys;
    split_rows(rows, xs, ys);
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Tensor y = forward_only(model.net, model.params, input_batch(model, xs, idx));
    return mse(y, target_batch(model, ys, idx), nullptr);
}

Action bc_predict(const BcModel& model, std::span<const double> visual, std::span<const double> tactile) {
    if (visual.size() != model.visual_dim || tactile.size() != model.tactile_dim) {
        throw DataError("feature dimensions do not match the BC model");
    }
    const std::vector<std::vector<double>> xs{concat(visual, tactile)};
    const std::size_t zero = 0;
    const Tensor y = forward_only(model.net, model.params, input_batch(model, xs, {&zero, 1}));
    std::array<double, kActionDim> a{};
    for (std::size_t k = 0; k < kActionDim; ++k) a[k] = y[k] * model.out_std[k] + model.out_mean[k];
    Action act = Action::from_span(a);
    const double n = quat_norm(act.ee_quat);
    if (n > 1e-12) {
        for (double& q : act.ee_quat) q /= n;
    } else {
        act.ee_quat = {1.0, 0.0, 0.0, 0.0};
    }
    return act;
}

BcPolicy::BcPolicy(const BcModel& model, const Featurizer& tactile, VisualFeaturizer visual)
    : model_(&model), tactile_(&tactile), visual_(std::move(visual)) {}

PolicyOutput BcPolicy::act(const Observation& obs) {
    const auto yv = visual_(obs.visual);
    const auto yt = (*tactile_)(obs.tactile, &obs.proprio);
    return PolicyOutput{bc_predict(*model_, yv, yt), std::nullopt, 0.0};
}

}  // namespace tdex
