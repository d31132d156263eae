#include "tdex/featurizer.hpp"

#include <algorithm>
#include <string>

#include "tdex/checkpoint.hpp"
#include "tdex/error.hpp"

namespace tdex {

using nlohmann::json;

namespace {

constexpr std::pair<FeatureVariant, std::string_view> kVariantNames[] = {
    {FeatureVariant::tdex_image_cnn, "tdex_image_cnn"},
    {FeatureVariant::stacked_45ch_cnn, "stacked_45ch_cnn"},
    {FeatureVariant::shared_per_pad_cnn, "shared_per_pad_cnn"},
    {FeatureVariant::raw_720, "raw_720"},
    {FeatureVariant::pca_k, "pca_k"},
    {FeatureVariant::sum_pooled_45, "sum_pooled_45"},
    {FeatureVariant::shuffled_image_cnn, "shuffled_image_cnn"},
    {FeatureVariant::torque_proxy, "torque_proxy"},
};

constexpr std::size_t kCnnChunk = 256;

Tensor eigen_tensor(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return t;
}

Eigen::MatrixXd tensor_eigen(const Tensor& t, std::size_t rows, std::size_t cols) {
    if (t.size() != rows * cols) throw DataError("PCA tensor has wrong size");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t[r * cols + c];
    return m;
}

}  // namespace

std::string_view to_string(FeatureVariant v) {
    for (const auto& [variant, name] : kVariantNames) {
        if (variant == v) return name;
    }
    return "?";
}

FeatureVariant feature_variant_from_string(std::string_view s) {
    for (const auto& [variant, name] : kVariantNames) {
        if (name == s) return variant;
    }
    throw UsageError("unknown featurizer variant `" + std::string(s) + "`");
}

bool is_cnn_variant(FeatureVariant v) {
    return v == FeatureVariant::tdex_image_cnn || v == FeatureVariant::stacked_45ch_cnn ||
           v == FeatureVariant::shared_per_pad_cnn || v == FeatureVariant::shuffled_image_cnn;
}

EncoderArch arch_for(FeatureVariant v) {
    switch (v) {
        case FeatureVariant::tdex_image_cnn:
        case FeatureVariant::shuffled_image_cnn: return EncoderArch::tdex3;
        case FeatureVariant::stacked_45ch_cnn: return EncoderArch::stacked;
        case FeatureVariant::shared_per_pad_cnn: return EncoderArch::shared;
        default: throw UsageError("variant `" + std::string(to_string(v)) + "` has no encoder");
    }
}

JointVector pd_torque_targets(const JointVector& q, const JointVector& q_des, const JointVector& qd,
                              double kp, double kd) {
    if (kp < 0.0 || kd < 0.0) throw UsageError("PD gains must be non-negative");
    JointVector tau{};
    for (std::size_t j = 0; j < kNumJoints; ++j) tau[j] = kp * (q_des[j] - q[j]) - kd * qd[j];
    return tau;
}

std::vector<double> sum_pooled(const TactileFrame& frame) {
    std::vector<double> out(kNumPads * kAxes, 0.0);
    for (std::size_t p = 0; p < kNumPads; ++p)
        for (std::size_t r = 0; r < kPadRows; ++r)
            for (std::size_t c = 0; c < kPadCols; ++c)
                for (std::size_t a = 0; a < kAxes; ++a) out[p * kAxes + a] += frame.at(p, r, c, a);
    return out;
}

Featurizer Featurizer::raw() { return Featurizer{}; }

Featurizer Featurizer::sum_pooled_45() {
    Featurizer f;
    f.variant_ = FeatureVariant::sum_pooled_45;
    f.dim_ = kNumPads * kAxes;
    return f;
}

Featurizer Featurizer::torque(double kp, double kd) {
    if (kp < 0.0 || kd < 0.0) throw UsageError("PD gains must be non-negative");
    Featurizer f;
    f.variant_ = FeatureVariant::torque_proxy;
    f.dim_ = kNumJoints;
    f.kp_ = kp;
    f.kd_ = kd;
    return f;
}

Featurizer Featurizer::pca(PcaModel model) {
    if (model.input_dim() != kTactileDim) throw UsageError("tactile PCA must be fitted on 720-dim frames");
    Featurizer f;
    f.variant_ = FeatureVariant::pca_k;
    f.dim_ = model.k();
    // Held at checkpoint precision so a reloaded featurizer is bit-identical.
    const auto to_f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    model.mean = model.mean.unaryExpr(to_f32);
    model.components = model.components.unaryExpr(to_f32);
    model.explained_variance = model.explained_variance.unaryExpr(to_f32);
    f.pca_ = std::move(model);
    return f;
}

Featurizer Featurizer::cnn(FeatureVariant variant, NetSpec encoder, ParamStore params, NormStats stats,
                           std::optional<PadPermutation> permutation, std::size_t image_size) {
    if (!is_cnn_variant(variant)) throw UsageError("not a CNN variant");
    if (variant == FeatureVariant::shuffled_image_cnn) {
        if (!permutation) throw UsageError("shuffled_image_cnn needs a pad permutation");
    } else {
        permutation.reset();
    }
    if (permutation && !is_valid_permutation(*permutation)) throw UsageError("invalid pad permutation");
    for (const auto& name : encoder.param_names()) {
        if (!params.contains(name)) throw DataError("encoder parameter `" + name + "` missing");
    }
    Featurizer f;
    f.variant_ = variant;
    f.dim_ = encoder.output_dim();
    f.encoder_ = std::move(encoder);
    f.params_ = std::move(params);
    f.stats_ = stats;
    f.permutation_ = permutation;
    f.image_size_ = image_size;
    return f;
}

Featurizer Featurizer::from_pretrain(FeatureVariant variant, const PretrainResult& result,
                                     std::optional<PadPermutation> permutation, std::size_t image_size) {
    return cnn(variant, result.encoder, result.encoder_params, result.stats, permutation, image_size);
}

std::vector<double> Featurizer::operator()(const TactileFrame& frame, const ProprioContext* aux) const {
    if (variant_ == FeatureVariant::torque_proxy) {
        if (aux == nullptr) throw UsageError("torque_proxy featurizer needs proprioceptive context");
        const JointVector tau =
            pd_torque_targets(aux->state.joints, aux->desired_joints, aux->joint_velocity, kp_, kd_);
        return {tau.begin(), tau.end()};
    }
    const std::span<const TactileFrame> one(&frame, 1);
    const std::span<const ProprioContext> ctx = aux ? std::span<const ProprioContext>(aux, 1)
                                                   : std::span<const ProprioContext>{};
    return batch(one, ctx).front();
}

std::vector<std::vector<double>> Featurizer::batch(std::span<const TactileFrame> frames,
                                                   std::span<const ProprioContext> aux) const {
    std::vector<std::vector<double>> out;
    out.reserve(frames.size());
    switch (variant_) {
        case FeatureVariant::raw_720:
            for (const auto& f : frames) out.emplace_back(f.flat().begin(), f.flat().end());
            return out;
        case FeatureVariant::sum_pooled_45:
            for (const auto& f : frames) out.push_back(sum_pooled(f));
            return out;
        case FeatureVariant::pca_k:
            for (const auto& f : frames) out.push_back(pca_project(pca_, f));
            return out;
        case FeatureVariant::torque_proxy:
            if (aux.size() != frames.size()) {
                throw UsageError("torque_proxy featurizer needs proprioceptive context");
            }
            for (std::size_t i = 0; i < frames.size(); ++i) out.push_back((*this)(frames[i], &aux[i]));
            return out;
        default: break;
    }
    const EncoderArch arch = arch_for(variant_);
    for (std::size_t start = 0; start < frames.size(); start += kCnnChunk) {
        const std::size_t end = std::min(frames.size(), start + kCnnChunk);
        const auto images = encoder_images(frames.subspan(start, end - start), stats_, permutation_);
        const Tensor y = forward_only(encoder_, params_, encoder_batch(arch, images, image_size_));
        for (std::size_t i = 0; i < y.dim(0); ++i) out.emplace_back(y.row(i).begin(), y.row(i).end());
    }
    return out;
}

void Featurizer::save(const std::filesystem::path& dir) const {
    json meta = {{"kind", "featurizer"}, {"variant", to_string(variant_)}, {"dim", dim_}};
    ParamStore store;
    if (is_cnn_variant(variant_)) {
        meta["arch"] = to_string(arch_for(variant_));
        meta["image_size"] = image_size_;
        meta["norm_stats"] = {{"min", stats_.min}, {"max", stats_.max}};
        if (permutation_) meta["permutation"] = *permutation_;
        for (const auto& e : params_.entries()) store.add(e.name, e.value);
    } else if (variant_ == FeatureVariant::pca_k) {
        meta["total_variance"] = pca_.total_variance;
        store.add("pca.mean", eigen_tensor(pca_.mean.transpose()).reshaped({pca_.input_dim()}));
        store.add("pca.components", eigen_tensor(pca_.components));
        store.add("pca.explained_variance",
                  eigen_tensor(pca_.explained_variance.transpose()).reshaped({pca_.k()}));
    } else if (variant_ == FeatureVariant::torque_proxy) {
        meta["kp"] = kp_;
        meta["kd"] = kd_;
    }
    save_checkpoint(dir, store, meta);
}

Featurizer Featurizer::load(const std::filesystem::path& dir) {
    const Checkpoint ck = load_checkpoint(dir);
    try {
        const FeatureVariant v = feature_variant_from_string(ck.meta.at("variant").get<std::string>());
        switch (v) {
            case FeatureVariant::raw_720: return raw();
            case FeatureVariant::sum_pooled_45: return sum_pooled_45();
            case FeatureVariant::torque_proxy:
                return torque(ck.meta.at("kp").get<double>(), ck.meta.at("kd").get<double>());
            case FeatureVariant::pca_k: {
                const Tensor& comps = ck.params.get("pca.components");
                PcaModel m;
                const std::size_t k = comps.dim(0), d = comps.dim(1);
                m.components = tensor_eigen(comps, k, d);
                m.mean = tensor_eigen(ck.params.get("pca.mean"), d, 1);
                m.explained_variance = tensor_eigen(ck.params.get("pca.explained_variance"), k, 1);
                m.total_variance = ck.meta.at("total_variance").get<double>();
                return pca(std::move(m));
            }
            default: break;
        }
        const std::size_t image_size = ck.meta.at("image_size").get<std::size_t>();
        NormStats stats;
        stats.min = ck.meta.at("norm_stats").at("min").get<std::array<double, kAxes>>();
        stats.max = ck.meta.at("norm_stats").at("max").get<std::array<double, kAxes>>();
        std::optional<PadPermutation> perm;
        if (ck.meta.contains("permutation")) perm = ck.meta.at("permutation").get<PadPermutation>();
        return cnn(v, encoder_net(arch_for(v), image_size), ck.params, stats, perm, image_size);
    } catch (const json::exception& e) {
        throw DataError("malformed featurizer checkpoint: " + std::string(e.what()));
    }
}

}  // namespace tdex
