#pragma once

// Every tactile representation of the ablation menu behind one interface.

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tdex/byol.hpp"
#include "tdex/core.hpp"
#include "tdex/encoders.hpp"
#include "tdex/nn.hpp"
#include "tdex/pca.hpp"

namespace tdex {

enum class FeatureVariant {
    tdex_image_cnn,
    stacked_45ch_cnn,
    shared_per_pad_cnn,
    raw_720,
    pca_k,
    sum_pooled_45,
    shuffled_image_cnn,
    torque_proxy,
};

std::string_view to_string(FeatureVariant v);
FeatureVariant feature_variant_from_string(std::string_view s);  // throws UsageError
bool is_cnn_variant(FeatureVariant v);
EncoderArch arch_for(FeatureVariant v);  // CNN variants only

/// Proprioceptive context needed by the torque proxy.
struct ProprioContext {
    RobotState state;
    JointVector desired_joints{};  // position target the PD controller is tracking
    JointVector joint_velocity{};
};

/// tau = kp * (q_des - q) - kd * qd, no gravity term. Throws UsageError on negative gains.
JointVector pd_torque_targets(const JointVector& q, const JointVector& q_des, const JointVector& qd,
                              double kp, double kd);

/// Raw values summed over each pad's 4x4 taxels, ordered (pad0.x, pad0.y, pad0.z, pad1.x, ...).
std::vector<double> sum_pooled(const TactileFrame& frame);

class Featurizer {
public:
    static Featurizer raw();
    static Featurizer sum_pooled_45();
    static Featurizer torque(double kp = 1.0, double kd = 0.1);
    static Featurizer pca(PcaModel model);
    /// `permutation` is required for shuffled_image_cnn and ignored otherwise.
    static Featurizer cnn(FeatureVariant variant, NetSpec encoder, ParamStore params, NormStats stats,
                          std::optional<PadPermutation> permutation = std::nullopt,
                          std::size_t image_size = kImageSize);
    static Featurizer from_pretrain(FeatureVariant variant, const PretrainResult& result,
                                    std::optional<PadPermutation> permutation = std::nullopt,
                                    std::size_t image_size = kImageSize);

    FeatureVariant variant() const { return variant_; }
    std::size_t dim() const { return dim_; }
    const std::optional<PadPermutation>& permutation() const { return permutation_; }

    /// Throws UsageError if the torque proxy is called without `aux`.
    std::vector<double> operator()(const TactileFrame& frame, const ProprioContext* aux = nullptr) const;

    /// Batched form; `aux` is empty or one context per frame.
    std::vector<std::vector<double>> batch(std::span<const TactileFrame> frames,
                                           std::span<const ProprioContext> aux = {}) const;

    void save(const std::filesystem::path& dir) const;
    static Featurizer load(const std::filesystem::path& dir);

private:
    FeatureVariant variant_ = FeatureVariant::raw_720;
    std::size_t dim_ = kTactileDim;
    // CNN variants
    NetSpec encoder_;
    ParamStore params_;
    NormStats stats_;
    std::optional<PadPermutation> permutation_;
    std::size_t image_size_ = kImageSize;
    // pca_k
    PcaModel pca_;
    // torque_proxy
    double kp_ = 1.0;
    double kd_ = 0.1;
};

}  // namespace tdex
