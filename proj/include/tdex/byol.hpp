#pragma once

// BYOL pretraining of tactile encoders.
//
// The online branch is encoder -> projector -> predictor, the target branch
// is an exponential moving average of the online encoder and projector. The
// loss is the squared distance between the L2-normalised online prediction of
// one view and the target projection of the other, symmetrised over views and
// averaged over the batch. Gradients flow only into the online branch.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tdex/augment.hpp"
#include "tdex/core.hpp"
#include "tdex/encoders.hpp"
#include "tdex/nn.hpp"

namespace tdex {

struct ByolConfig {
    EncoderArch arch = EncoderArch::tdex3;
    std::size_t image_size = kImageSize;
    std::optional<PadPermutation> permutation;  // shuffled-pad ablation
    bool use_predictor = true;
    std::size_t proj_hidden = 128;
    std::size_t proj_dim = 256;
    std::size_t pred_hidden = 128;
    double ema_tau = 0.99;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1e-5};
    std::size_t epochs = 1000;
    std::size_t batch = 1024;
    std::uint64_t seed = 0;
    AugmentConfig augment{};
};

struct ByolState {
    NetSpec encoder;
    NetSpec projector;
    NetSpec predictor;
    bool use_predictor = true;
    ParamStore online;  // enc.*, proj.*, pred.*
    ParamStore target;  // enc.*, proj.*
    double ema_tau = 0.99;
    std::uint64_t step = 0;

    /// Online params seeded from `cfg.seed`; target starts as a copy of online.
    static ByolState create(const ByolConfig& cfg);
};

struct ByolLoss {
    double loss = 0.0;
    Gradients grads;            // online parameters only
    std::vector<double> terms;  // per-sample directional terms, view1->view2 then view2->view1
};

/// `view1` and `view2` are encoder input batches of identical shape.
ByolLoss byol_loss(const ByolState& state, const Tensor& view1, const Tensor& view2);

/// target <- tau * target + (1 - tau) * online, for encoder and projector.
void ema_update(ByolState& state);

struct PretrainResult {
    NetSpec encoder;
    ParamStore encoder_params;  // rounded through float32, as stored in checkpoints
    NormStats stats;
    std::vector<double> epoch_losses;
    std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains on raw tactile frames (normalisation stats are fitted here) and
/// returns the encoder from the epoch with the lowest mean training loss.
PretrainResult pretrain(std::span<const TactileFrame> frames, const ByolConfig& cfg,
                        const EpochCallback& on_epoch = {});

/// Normalised (and optionally pad-permuted) tactile images for encoder input.
std::vector<Image> encoder_images(std::span<const TactileFrame> frames, const NormStats& stats,
                                  const std::optional<PadPermutation>& permutation);

}  // namespace tdex
