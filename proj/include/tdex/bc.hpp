#pragma once

// Behaviour-cloning baseline: an MLP regressing actions from concatenated
// (visual, tactile) features with an MSE loss.

#include <cstdint>
#include <span>
#include <vector>

#include "tdex/nn.hpp"
#include "tdex/retrieval.hpp"

namespace tdex {

struct BcConfig {
    std::size_t epochs = 200;
    std::size_t batch = 64;
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 128;
    AdamConfig adam{};
    std::uint64_t seed = 0;
};

struct BcModel {
    NetSpec net;
    ParamStore params;
    std::size_t visual_dim = 0;
    std::size_t tactile_dim = 0;
    // Inputs and targets are standardized per dimension with these statistics.
    std::vector<double> in_mean, in_std;
    std::vector<double> out_mean, out_std;
    std::vector<double> step_losses;  // mean standardized MSE of every minibatch
};

/// Throws DataError on an empty row set.
BcModel bc_train(std::span<const IndexRow> rows, const BcConfig& cfg);

/// Mean standardized MSE of `model` over `rows`.
double bc_loss(const BcModel& model, std::span<const IndexRow> rows);

/// The quaternion slice of the output is renormalized.
Action bc_predict(const BcModel& model, std::span<const double> visual, std::span<const double> tactile);

class BcPolicy : public Policy {
public:
    BcPolicy(const BcModel& model, const Featurizer& tactile, VisualFeaturizer visual);
    PolicyOutput act(const Observation& obs) override;

private:
    const BcModel* model_;
    const Featurizer* tactile_;
    VisualFeaturizer visual_;
};

}  // namespace tdex
