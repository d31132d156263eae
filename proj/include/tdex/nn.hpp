#pragma once

// Small feed-forward networks with explicit forward/backward passes and Adam.
//
// Tensors are batch-first. Image layers use [N, C, H, W]; vector layers use
// [N, D]. A network's parameters live in a ParamStore under
// "<net name>.<layer index>.weight" / ".bias".

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tdex/tensor.hpp"

namespace tdex {

namespace layer {

struct Conv2d {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
};
struct Relu {};
struct GlobalAvgPool {};
struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
};
/// Row-wise L2 normalisation.
struct L2Normalize {};
/// [B*group, D] -> [B, group*D]; concatenates consecutive rows.
struct FoldRows {
    std::size_t group = 1;
};

}  // namespace layer

using LayerSpec = std::variant<layer::Conv2d, layer::Relu, layer::GlobalAvgPool, layer::Linear,
                               layer::L2Normalize, layer::FoldRows>;

std::string layer_name(const LayerSpec& layer);

struct NetSpec {
    std::string name;
    Shape input_shape;  // per row, without the batch dimension
    std::vector<LayerSpec> layers;

    /// Per-row output shape; throws InvariantError naming the first incompatible layer.
    Shape output_shape() const;
    std::size_t output_dim() const { return shape_numel(output_shape()); }
    /// Rows of input consumed per output row (product of FoldRows groups).
    std::size_t rows_per_sample() const;
    std::vector<std::string> param_names() const;
};

class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor m;  // Adam first moment
        Tensor v;  // Adam second moment
    };

    void add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    /// Mutable access bumps the version, invalidating outstanding tapes.
    Tensor& mutable_value(const std::string& name);

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& mutable_entries() {
        ++version_;
        return entries_;
    }
    std::size_t size() const { return entries_.size(); }
    std::size_t num_scalars() const;

    std::uint64_t step() const { return step_; }
    void set_step(std::uint64_t s) { step_ = s; }
    std::uint64_t version() const { return version_; }
    void touch() { ++version_; }

    /// Copies the entries whose names start with `prefix`, without optimizer state.
    ParamStore subset(const std::string& prefix) const;
    void round_to_f32();

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t step_ = 0;
    std::uint64_t version_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Adds `src` into `dst` entrywise (allocating missing entries).
void accumulate(Gradients& dst, const Gradients& src);

/// Kaiming-uniform (fan-in, relu gain) weights, zero biases.
void init_params(const NetSpec& net, ParamStore& params, std::uint64_t seed);

struct Tape {
    const NetSpec* net = nullptr;
    const ParamStore* params = nullptr;
    std::uint64_t params_version = 0;
    std::vector<Tensor> inputs;  // input of each layer
    Tensor output;
};

struct ForwardResult {
    Tensor output;
    Tape tape;
};

struct BackwardResult {
    Gradients params;
    Tensor input;
};

/// `input` is [rows, input_shape...]. Throws InvariantError naming the
/// offending layer on a shape mismatch.
ForwardResult forward(const NetSpec& net, const ParamStore& params, const Tensor& input);
Tensor forward_only(const NetSpec& net, const ParamStore& params, const Tensor& input);

/// Throws InvariantError("stale tape") if params changed since the forward pass.
BackwardResult backward(const Tape& tape, const Tensor& grad_output);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2, folded into the gradient
};

/// One bias-corrected Adam step for every parameter that has a gradient.
void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& cfg);

}  // namespace tdex
