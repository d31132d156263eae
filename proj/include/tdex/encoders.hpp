#pragma once

// Tactile encoder architectures and the adapters that turn tactile images
// into their input tensors.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "tdex/core.hpp"
#include "tdex/nn.hpp"

namespace tdex {

enum class EncoderArch {
    tdex3,    // 3-layer CNN over the spatial 3x16x16 image
    stacked,  // 3-layer CNN over pads stacked as a 45x4x4 tensor
    shared,   // one CNN applied to every 3x4x4 pad, outputs concatenated
};

std::string_view to_string(EncoderArch arch);
EncoderArch encoder_arch_from_string(std::string_view s);  // throws UsageError

inline constexpr std::size_t kSharedPadFeatureDim = 16;

/// `image_size` only affects tdex3 (input upscaled to image_size x image_size).
NetSpec encoder_net(EncoderArch arch, std::size_t image_size = kImageSize,
                    const std::string& name = "enc");

/// Builds the encoder input batch from 3x16x16 tactile images (already
/// normalized and, for the shuffled variant, pad-permuted).
Tensor encoder_batch(EncoderArch arch, std::span<const Image> images,
                     std::size_t image_size = kImageSize);

/// Deterministic Fisher-Yates permutation of the 15 pads.
PadPermutation make_pad_permutation(std::uint64_t seed);

}  // namespace tdex
