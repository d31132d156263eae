#pragma once

#include "tdex/core.hpp"
#include "tdex/rng.hpp"

namespace tdex {

/// Tactile augmentations: Gaussian blur then random resized crop, each applied
/// independently with its own probability.
struct AugmentConfig {
    double blur_sigma_min = 1.0;
    double blur_sigma_max = 2.0;
    double blur_p = 0.5;
    double crop_scale_min = 0.9;  // area fraction
    double crop_scale_max = 1.0;
    double crop_p = 0.5;

    static AugmentConfig none() { return {1.0, 2.0, 0.0, 0.9, 1.0, 0.0}; }
    void validate() const;  // throws UsageError
};

/// 3x3 Gaussian blur with reflect-padded borders.
Image gaussian_blur3(const Image& image, double sigma);

/// Square crop of `area_fraction` of the image with top-left corner (top, left)
/// in pixel units, resized back to the input size bilinearly.
Image resized_crop(const Image& image, double area_fraction, double top, double left);

Image augment(const Image& image, const AugmentConfig& cfg, Rng& rng);

}  // namespace tdex
