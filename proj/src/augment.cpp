#include "tdex/augment.hpp"

#include <algorithm>
#include <cmath>

#include "tdex/error.hpp"

namespace tdex {

void AugmentConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(blur_p) || !prob(crop_p)) throw UsageError("augmentation probabilities must be in [0,1]");
    if (!(blur_sigma_min > 0.0) || blur_sigma_max < blur_sigma_min) {
        throw UsageError("blur sigma range must be positive and ordered");
    }
    if (!(crop_scale_min > 0.0) || crop_scale_max > 1.0 || crop_scale_max < crop_scale_min) {
        throw UsageError("crop scale range must lie in (0,1]");
    }
}

namespace {

std::size_t reflect(long i, std::size_t n) {
    if (n == 1) return 0;
    if (i < 0) i = -i;
    if (i >= static_cast<long>(n)) i = 2 * static_cast<long>(n) - 2 - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

Image gaussian_blur3(const Image& image, double sigma) {
    const double side = std::exp(-1.0 / (2.0 * sigma * sigma));
    const double norm = 1.0 + 2.0 * side;
    const double k[3] = {side / norm, 1.0 / norm, side / norm};
    const std::size_t h = image.height(), w = image.width();
    Image tmp(image.channels(), h, w);
    Image out(image.channels(), h, w);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t col = 0; col < w; ++col) {
                double s = 0.0;
                for (long d = -1; d <= 1; ++d) {
                    s += k[d + 1] * image.at(c, r, reflect(static_cast<long>(col) + d, w));
                }
                tmp.at(c, r, col) = s;
            }
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t col = 0; col < w; ++col) {
                double s = 0.0;
                for (long d = -1; d <= 1; ++d) {
                    s += k[d + 1] * tmp.at(c, reflect(static_cast<long>(r) + d, h), col);
                }
                out.at(c, r, col) = s;
            }
    }
    return out;
}

Image resized_crop(const Image& image, double area_fraction, double top, double left) {
    const std::size_t h = image.height(), w = image.width();
    const double side_h = std::sqrt(area_fraction) * static_cast<double>(h);
    const double side_w = std::sqrt(area_fraction) * static_cast<double>(w);
    Image out(image.channels(), h, w);
    for (std::size_t r = 0; r < h; ++r) {
        const double y = std::clamp(top + (static_cast<double>(r) + 0.5) * side_h / static_cast<double>(h) - 0.5,
                                    0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t col = 0; col < w; ++col) {
            const double x = std::clamp(
                left + (static_cast<double>(col) + 0.5) * side_w / static_cast<double>(w) - 0.5, 0.0,
                static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = x - static_cast<double>(x0);
            for (std::size_t c = 0; c < image.channels(); ++c) {
                const double top_v = image.at(c, y0, x0) * (1.0 - fx) + image.at(c, y0, x1) * fx;
                const double bot_v = image.at(c, y1, x0) * (1.0 - fx) + image.at(c, y1, x1) * fx;
                out.at(c, r, col) = top_v * (1.0 - fy) + bot_v * fy;
            }
        }
    }
    return out;
}

Image augment(const Image& image, const AugmentConfig& cfg, Rng& rng) {
    Image out = image;
    if (bernoulli(rng, cfg.blur_p)) {
        out = gaussian_blur3(out, uniform(rng, cfg.blur_sigma_min, cfg.blur_sigma_max));
    }
    if (bernoulli(rng, cfg.crop_p)) {
        const double area = cfg.crop_scale_max > cfg.crop_scale_min
                                ? uniform(rng, cfg.crop_scale_min, cfg.crop_scale_max)
                                : cfg.crop_scale_min;
        const double side = std::sqrt(area);
        const double slack_h = (1.0 - side) * static_cast<double>(out.height());
        const double slack_w = (1.0 - side) * static_cast<double>(out.width());
        const double top = slack_h > 0.0 ? uniform(rng, 0.0, slack_h) : 0.0;
        const double left = slack_w > 0.0 ? uniform(rng, 0.0, slack_w) : 0.0;
        out = resized_crop(out, area, top, left);
    }
    return out;
}

}  // namespace tdex
