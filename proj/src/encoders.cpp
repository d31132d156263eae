#include "tdex/encoders.hpp"

#include <algorithm>

#include "tdex/error.hpp"
#include "tdex/rng.hpp"

namespace tdex {

std::string_view to_string(EncoderArch arch) {
    switch (arch) {
        case EncoderArch::tdex3: return "tdex3";
        case EncoderArch::stacked: return "stacked";
        case EncoderArch::shared: return "shared";
    }
    return "?";
}

EncoderArch encoder_arch_from_string(std::string_view s) {
    if (s == "tdex3") return EncoderArch::tdex3;
    if (s == "stacked") return EncoderArch::stacked;
    if (s == "shared") return EncoderArch::shared;
    throw UsageError("unknown encoder architecture `" + std::string(s) + "`");
}

NetSpec encoder_net(EncoderArch arch, std::size_t image_size, const std::string& name) {
    using namespace layer;
    NetSpec net;
    net.name = name;
    switch (arch) {
        case EncoderArch::tdex3:
            net.input_shape = {kAxes, image_size, image_size};
            net.layers = {Conv2d{3, 16, 3, 2, 1}, Relu{}, Conv2d{16, 32, 3, 2, 1}, Relu{},
                          Conv2d{32, 64, 3, 2, 1}, Relu{}, GlobalAvgPool{}};
            break;
        case EncoderArch::stacked:
            net.input_shape = {kNumPads * kAxes, kPadRows, kPadCols};
            net.layers = {Conv2d{45, 32, 3, 1, 1}, Relu{}, Conv2d{32, 32, 3, 1, 1}, Relu{},
                          Conv2d{32, 64, 3, 1, 1}, Relu{}, GlobalAvgPool{}};
            break;
        case EncoderArch::shared:
            net.input_shape = {kAxes, kPadRows, kPadCols};
            net.layers = {Conv2d{3, 16, 3, 1, 1}, Relu{}, Conv2d{16, 16, 3, 1, 1}, Relu{},
                          Conv2d{16, kSharedPadFeatureDim, 3, 1, 1}, Relu{}, GlobalAvgPool{},
                          FoldRows{kNumPads}};
            break;
    }
    return net;
}

Tensor encoder_batch(EncoderArch arch, std::span<const Image> images, std::size_t image_size) {
    const std::size_t n = images.size();
    for (const auto& img : images) {
        if (img.channels() != kAxes || img.height() != kImageSize || img.width() != kImageSize) {
            throw InvariantError("encoder input must be 3x16x16 tactile images");
        }
    }
    switch (arch) {
        case EncoderArch::tdex3: {
            Tensor t({n, kAxes, image_size, image_size});
            const std::size_t per = kAxes * image_size * image_size;
            for (std::size_t i = 0; i < n; ++i) {
                if (image_size == kImageSize) {
                    std::copy(images[i].pixels().begin(), images[i].pixels().end(),
                              t.data().begin() + i * per);
                } else {
                    const Image up = upscale(images[i], image_size);
                    std::copy(up.pixels().begin(), up.pixels().end(), t.data().begin() + i * per);
                }
            }
            return t;
        }
        case EncoderArch::stacked:
        case EncoderArch::shared: {
            // Both use pad-major, axis, row, col order; only the row grouping differs.
            std::vector<double> data(n * kTactileDim);
            for (std::size_t i = 0; i < n; ++i) {
                const TactileFrame f = frame_from_image(images[i]);
                double* out = data.data() + i * kTactileDim;
                for (std::size_t p = 0; p < kNumPads; ++p)
                    for (std::size_t a = 0; a < kAxes; ++a)
                        for (std::size_t r = 0; r < kPadRows; ++r)
                            for (std::size_t c = 0; c < kPadCols; ++c)
                                *out++ = f.at(p, r, c, a);
            }
            if (arch == EncoderArch::stacked) {
                return Tensor({n, kNumPads * kAxes, kPadRows, kPadCols}, std::move(data));
            }
            return Tensor({n * kNumPads, kAxes, kPadRows, kPadCols}, std::move(data));
        }
    }
    throw InvariantError("unhandled encoder architecture");
}

PadPermutation make_pad_permutation(std::uint64_t seed) {
    PadPermutation p = identity_permutation();
    Rng rng(derive_seed(seed, "pad_permutation"));
    for (std::size_t i = kNumPads - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace tdex
