#include "tdex/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tdex/error.hpp"

namespace tdex {

TactileFrame TactileFrame::from_flat(std::span<const double> values) {
    if (values.size() != kTactileDim) {
        throw DataError("tactile frame needs " + std::to_string(kTactileDim) + " values, got " +
                        std::to_string(values.size()));
    }
    TactileFrame f;
    for (std::size_t i = 0; i < kTactileDim; ++i) {
        if (!std::isfinite(values[i])) {
            throw DataError("non-finite tactile value at index " + std::to_string(i));
        }
        f.values_[i] = values[i];
    }
    return f;
}

void TactileFrame::set(const TaxelIndex& t, double v) {
    if (!std::isfinite(v)) throw DataError("non-finite tactile value");
    values_[flat_index(t)] = v;
}

std::array<double, kActionDim> Action::to_array() const {
    std::array<double, kActionDim> out{};
    std::copy(ee_pos.begin(), ee_pos.end(), out.begin());
    std::copy(ee_quat.begin(), ee_quat.end(), out.begin() + 3);
    std::copy(joints.begin(), joints.end(), out.begin() + 7);
    return out;
}

Action Action::from_span(std::span<const double> v) {
    if (v.size() != kActionDim) {
        throw DataError("action needs 23 values, got " + std::to_string(v.size()));
    }
    Action a;
    std::copy(v.begin(), v.begin() + 3, a.ee_pos.begin());
    std::copy(v.begin() + 3, v.begin() + 7, a.ee_quat.begin());
    std::copy(v.begin() + 7, v.end(), a.joints.begin());
    return a;
}

double quat_norm(const Quat& q) {
    return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
}

namespace {

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw DataError(std::string("non-finite value in ") + what);
    }
}

void check_quat(const Quat& q, const char* what) {
    if (std::abs(quat_norm(q) - 1.0) > 1e-6) {
        throw DataError(std::string(what) + " quaternion is not unit norm");
    }
}

}  // namespace

void validate_state(const RobotState& s) {
    check_finite(s.ee_pos, "ee_pos");
    check_finite(s.joints, "joints");
    for (const auto& tip : s.fingertips) check_finite(tip, "fingertips");
    check_quat(s.ee_quat, "state");
}

void validate_action(const Action& a) {
    check_finite(a.ee_pos, "action ee_pos");
    check_finite(a.joints, "action joints");
    check_quat(a.ee_quat, "action");
}

void Trajectory::validate() const {
    std::optional<std::size_t> visual_dim;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (!std::isfinite(f.t)) throw DataError("non-finite timestamp");
        if (i > 0 && !(f.t > frames[i - 1].t)) {
            throw DataError("timestamps not strictly increasing at frame " + std::to_string(i));
        }
        validate_state(f.state);
        if (f.action) validate_action(*f.action);
        if (f.visual) {
            check_finite(*f.visual, "visual_feature");
            if (visual_dim && *visual_dim != f.visual->size()) {
                throw DataError("visual feature dimension changes at frame " + std::to_string(i));
            }
            visual_dim = f.visual->size();
        }
    }
}

NormStats fit_norm_stats(std::span<const TactileFrame> frames) {
    if (frames.empty()) throw DataError("empty dataset");
    NormStats s;
    s.min.fill(std::numeric_limits<double>::infinity());
    s.max.fill(-std::numeric_limits<double>::infinity());
    for (const auto& f : frames) {
        const auto v = f.flat();
        for (std::size_t i = 0; i < kTactileDim; ++i) {
            if (!std::isfinite(v[i])) throw DataError("non-finite tactile value");
            const std::size_t c = i % kAxes;
            s.min[c] = std::min(s.min[c], v[i]);
            s.max[c] = std::max(s.max[c], v[i]);
        }
    }
    return s;
}

TactileFrame normalize(const TactileFrame& frame, const NormStats& stats) {
    std::array<double, kTactileDim> out{};
    const auto v = frame.flat();
    for (std::size_t i = 0; i < kTactileDim; ++i) {
        const std::size_t c = i % kAxes;
        const double range = stats.max[c] - stats.min[c];
        if (!(range > 0.0)) {
            out[i] = 0.0;
            continue;
        }
        out[i] = std::clamp((v[i] - stats.min[c]) / range, 0.0, 1.0);
    }
    return TactileFrame::from_flat(out);
}

PixelIndex pixel_of(const TaxelIndex& t) {
    const std::size_t finger = finger_of_pad(t.pad);
    return PixelIndex{t.axis, pad_in_finger(t.pad) * kPadRows + t.row, finger * kPadCols + t.col};
}

bool is_padding(std::size_t row, std::size_t col) {
    return col >= (kNumFingers - 1) * kPadCols && row >= kThumbPads * kPadRows;
}

std::optional<TaxelIndex> taxel_of(const PixelIndex& p) {
    if (p.channel >= kAxes || p.row >= kImageSize || p.col >= kImageSize) return std::nullopt;
    if (is_padding(p.row, p.col)) return std::nullopt;
    const std::size_t finger = p.col / kPadCols;
    const std::size_t pad = finger * 4 + p.row / kPadRows;
    return TaxelIndex{pad, p.row % kPadRows, p.col % kPadCols, p.channel};
}

Image tactile_image(const TactileFrame& normalized, double pad_value) {
    Image img(kAxes, kImageSize, kImageSize, pad_value);
    const auto v = normalized.flat();
    for (std::size_t i = 0; i < kTactileDim; ++i) {
        img.at(pixel_of(taxel_from_flat(i))) = v[i];
    }
    return img;
}

Image tactile_image(const TactileFrame& frame, const NormStats& stats, double pad_value) {
    return tactile_image(normalize(frame, stats), pad_value);
}

TactileFrame frame_from_image(const Image& image) {
    if (image.channels() != kAxes || image.height() != kImageSize || image.width() != kImageSize) {
        throw DataError("frame_from_image expects a 3x16x16 image");
    }
    std::array<double, kTactileDim> out{};
    for (std::size_t i = 0; i < kTactileDim; ++i) {
        out[i] = image.at(pixel_of(taxel_from_flat(i)));
    }
    return TactileFrame::from_flat(out);
}

Image upscale(const Image& image, std::size_t size) {
    if (size < kImageSize) {
        throw UsageError("upscale size must be >= 16, got " + std::to_string(size));
    }
    Image out(image.channels(), size, size);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < size; ++r) {
            const std::size_t sr = r * image.height() / size;
            for (std::size_t col = 0; col < size; ++col) {
                out.at(c, r, col) = image.at(c, sr, col * image.width() / size);
            }
        }
    }
    return out;
}

PadPermutation identity_permutation() {
    PadPermutation p{};
    for (std::size_t i = 0; i < kNumPads; ++i) p[i] = i;
    return p;
}

bool is_valid_permutation(const PadPermutation& perm) {
    std::array<bool, kNumPads> seen{};
    for (std::size_t v : perm) {
        if (v >= kNumPads || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

TactileFrame permute_pads(const TactileFrame& frame, const PadPermutation& perm) {
    if (!is_valid_permutation(perm)) throw UsageError("invalid pad permutation");
    std::array<double, kTactileDim> out{};
    const auto v = frame.flat();
    for (std::size_t dst = 0; dst < kNumPads; ++dst) {
        std::copy_n(v.begin() + perm[dst] * kValuesPerPad, kValuesPerPad,
                    out.begin() + dst * kValuesPerPad);
    }
    return TactileFrame::from_flat(out);
}

}  // namespace tdex
