#pragma once

// Sensor geometry, domain types and the tactile image layout.
//
// A tactile reading is 15 pads x 4x4 taxels x 3 force axes. Pads are ordered
// finger-major: fingers 0..2 contribute 4 pads each (base to tip), the thumb
// contributes the last 3 pads (base to tip). Flat storage is pad-major, then
// taxel row, taxel column, axis, which matches the nested arrays of the
// trajectory file format.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace tdex {

inline constexpr std::size_t kNumPads = 15;
inline constexpr std::size_t kPadRows = 4;
inline constexpr std::size_t kPadCols = 4;
inline constexpr std::size_t kAxes = 3;
inline constexpr std::size_t kValuesPerPad = kPadRows * kPadCols * kAxes;  // 48
inline constexpr std::size_t kTactileDim = kNumPads * kValuesPerPad;       // 720
inline constexpr std::size_t kImageSize = 16;
inline constexpr std::size_t kNumFingers = 4;  // finger 3 is the thumb
inline constexpr std::size_t kThumbPads = 3;
inline constexpr std::size_t kNumJoints = 16;
inline constexpr std::size_t kActionDim = 23;

struct TaxelIndex {
    std::size_t pad = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t axis = 0;

    bool operator==(const TaxelIndex&) const = default;
};

struct PixelIndex {
    std::size_t channel = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const PixelIndex&) const = default;
};

constexpr std::size_t flat_index(const TaxelIndex& t) {
    return ((t.pad * kPadRows + t.row) * kPadCols + t.col) * kAxes + t.axis;
}

constexpr TaxelIndex taxel_from_flat(std::size_t i) {
    TaxelIndex t;
    t.axis = i % kAxes;
    i /= kAxes;
    t.col = i % kPadCols;
    i /= kPadCols;
    t.row = i % kPadRows;
    t.pad = i / kPadRows;
    return t;
}

/// One timestep of raw (uncalibrated) tactile readings. Values are always finite.
class TactileFrame {
public:
    TactileFrame() { values_.fill(0.0); }

    /// Throws DataError if `values` is not exactly 720 finite numbers.
    static TactileFrame from_flat(std::span<const double> values);

    double at(std::size_t pad, std::size_t row, std::size_t col, std::size_t axis) const {
        return values_[flat_index({pad, row, col, axis})];
    }
    double at(const TaxelIndex& t) const { return values_[flat_index(t)]; }

    /// Throws DataError for non-finite values.
    void set(const TaxelIndex& t, double v);

    std::span<const double, kTactileDim> flat() const { return values_; }

    bool operator==(const TactileFrame&) const = default;

private:
    std::array<double, kTactileDim> values_;
};

using Vec3 = std::array<double, 3>;
using Quat = std::array<double, 4>;  // (w, x, y, z)
using JointVector = std::array<double, kNumJoints>;

struct RobotState {
    Vec3 ee_pos{};
    Quat ee_quat{1.0, 0.0, 0.0, 0.0};
    JointVector joints{};
    std::array<Vec3, kNumFingers> fingertips{};

    bool operator==(const RobotState&) const = default;
};

/// 23-dim command: ee_pos | ee_quat | joints.
struct Action {
    Vec3 ee_pos{};
    Quat ee_quat{1.0, 0.0, 0.0, 0.0};
    JointVector joints{};

    std::array<double, kActionDim> to_array() const;
    static Action from_span(std::span<const double> v);  // throws DataError on size mismatch

    bool operator==(const Action&) const = default;
};

double quat_norm(const Quat& q);
void validate_state(const RobotState& s);  // unit quaternion within 1e-6
void validate_action(const Action& a);

struct TrajectoryFrame {
    double t = 0.0;
    TactileFrame tactile;
    RobotState state;
    std::optional<std::vector<double>> visual;
    std::optional<Action> action;
};

struct Trajectory {
    std::vector<TrajectoryFrame> frames;

    std::size_t size() const { return frames.size(); }
    bool empty() const { return frames.empty(); }

    /// Checks strictly increasing timestamps, constant visual dimension and
    /// quaternion norms. Throws DataError.
    void validate() const;
};

/// Per-axis global min/max over a training set.
struct NormStats {
    std::array<double, kAxes> min{};
    std::array<double, kAxes> max{};

    bool operator==(const NormStats&) const = default;
};

NormStats fit_norm_stats(std::span<const TactileFrame> frames);

/// Per-axis min-max scaling to [0,1], clamped. A constant axis maps to 0.
TactileFrame normalize(const TactileFrame& frame, const NormStats& stats);

/// Dense channel-major image (channels x height x width).
class Image {
public:
    Image() = default;
    Image(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
        : channels_(channels), height_(height), width_(width),
          pixels_(channels * height * width, fill) {}

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    double& at(std::size_t c, std::size_t r, std::size_t col) {
        return pixels_[(c * height_ + r) * width_ + col];
    }
    double at(std::size_t c, std::size_t r, std::size_t col) const {
        return pixels_[(c * height_ + r) * width_ + col];
    }
    double& at(const PixelIndex& p) { return at(p.channel, p.row, p.col); }
    double at(const PixelIndex& p) const { return at(p.channel, p.row, p.col); }

    std::span<double> pixels() { return pixels_; }
    std::span<const double> pixels() const { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> pixels_;
};

/// Finger block of a pad: fingers 0..2 own pads 4f..4f+3, the thumb pads 12..14.
constexpr std::size_t finger_of_pad(std::size_t pad) { return pad / 4; }
constexpr std::size_t pad_in_finger(std::size_t pad) { return pad % 4; }

/// Layout of the 3x16x16 tactile image. Each finger occupies a 4-column block
/// with its pads stacked base->tip from row 0; the thumb block has its last
/// 4 rows padded.
PixelIndex pixel_of(const TaxelIndex& t);
std::optional<TaxelIndex> taxel_of(const PixelIndex& p);
bool is_padding(std::size_t row, std::size_t col);

/// Layout only; `normalized` is expected to already be in [0,1].
Image tactile_image(const TactileFrame& normalized, double pad_value = 0.0);
Image tactile_image(const TactileFrame& frame, const NormStats& stats, double pad_value = 0.0);

/// Inverse layout; padding pixels are dropped.
TactileFrame frame_from_image(const Image& image);

/// Nearest-neighbour upsampling to size x size. Throws UsageError for size < 16.
Image upscale(const Image& image, std::size_t size);

/// Pad permutation: output pad i holds input pad perm[i].
using PadPermutation = std::array<std::size_t, kNumPads>;

PadPermutation identity_permutation();
bool is_valid_permutation(const PadPermutation& perm);
TactileFrame permute_pads(const TactileFrame& frame, const PadPermutation& perm);

}  // namespace tdex
