#pragma once

// ContactWorld: a synthetic dexterous-manipulation benchmark.
//
// Latent state: the object's 2-D position (coarse, one of a few slots plus
// jitter), the grip variant the object demands (fine, a 16-dim closing
// configuration plus a joint-space manipulation direction) and the contact
// phase. Observations:
//   visual  = 4 dims encoding the object position (replaced by pure noise once
//             the hand touches the object) + 4 dims encoding the hand position;
//   tactile = exactly zero while approaching, grip-specific pad activations
//             scaled by closure once in contact.
// An episode succeeds when the hand grasps with the right configuration and
// then drives the joints one unit along the manipulation direction.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tdex/core.hpp"
#include "tdex/retrieval.hpp"
#include "tdex/rng.hpp"

namespace tdex {

enum class ContactPhase { approach, contact, manipulate };
std::string_view to_string(ContactPhase p);

enum class ContactPattern { blob, edge_rows, edge_cols, ring, diagonal };
inline constexpr std::size_t kNumPatterns = 5;

/// 4x4 activation template in [0,1]; (shift_r, shift_c) move it by fractions of a taxel.
double pattern_value(ContactPattern p, double row, double col, double shift_r, double shift_c);

struct GripVariant {
    JointVector grasp{};      // closed configuration
    JointVector manip_dir{};  // joint-space direction of the manipulation
    std::vector<std::size_t> pads;
    ContactPattern pattern = ContactPattern::blob;
    double shear_angle = 0.0;
};

struct ContactWorldSpec {
    std::string task = "grasp";
    std::uint64_t world_seed = 1;

    std::vector<std::array<double, 2>> slots;
    double slot_jitter = 0.004;
    std::vector<GripVariant> variants;       // objects of the task
    std::vector<GripVariant> play_variants;  // objects met during play (includes the task's)

    Vec3 start_ee{0.0, -0.06, 0.12};
    double start_jitter = 0.005;
    double object_height = 0.04;
    double contact_radius = 0.02;
    double contact_z_tol = 0.004;

    double ee_max_step = 0.02;
    double joint_max_step = 0.25;
    double joint_min = -0.5;
    double joint_max = 1.8;
    double close_tol = 0.06;
    double slip_tol = 0.12;
    double grip_jitter = 0.01;

    double expert_ee_step = 0.0035;
    double expert_joint_step = 0.05;
    double expert_progress_step = 0.1;

    double dt = 0.1;
    std::size_t step_budget = 150;

    std::size_t visual_dim = 8;
    double visual_noise = 0.01;
    double occlusion_noise = 0.05;
    std::array<double, 4 * 2> visual_object_basis{};  // 4x2
    std::array<double, 4 * 3> visual_hand_basis{};    // 4x3

    double tactile_gain = 100.0;
    double tactile_noise = 0.01;  // relative to tactile_gain
    std::array<double, kNumPads> pad_gain{};
    double contact_gain_min = 0.7;
    double contact_gain_max = 1.3;
    double pattern_shift = 0.5;

    std::size_t reject_k = 10;
    ModalityWeights weights{};
};

std::vector<std::string> contact_world_tasks();
/// Throws UsageError for an unknown task.
ContactWorldSpec contact_world_spec(std::string_view task);
/// Parses "synth:<task>".
ContactWorldSpec parse_env_uri(std::string_view uri);

/// Everything an episode draws at reset.
struct EpisodeInit {
    std::size_t slot = 0;
    std::size_t variant = 0;
    std::array<double, 2> object_xy{};
    JointVector grip_offset{};
    Vec3 start_ee{};
    double contact_gain = 1.0;
    std::array<double, 2> pattern_shift{};
    std::uint64_t noise_seed = 0;
};

EpisodeInit sample_episode(const ContactWorldSpec& spec, std::uint64_t seed);
std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode);
std::vector<EpisodeInit> episode_inits(const ContactWorldSpec& spec, std::size_t episodes, std::uint64_t seed);

struct WorldState {
    EpisodeInit init;
    GripVariant variant;  // with the episode's grip offset applied to `grasp`
    Vec3 ee{};
    Quat quat{1.0, 0.0, 0.0, 0.0};
    JointVector joints{};
    JointVector prev_joints{};
    JointVector commanded{};
    ContactPhase phase = ContactPhase::approach;
    bool grasped = false;
    double progress = 0.0;
    bool succeeded = false;
    bool failed = false;
    std::size_t steps = 0;
};

class ContactWorld : public Environment {
public:
    explicit ContactWorld(ContactWorldSpec spec);

    Observation reset(std::uint64_t episode_seed) override;
    /// `variant` overrides the task variant named by `init` (used for play).
    Observation reset(const EpisodeInit& init, const GripVariant* variant = nullptr);
    StepResult step(const Action& action) override;

    /// Free play never terminates: slips and drops just release the grasp.
    void set_free_play(bool on) { free_play_ = on; }

    const ContactWorldSpec& spec() const { return spec_; }
    const WorldState& state() const { return state_; }
    const Observation& last_observation() const { return obs_; }
    RobotState robot_state() const;

private:
    bool in_region() const;
    void update_phase();
    Observation observe();
    TactileFrame render_tactile();
    std::vector<double> render_visual();

    ContactWorldSpec spec_;
    WorldState state_;
    Observation obs_;
    Rng tactile_rng_;
    Rng visual_rng_;
    bool free_play_ = false;
};

/// Privileged scripted expert reading the true world state.
class ExpertPolicy : public Policy {
public:
    explicit ExpertPolicy(const ContactWorld& env) : env_(&env) {}
    PolicyOutput act(const Observation& obs) override;

private:
    const ContactWorld* env_;
};

class RandomPolicy : public Policy {
public:
    RandomPolicy(const ContactWorldSpec& spec, std::uint64_t seed);
    void reset() override;
    PolicyOutput act(const Observation& obs) override;

private:
    ContactWorldSpec spec_;
    std::uint64_t seed_;
    std::uint64_t episode_ = 0;
    Rng rng_;
};

/// Snapshot of the current observation as a trajectory frame (no action).
TrajectoryFrame observation_frame(const ContactWorld& env, double t);

/// Random exploratory play, about minutes * 60 / dt frames in total.
std::vector<Trajectory> generate_play(const ContactWorldSpec& spec, double minutes, std::uint64_t seed);

/// Scripted-expert demonstrations cycling through slot x variant. Throws
/// InvariantError if the expert fails.
std::vector<Trajectory> generate_demos(const ContactWorldSpec& spec, std::size_t n, std::uint64_t seed);

struct EvalResult {
    double success_rate = 0.0;
    std::size_t successes = 0;
    std::vector<EpisodeRecord> episodes;
};

/// Every episode starts from evaluation_seed(seed, i), so all policies see the
/// same initial-state list.
EvalResult evaluate(Policy& policy, ContactWorld& env, std::size_t episodes, std::uint64_t seed);
EvalResult evaluate(Policy& policy, const ContactWorldSpec& spec, std::size_t episodes, std::uint64_t seed);

/// Labelled tactile frames for representation checks: the label is the
/// contact pattern; pads, amplitude, shear angle and noise are nuisances.
struct LabelledFrames {
    std::vector<TactileFrame> frames;
    std::vector<int> labels;
};
LabelledFrames generate_clustered_tactile(std::size_t per_class, std::size_t classes, std::uint64_t seed);

/// Mean fraction of each point's k nearest neighbours (Euclidean, self
/// excluded, ties by index) that share its label.
double knn_purity(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  std::size_t k);

}  // namespace tdex
