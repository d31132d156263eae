#include "tdex/contact_world.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tdex/error.hpp"

namespace tdex {

namespace {

constexpr double kFingerLength = 0.05;

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 toward(const Vec3& from, const Vec3& to, double max_step) {
    Vec3 d{to[0] - from[0], to[1] - from[1], to[2] - from[2]};
    const double n = norm3(d);
    const double s = n > max_step ? max_step / n : 1.0;
    return {from[0] + s * d[0], from[1] + s * d[1], from[2] + s * d[2]};
}

double max_abs_diff(const JointVector& a, const JointVector& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < kNumJoints; ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

double max_abs(const JointVector& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

// Projection of (q - g) onto the manipulation direction, and the largest
// joint deviation from that line.
std::pair<double, double> manipulation_coords(const JointVector& q, const GripVariant& v) {
    double dd = 0.0, dq = 0.0;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        dd += v.manip_dir[j] * v.manip_dir[j];
        dq += (q[j] - v.grasp[j]) * v.manip_dir[j];
    }
    const double s = dd > 0.0 ? dq / dd : 0.0;
    double dev = 0.0;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        dev = std::max(dev, std::abs(q[j] - v.grasp[j] - s * v.manip_dir[j]));
    }
    return {s, dev};
}

GripVariant random_variant(Rng& rng, ContactPattern pattern) {
    GripVariant v;
    for (auto& g : v.grasp) g = uniform(rng, 0.15, 0.7);
    for (auto& d : v.manip_dir) d = uniform(rng, -0.25, 0.25);
    std::vector<std::size_t> pads(kNumPads);
    std::iota(pads.begin(), pads.end(), std::size_t{0});
    std::shuffle(pads.begin(), pads.end(), rng);
    v.pads.assign(pads.begin(), pads.begin() + 4);
    std::sort(v.pads.begin(), v.pads.end());
    v.pattern = pattern;
    v.shear_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return v;
}

ContactWorldSpec base_spec(std::string task, std::uint64_t world_seed,
                           std::array<ContactPattern, 2> task_patterns) {
    ContactWorldSpec s;
    s.task = std::move(task);
    s.world_seed = world_seed;
    s.slots = {{-0.05, 0.02}, {0.0, 0.05}, {0.05, 0.02}};
    Rng rng(derive_seed(world_seed, "contact_world/layout"));
    for (auto& a : s.visual_object_basis) a = gaussian(rng, 1.0);
    for (auto& a : s.visual_hand_basis) a = gaussian(rng, 1.0);
    for (auto& g : s.pad_gain) g = uniform(rng, 0.8, 1.2);
    for (ContactPattern p : task_patterns) s.variants.push_back(random_variant(rng, p));
    s.play_variants = s.variants;
    for (std::size_t i = 0; i < 2 * kNumPatterns; ++i) {
        s.play_variants.push_back(random_variant(rng, static_cast<ContactPattern>(i % kNumPatterns)));
    }
    return s;
}

}  // namespace

std::string_view to_string(ContactPhase p) {
    switch (p) {
        case ContactPhase::approach: return "approach";
        case ContactPhase::contact: return "contact";
        case ContactPhase::manipulate: return "manipulate";
    }
    return "?";
}

double pattern_value(ContactPattern p, double row, double col, double shift_r, double shift_c) {
    const double r = row - 1.5 - shift_r;
    const double c = col - 1.5 - shift_c;
    switch (p) {
        case ContactPattern::blob: return std::exp(-(r * r + c * c) / (2.0 * 0.8 * 0.8));
        case ContactPattern::edge_rows: return std::exp(-(r * r) / (2.0 * 0.5 * 0.5));
        case ContactPattern::edge_cols: return std::exp(-(c * c) / (2.0 * 0.5 * 0.5));
        case ContactPattern::ring: {
            const double rho = std::sqrt(r * r + c * c);
            return std::exp(-(rho - 1.6) * (rho - 1.6) / (2.0 * 0.4 * 0.4));
        }
        case ContactPattern::diagonal: {
            const double d = (r - c) / std::numbers::sqrt2;
            return std::exp(-(d * d) / (2.0 * 0.5 * 0.5));
        }
    }
    return 0.0;
}

std::vector<std::string> contact_world_tasks() { return {"grasp", "bottle", "joystick"}; }

ContactWorldSpec contact_world_spec(std::string_view task) {
    if (task == "grasp") return base_spec("grasp", 11, {ContactPattern::blob, ContactPattern::ring});
    if (task == "bottle") {
        auto s = base_spec("bottle", 23, {ContactPattern::edge_rows, ContactPattern::edge_cols});
        s.weights = {1.0, 2.0};
        return s;
    }
    if (task == "joystick") {
        auto s = base_spec("joystick", 37, {ContactPattern::diagonal, ContactPattern::blob});
        s.reject_k = 3;
        return s;
    }
    throw UsageError("unknown synthetic task `" + std::string(task) + "`");
}

ContactWorldSpec parse_env_uri(std::string_view uri) {
    constexpr std::string_view prefix = "synth:";
    if (uri.substr(0, prefix.size()) != prefix) {
        throw UsageError("environment must be synth:<task>, got `" + std::string(uri) + "`");
    }
    return contact_world_spec(uri.substr(prefix.size()));
}

EpisodeInit sample_episode(const ContactWorldSpec& spec, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "contact_world/episode"));
    EpisodeInit e;
    e.slot = static_cast<std::size_t>(rng() % spec.slots.size());
    e.variant = static_cast<std::size_t>(rng() % spec.variants.size());
    const auto& base = spec.slots[e.slot];
    for (std::size_t i = 0; i < 2; ++i) e.object_xy[i] = base[i] + uniform(rng, -spec.slot_jitter, spec.slot_jitter);
    for (auto& g : e.grip_offset) g = uniform(rng, -spec.grip_jitter, spec.grip_jitter);
    for (std::size_t i = 0; i < 3; ++i) {
        e.start_ee[i] = spec.start_ee[i] + uniform(rng, -spec.start_jitter, spec.start_jitter);
    }
    e.contact_gain = uniform(rng, spec.contact_gain_min, spec.contact_gain_max);
    for (auto& s : e.pattern_shift) s = uniform(rng, -spec.pattern_shift, spec.pattern_shift);
    e.noise_seed = rng();
    return e;
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode) {
    return derive_seed(derive_seed(seed, "contact_world/eval"), episode);
}

std::vector<EpisodeInit> episode_inits(const ContactWorldSpec& spec, std::size_t episodes, std::uint64_t seed) {
    std::vector<EpisodeInit> out;
    for (std::size_t i = 0; i < episodes; ++i) out.push_back(sample_episode(spec, evaluation_seed(seed, i)));
    return out;
}

ContactWorld::ContactWorld(ContactWorldSpec spec) : spec_(std::move(spec)) {
    if (spec_.slots.empty() || spec_.variants.empty()) throw UsageError("ContactWorld needs slots and variants");
    if (spec_.visual_dim != 8) throw UsageError("ContactWorld visual features are 8-dimensional");
}

Observation ContactWorld::reset(std::uint64_t episode_seed) { return reset(sample_episode(spec_, episode_seed)); }

Observation ContactWorld::reset(const EpisodeInit& init, const GripVariant* variant) {
    if (!variant && init.variant >= spec_.variants.size()) throw UsageError("variant out of range");
    state_ = WorldState{};
    state_.init = init;
    state_.variant = variant ? *variant : spec_.variants[init.variant];
    for (std::size_t j = 0; j < kNumJoints; ++j) state_.variant.grasp[j] += init.grip_offset[j];
    state_.ee = init.start_ee;
    state_.joints.fill(0.0);
    state_.prev_joints = state_.joints;
    state_.commanded = state_.joints;
    tactile_rng_.seed(derive_seed(init.noise_seed, "tactile"));
    visual_rng_.seed(derive_seed(init.noise_seed, "visual"));
    update_phase();
    obs_ = observe();
    return obs_;
}

bool ContactWorld::in_region() const {
    const double dx = state_.ee[0] - state_.init.object_xy[0];
    const double dy = state_.ee[1] - state_.init.object_xy[1];
    return std::sqrt(dx * dx + dy * dy) <= spec_.contact_radius &&
           state_.ee[2] <= spec_.object_height + spec_.contact_z_tol;
}

void ContactWorld::update_phase() {
    if (state_.grasped) {
        state_.phase = ContactPhase::manipulate;
    } else {
        state_.phase = in_region() ? ContactPhase::contact : ContactPhase::approach;
    }
}

StepResult ContactWorld::step(const Action& action) {
    if (state_.succeeded || state_.failed) throw UsageError("episode is over; call reset");
    validate_action(action);

    // End effector: bounded step, cannot sink into the object or the table.
    Vec3 ee = toward(state_.ee, action.ee_pos, spec_.ee_max_step);
    const double dx = ee[0] - state_.init.object_xy[0];
    const double dy = ee[1] - state_.init.object_xy[1];
    const double floor = std::sqrt(dx * dx + dy * dy) < 2.0 * spec_.contact_radius ? spec_.object_height - 0.002 : 0.005;
    ee[2] = std::max(ee[2], floor);
    state_.ee = ee;
    const double qn = quat_norm(action.ee_quat);
    for (std::size_t i = 0; i < 4; ++i) state_.quat[i] = action.ee_quat[i] / qn;

    state_.prev_joints = state_.joints;
    state_.commanded = action.joints;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        const double d = std::clamp(action.joints[j] - state_.joints[j], -spec_.joint_max_step, spec_.joint_max_step);
        state_.joints[j] = std::clamp(state_.joints[j] + d, spec_.joint_min, spec_.joint_max);
    }

    const bool region = in_region();
    if (state_.grasped) {
        const auto [s, dev] = manipulation_coords(state_.joints, state_.variant);
        state_.progress = s;
        if (!region || dev > spec_.slip_tol) {
            if (free_play_) {
                state_.grasped = false;
                state_.progress = 0.0;
            } else {
                state_.failed = true;
            }
        } else if (s >= 1.0) {
            if (free_play_) {
                state_.grasped = false;
                state_.progress = 0.0;
            } else {
                state_.succeeded = true;
            }
        }
    } else if (region) {
        // The fingers close on the object if they sweep through the grasp
        // configuration anywhere along this step.
        constexpr int kSubsteps = 16;
        for (int k = 1; k <= kSubsteps && !state_.grasped; ++k) {
            const double u = static_cast<double>(k) / kSubsteps;
            JointVector q{};
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                q[j] = state_.prev_joints[j] + u * (state_.joints[j] - state_.prev_joints[j]);
            }
            if (max_abs_diff(q, state_.variant.grasp) <= spec_.close_tol) {
                state_.grasped = true;
                state_.progress = manipulation_coords(state_.joints, state_.variant).first;
            }
        }
    }
    ++state_.steps;
    update_phase();

    StepResult r;
    r.obs = observe();
    obs_ = r.obs;
    r.success = state_.succeeded;
    r.done = state_.succeeded || state_.failed || (!free_play_ && state_.steps >= spec_.step_budget);
    return r;
}

RobotState ContactWorld::robot_state() const {
    RobotState s;
    s.ee_pos = state_.ee;
    s.ee_quat = state_.quat;
    s.joints = state_.joints;
    static constexpr std::array<Vec3, kNumFingers> kBase{{{-0.03, 0.03, -0.02},
                                                         {0.0, 0.03, -0.02},
                                                         {0.03, 0.03, -0.02},
                                                         {0.0, -0.03, -0.02}}};
    // Each joint of a finger swings the tip along its own direction.
    static constexpr std::array<Vec3, 4> kJointDir{{{0.0, -0.6, -0.8},
                                                    {0.6, 0.0, -0.8},
                                                    {0.0, 0.6, -0.8},
                                                    {-0.6, 0.0, -0.8}}};
    for (std::size_t f = 0; f < kNumFingers; ++f) {
        for (std::size_t i = 0; i < 3; ++i) {
            double offset = 0.0;
            for (std::size_t j = 0; j < 4; ++j) offset += kFingerLength * state_.joints[4 * f + j] * kJointDir[j][i];
            s.fingertips[f][i] = state_.ee[i] + kBase[f][i] + offset;
        }
    }
    return s;
}

TactileFrame ContactWorld::render_tactile() {
    TactileFrame frame;
    if (state_.phase == ContactPhase::approach) return frame;

    const GripVariant& v = state_.variant;
    const double s = state_.grasped ? std::clamp(state_.progress, 0.0, 1.2) : 0.0;
    double dist = 0.0;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        dist = std::max(dist, std::abs(state_.joints[j] - v.grasp[j] - s * v.manip_dir[j]));
    }
    const double closure = std::clamp(1.0 - dist / std::max(max_abs(v.grasp), 1e-6), 0.0, 1.0);
    const double amp = spec_.tactile_gain * state_.init.contact_gain * (0.25 + 0.75 * closure);
    const double theta = v.shear_angle + 0.5 * std::numbers::pi * std::clamp(s, 0.0, 1.0);
    const double noise = spec_.tactile_noise * spec_.tactile_gain;

    std::array<double, kTactileDim> values{};
    for (std::size_t p : v.pads) {
        for (std::size_t r = 0; r < kPadRows; ++r) {
            for (std::size_t c = 0; c < kPadCols; ++c) {
                const double z = amp * spec_.pad_gain[p] *
                                 pattern_value(v.pattern, static_cast<double>(r), static_cast<double>(c),
                                               state_.init.pattern_shift[0], state_.init.pattern_shift[1]);
                values[flat_index({p, r, c, 0})] = 0.5 * z * std::cos(theta);
                values[flat_index({p, r, c, 1})] = 0.5 * z * std::sin(theta);
                values[flat_index({p, r, c, 2})] = z;
            }
        }
    }
    for (double& x : values) x += gaussian(tactile_rng_, noise);
    return TactileFrame::from_flat(values);
}

std::vector<double> ContactWorld::render_visual() {
    std::vector<double> out(spec_.visual_dim, 0.0);
    if (state_.phase == ContactPhase::approach) {
        const double ox = state_.init.object_xy[0] / 0.05;
        const double oy = state_.init.object_xy[1] / 0.05;
        for (std::size_t i = 0; i < 4; ++i) {
            out[i] = spec_.visual_object_basis[2 * i] * ox + spec_.visual_object_basis[2 * i + 1] * oy +
                     gaussian(visual_rng_, spec_.visual_noise);
        }
    } else {
        // The hand covers the object.
        for (std::size_t i = 0; i < 4; ++i) out[i] = gaussian(visual_rng_, spec_.occlusion_noise);
    }
    const Vec3 h{state_.ee[0] / 0.05, state_.ee[1] / 0.05, state_.ee[2] / 0.05};
    for (std::size_t i = 0; i < 4; ++i) {
        out[4 + i] = spec_.visual_hand_basis[3 * i] * h[0] + spec_.visual_hand_basis[3 * i + 1] * h[1] +
                     spec_.visual_hand_basis[3 * i + 2] * h[2] + gaussian(visual_rng_, spec_.visual_noise);
    }
    return out;
}

Observation ContactWorld::observe() {
    Observation o;
    o.visual = render_visual();
    o.tactile = render_tactile();
    o.proprio.state = robot_state();
    o.proprio.desired_joints = state_.commanded;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        o.proprio.joint_velocity[j] = (state_.joints[j] - state_.prev_joints[j]) / spec_.dt;
    }
    return o;
}

PolicyOutput ExpertPolicy::act(const Observation&) {
    const WorldState& w = env_->state();
    const ContactWorldSpec& spec = env_->spec();
    PolicyOutput out;
    out.action.ee_quat = {1.0, 0.0, 0.0, 0.0};
    out.action.ee_pos = w.ee;
    out.action.joints = w.joints;
    switch (w.phase) {
        case ContactPhase::approach: {
            const Vec3 target{w.init.object_xy[0], w.init.object_xy[1], spec.object_height};
            out.action.ee_pos = toward(w.ee, target, spec.expert_ee_step);
            break;
        }
        case ContactPhase::contact: {
            const double m = max_abs_diff(w.variant.grasp, w.joints);
            const double s = m > spec.expert_joint_step ? spec.expert_joint_step / m : 1.0;
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                out.action.joints[j] = w.joints[j] + s * (w.variant.grasp[j] - w.joints[j]);
            }
            break;
        }
        case ContactPhase::manipulate: {
            const double s = std::min(w.progress + spec.expert_progress_step, 1.05);
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                out.action.joints[j] = w.variant.grasp[j] + s * w.variant.manip_dir[j];
            }
            break;
        }
    }
    return out;
}

RandomPolicy::RandomPolicy(const ContactWorldSpec& spec, std::uint64_t seed)
    : spec_(spec), seed_(seed), rng_(derive_seed(seed, "random_policy")) {}

void RandomPolicy::reset() { rng_.seed(derive_seed(derive_seed(seed_, "random_policy"), episode_++)); }

PolicyOutput RandomPolicy::act(const Observation&) {
    PolicyOutput out;
    out.action.ee_pos = {uniform(rng_, -0.08, 0.08), uniform(rng_, -0.08, 0.08), uniform(rng_, 0.0, 0.15)};
    for (auto& q : out.action.joints) q = uniform(rng_, spec_.joint_min, spec_.joint_max);
    return out;
}

TrajectoryFrame observation_frame(const ContactWorld& env, double t) {
    const Observation& o = env.last_observation();
    TrajectoryFrame f;
    f.t = t;
    f.tactile = o.tactile;
    f.state = o.proprio.state;
    f.visual = o.visual;
    return f;
}

namespace {

// One episode of scripted exploration in free-play mode.
Trajectory play_episode(ContactWorld& env, Rng& rng, std::size_t max_frames) {
    const ContactWorldSpec& spec = env.spec();
    EpisodeInit init = sample_episode(spec, rng());
    init.object_xy = {uniform(rng, -0.07, 0.07), uniform(rng, -0.01, 0.07)};
    const GripVariant& variant = spec.play_variants[rng() % spec.play_variants.size()];
    env.set_free_play(true);
    env.reset(init, &variant);

    Trajectory traj;
    const bool wander = bernoulli(rng, 0.15);
    const Vec3 aim_offset{gaussian(rng, 0.004), gaussian(rng, 0.004), 0.0};
    const double speed = uniform(rng, 0.6, 1.3);
    const double close_frac = uniform(rng, 0.4, 1.0);
    const std::size_t contact_steps = 25 + static_cast<std::size_t>(rng() % 40);
    std::size_t in_contact = 0;
    std::size_t release_steps = 0;
    double manip_target = 0.0;
    Vec3 wander_target{uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), uniform(rng, 0.05, 0.14)};

    const std::size_t limit = std::min<std::size_t>(max_frames, 90 + rng() % 40);
    for (std::size_t t = 0; t < limit; ++t) {
        const WorldState& w = env.state();
        Action a;
        a.ee_pos = w.ee;
        a.joints = w.joints;
        if (wander) {
            if (norm3({w.ee[0] - wander_target[0], w.ee[1] - wander_target[1], w.ee[2] - wander_target[2]}) < 0.01) {
                wander_target = {uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), uniform(rng, 0.03, 0.14)};
            }
            a.ee_pos = toward(w.ee, wander_target, spec.expert_ee_step * speed);
            for (auto& q : a.joints) q += gaussian(rng, 0.03);
        } else if (in_contact >= contact_steps) {
            // Release and lift.
            for (auto& q : a.joints) q *= 0.7;
            a.ee_pos = toward(w.ee, {w.ee[0] + gaussian(rng, 0.01), w.ee[1] + gaussian(rng, 0.01), 0.12},
                              spec.expert_ee_step * speed);
            if (++release_steps > 25) break;
        } else if (w.phase == ContactPhase::approach) {
            const Vec3 target{init.object_xy[0] + aim_offset[0], init.object_xy[1] + aim_offset[1],
                              spec.object_height};
            a.ee_pos = toward(w.ee, target, spec.expert_ee_step * speed);
            for (std::size_t i = 0; i < 3; ++i) a.ee_pos[i] += gaussian(rng, 0.001);
            if (in_contact > 0) ++in_contact;  // slipped out of the region
        } else {
            ++in_contact;
            if (w.phase == ContactPhase::contact) {
                JointVector goal{};
                for (std::size_t j = 0; j < kNumJoints; ++j) goal[j] = close_frac * w.variant.grasp[j];
                if (close_frac > 0.85) goal = w.variant.grasp;
                const double m = max_abs_diff(goal, w.joints);
                const double s = m > spec.expert_joint_step * speed ? spec.expert_joint_step * speed / m : 1.0;
                for (std::size_t j = 0; j < kNumJoints; ++j) {
                    a.joints[j] = w.joints[j] + s * (goal[j] - w.joints[j]) + gaussian(rng, 0.005);
                }
            } else {
                manip_target = std::clamp(manip_target + gaussian(rng, 0.12), -0.2, 1.2);
                for (std::size_t j = 0; j < kNumJoints; ++j) {
                    a.joints[j] = w.variant.grasp[j] + manip_target * w.variant.manip_dir[j] + gaussian(rng, 0.01);
                }
            }
            for (std::size_t i = 0; i < 2; ++i) a.ee_pos[i] += gaussian(rng, 0.0015);
        }
        traj.frames.push_back(observation_frame(env, static_cast<double>(t) * spec.dt));
        traj.frames.back().action = a;
        env.step(a);
    }
    env.set_free_play(false);
    return traj;
}

}  // namespace

std::vector<Trajectory> generate_play(const ContactWorldSpec& spec, double minutes, std::uint64_t seed) {
    if (!(minutes >= 0.0)) throw UsageError("play duration must be non-negative");
    const auto total = static_cast<std::size_t>(std::llround(minutes * 60.0 / spec.dt));
    ContactWorld env(spec);
    Rng rng(derive_seed(seed, "contact_world/play"));
    std::vector<Trajectory> out;
    std::size_t frames = 0;
    while (frames < total) {
        Trajectory t = play_episode(env, rng, total - frames);
        frames += t.size();
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::vector<Trajectory> generate_demos(const ContactWorldSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw UsageError("need at least one demonstration");
    ContactWorld env(spec);
    ExpertPolicy expert(env);
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < n; ++i) {
        EpisodeInit init = sample_episode(spec, derive_seed(derive_seed(seed, "contact_world/demo"), i));
        init.slot = i % spec.slots.size();
        init.variant = (i / spec.slots.size()) % spec.variants.size();
        Rng rng(derive_seed(init.noise_seed, "slot"));
        for (std::size_t k = 0; k < 2; ++k) {
            init.object_xy[k] = spec.slots[init.slot][k] + uniform(rng, -spec.slot_jitter, spec.slot_jitter);
        }
        env.reset(init);
        Trajectory traj;
        bool success = false;
        for (std::size_t t = 0; t < spec.step_budget; ++t) {
            TrajectoryFrame f = observation_frame(env, static_cast<double>(t) * spec.dt);
            const PolicyOutput out_action = expert.act(env.last_observation());
            f.action = out_action.action;
            traj.frames.push_back(std::move(f));
            const StepResult r = env.step(out_action.action);
            if (r.done) {
                success = r.success;
                break;
            }
        }
        if (!success) throw InvariantError("scripted expert failed demonstration " + std::to_string(i));
        out.push_back(std::move(traj));
    }
    return out;
}

EvalResult evaluate(Policy& policy, ContactWorld& env, std::size_t episodes, std::uint64_t seed) {
    EvalResult res;
    for (std::size_t i = 0; i < episodes; ++i) {
        EpisodeRecord rec = rollout(policy, env, env.spec().step_budget, evaluation_seed(seed, i));
        if (rec.success) ++res.successes;
        res.episodes.push_back(std::move(rec));
    }
    res.success_rate = episodes ? static_cast<double>(res.successes) / static_cast<double>(episodes) : 0.0;
    return res;
}

EvalResult evaluate(Policy& policy, const ContactWorldSpec& spec, std::size_t episodes, std::uint64_t seed) {
    ContactWorld env(spec);
    return evaluate(policy, env, episodes, seed);
}

LabelledFrames generate_clustered_tactile(std::size_t per_class, std::size_t classes, std::uint64_t seed) {
    if (classes == 0 || classes > kNumPatterns) throw UsageError("classes must be in [1, 5]");
    Rng rng(derive_seed(seed, "clustered_tactile"));
    LabelledFrames out;
    for (std::size_t i = 0; i < per_class * classes; ++i) {
        const auto label = static_cast<int>(i % classes);
        const auto pattern = static_cast<ContactPattern>(label);
        std::vector<std::size_t> pads(kNumPads);
        std::iota(pads.begin(), pads.end(), std::size_t{0});
        std::shuffle(pads.begin(), pads.end(), rng);
        pads.resize(2 + rng() % 3);
        const double amp = uniform(rng, 30.0, 100.0);
        const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double sr = uniform(rng, -0.5, 0.5), sc = uniform(rng, -0.5, 0.5);
        std::array<double, kTactileDim> values{};
        for (std::size_t p : pads) {
            for (std::size_t r = 0; r < kPadRows; ++r) {
                for (std::size_t c = 0; c < kPadCols; ++c) {
                    const double z = amp * pattern_value(pattern, static_cast<double>(r), static_cast<double>(c), sr, sc);
                    values[flat_index({p, r, c, 0})] = 0.5 * z * std::cos(theta);
                    values[flat_index({p, r, c, 1})] = 0.5 * z * std::sin(theta);
                    values[flat_index({p, r, c, 2})] = z;
                }
            }
        }
        for (double& x : values) x += gaussian(rng, 1.0);
        out.frames.push_back(TactileFrame::from_flat(values));
        out.labels.push_back(label);
    }
    return out;
}

double knn_purity(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  std::size_t k) {
    const std::size_t n = features.size();
    if (n != labels.size()) throw UsageError("features and labels differ in length");
    if (k == 0 || k >= n) throw UsageError("k must be in [1, n)");
    double total = 0.0;
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < features[i].size(); ++c) {
                const double x = features[i][c] - features[j][c];
                s += x * x;
            }
            d[j] = {j == i ? std::numeric_limits<double>::infinity() : s, j};
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        std::size_t same = 0;
        for (std::size_t m = 0; m < k; ++m) same += labels[d[m].second] == labels[i];
        total += static_cast<double>(same) / static_cast<double>(k);
    }
    return total / static_cast<double>(n);
}

}  // namespace tdex
