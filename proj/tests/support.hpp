#pragma once

// Test helpers and independent oracles shared by the unit tests and the
// acceptance runner. Oracles deliberately avoid calling library code paths
// they are meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdex/byol.hpp"
#include "tdex/core.hpp"
#include "tdex/error.hpp"
#include "tdex/nn.hpp"
#include "tdex/pca.hpp"
#include "tdex/retrieval.hpp"
#include "tdex/rng.hpp"

namespace tdex::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
    return t;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of `loss(delta)` at delta = 0 compared with `analytic`.
/// A ReLU kink within h of the point spoils the estimate, so a miss is retried
/// with h/10 and h/100: a wrong analytic value misses at every step size.
template <class LossAt>
std::pair<double, double> refined_difference(double analytic, LossAt&& loss, double h, double tol = 1e-4) {
    std::pair<double, double> best{std::numeric_limits<double>::infinity(), 0.0};
    for (int k = 0; k < 3; ++k, h /= 10) {
        const double num = (loss(h) - loss(-h)) / (2 * h);
        const double e = rel_err(analytic, num);
        if (e < best.first) best = {e, num};
        if (e <= tol) break;
    }
    return best;
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

/// Central differences of L = sum(net(x) * r) against backward(), for every
/// parameter entry (up to `per_tensor` random entries per tensor) and input entry.
inline GradCheck check_net_gradients(const NetSpec& net, ParamStore& params, Tensor input, std::uint64_t seed,
                                     std::size_t per_tensor = 64, double h = 1e-5) {
    Rng rng(seed);
    const ForwardResult fr = forward(net, params, input);
    const Tensor r = random_tensor(fr.output.shape(), rng);
    const BackwardResult br = backward(fr.tape, r);

    const auto loss = [&](const Tensor& x) {
        const Tensor y = forward_only(net, params, x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };
    GradCheck out;
    const auto pick = [&](std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(n, per_tensor));
        return idx;
    };
    const auto note = [&](double a, std::pair<double, double> en, const std::string& what) {
        ++out.checked;
        if (en.first > out.max_rel) {
            out.max_rel = en.first;
            out.worst = what + " analytic " + std::to_string(a) + " numeric " + std::to_string(en.second);
        }
    };
    for (const std::string& name : net.param_names()) {
        const Tensor& g = br.params.at(name);
        for (std::size_t i : pick(g.size())) {
            const double orig = params.get(name)[i];
            const auto at = [&](double d) {
                params.mutable_value(name)[i] = orig + d;
                const double l = loss(input);
                params.mutable_value(name)[i] = orig;
                return l;
            };
            note(g[i], refined_difference(g[i], at, h), name + "[" + std::to_string(i) + "]");
        }
    }
    for (std::size_t i : pick(input.size())) {
        const double orig = input[i];
        const auto at = [&](double d) {
            input[i] = orig + d;
            const double l = loss(input);
            input[i] = orig;
            return l;
        };
        note(br.input[i], refined_difference(br.input[i], at, h), "input[" + std::to_string(i) + "]");
    }
    return out;
}

inline const std::vector<std::string>& layer_kinds() {
    static const std::vector<std::string> k = {"conv2d", "relu", "global_avg_pool", "linear", "l2_normalize",
                                               "fold_rows"};
    return k;
}

struct LayerCase {
    NetSpec net;
    ParamStore params;
    Tensor input;
};

/// Zero-initialised biases put ReLU pre-activations exactly on the kink
/// wherever a receptive field sees only zeros; jitter them off it.
inline void jitter_biases(ParamStore& params, Rng& rng, double scale = 0.1) {
    for (auto& e : params.mutable_entries()) {
        if (e.name.size() < 5 || e.name.compare(e.name.size() - 5, 5, ".bias") != 0) continue;
        for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += scale * gaussian(rng, 1.0);
    }
}

/// A one-layer network of the given kind with shapes drawn from `seed`.
inline LayerCase make_layer_case(const std::string& kind, std::uint64_t seed) {
    Rng rng(seed);
    const auto pick = [&](std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
    };
    LayerCase c;
    c.net.name = "t";
    const std::size_t n = pick(1, 4);
    if (kind == "conv2d") {
        layer::Conv2d conv{pick(1, 4), pick(1, 5), pick(1, 3), pick(1, 2), pick(0, 2)};
        const std::size_t h = pick(conv.kernel, 9), w = pick(conv.kernel, 9);
        c.net.input_shape = {conv.in_ch, h, w};
        c.net.layers = {conv};
    } else if (kind == "relu") {
        c.net.input_shape = {pick(1, 3), pick(1, 5), pick(1, 5)};
        c.net.layers = {layer::Relu{}};
    } else if (kind == "global_avg_pool") {
        c.net.input_shape = {pick(1, 6), pick(1, 6), pick(1, 6)};
        c.net.layers = {layer::GlobalAvgPool{}};
    } else if (kind == "linear") {
        const std::size_t in = pick(1, 20);
        c.net.input_shape = {in};
        c.net.layers = {layer::Linear{in, pick(1, 20)}};
    } else if (kind == "l2_normalize") {
        c.net.input_shape = {pick(1, 12)};
        c.net.layers = {layer::L2Normalize{}};
    } else if (kind == "fold_rows") {
        const std::size_t g = pick(1, 4);
        c.net.input_shape = {pick(1, 8)};
        c.net.layers = {layer::FoldRows{g}};
        Shape shape{n * g};
        shape.insert(shape.end(), c.net.input_shape.begin(), c.net.input_shape.end());
        c.input = random_tensor(shape, rng);
    } else {
        throw std::invalid_argument("unknown layer kind " + kind);
    }
    init_params(c.net, c.params, derive_seed(seed, "init"));
    // Non-zero biases so their gradients are exercised away from the init value.
    for (auto& e : c.params.mutable_entries()) {
        for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += 0.1 * gaussian(rng, 1.0);
    }
    if (c.input.size() == 0) {
        Shape shape{n};
        shape.insert(shape.end(), c.net.input_shape.begin(), c.net.input_shape.end());
        c.input = random_tensor(shape, rng);
    }
    if (kind == "relu") {
        // Keep inputs away from the kink so central differences stay on one side.
        for (std::size_t i = 0; i < c.input.size(); ++i) {
            if (std::abs(c.input[i]) < 0.05) c.input[i] = c.input[i] < 0 ? -0.05 : 0.05;
        }
    }
    return c;
}

/// Central differences of the BYOL loss with respect to online parameters.
inline GradCheck check_byol_gradients(ByolState& state, const Tensor& v1, const Tensor& v2, std::uint64_t seed,
                                      std::size_t per_tensor = 8, double h = 1e-5) {
    Rng rng(seed);
    const ByolLoss base = byol_loss(state, v1, v2);
    GradCheck out;
    const std::vector<std::string> names = [&] {
        std::vector<std::string> n;
        for (const auto& e : state.online.entries()) n.push_back(e.name);
        return n;
    }();
    for (const auto& name : names) {
        const auto it = base.grads.find(name);
        if (it == base.grads.end()) continue;  // predictor params when the predictor is off
        const Tensor& g = it->second;
        std::vector<std::size_t> idx(g.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(idx.size(), per_tensor));
        for (std::size_t i : idx) {
            const double orig = state.online.get(name)[i];
            const auto at = [&](double d) {
                state.online.mutable_value(name)[i] = orig + d;
                const double l = byol_loss(state, v1, v2).loss;
                state.online.mutable_value(name)[i] = orig;
                return l;
            };
            const auto [e, num] = refined_difference(g[i], at, h);
            ++out.checked;
            if (e > out.max_rel) {
                out.max_rel = e;
                out.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(g[i]) + " numeric " +
                            std::to_string(num);
            }
        }
    }
    return out;
}

/// Tactile frames with pad activations drawn at random, for encoder inputs.
inline std::vector<TactileFrame> random_frames(Rng& rng, std::size_t n) {
    std::vector<TactileFrame> out(n);
    for (auto& f : out) {
        for (std::size_t i = 0; i < kTactileDim; ++i) {
            if (uniform(rng, 0.0, 1.0) < 0.3) f.set(taxel_from_flat(i), uniform(rng, -50.0, 100.0));
        }
    }
    return out;
}

/// Properties of a fitted PCA model, measured against an SVD of the centred data.
struct PcaCheck {
    double orthonormal_err = 0.0;    // max |C C^T - I|
    bool variance_nonincreasing = true;
    double cov_offdiag = 0.0;        // max |off-diagonal| of the projection covariance, relative to its largest entry
    double cov_diag_err = 0.0;       // max |diag - explained variance|, relative
    double oracle_value_err = 0.0;   // max relative eigenvalue difference
    double oracle_vector_err = 0.0;  // max (1 - |<c_i, v_i>|)
};

inline PcaCheck check_pca(const PcaModel& m, const Eigen::MatrixXd& data) {
    PcaCheck out;
    const Eigen::Index k = m.components.rows();
    const Eigen::MatrixXd gram = m.components * m.components.transpose();
    out.orthonormal_err = (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 1; i < k; ++i)
        if (m.explained_variance[i] > m.explained_variance[i - 1]) out.variance_nonincreasing = false;

    const Eigen::VectorXd mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centred = data.rowwise() - mean.transpose();
    const double denom = static_cast<double>(std::max<Eigen::Index>(data.rows() - 1, 1));
    const Eigen::MatrixXd z = centred * m.components.transpose();
    const Eigen::MatrixXd cov = z.transpose() * z / denom;
    const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (i == j) {
                out.cov_diag_err = std::max(out.cov_diag_err, std::abs(cov(i, i) - m.explained_variance[i]) / scale);
            } else {
                out.cov_offdiag = std::max(out.cov_offdiag, std::abs(cov(i, j)) / scale);
            }
        }
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index i = 0; i < k; ++i) {
        const double lam = sv[i] * sv[i] / denom;
        out.oracle_value_err =
            std::max(out.oracle_value_err, std::abs(lam - m.explained_variance[i]) / std::max(lam, 1e-300));
        const double dot = std::abs(svd.matrixV().col(i).dot(m.components.row(i).transpose()));
        out.oracle_vector_err = std::max(out.oracle_vector_err, 1.0 - dot);
    }
    return out;
}

/// Gaussian rows with per-column scales decaying geometrically, so the spectrum has clear gaps.
inline Eigen::MatrixXd decaying_data(Rng& rng, Eigen::Index n, Eigen::Index d, double decay = 0.97) {
    Eigen::MatrixXd x(n, d);
    Eigen::MatrixXd rot = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return gaussian(rng, 1.0); });
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(rot).householderQ();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = gaussian(rng, std::pow(decay, double(j))) + 0.3;
    return x * q.transpose();
}

/// Direct 7-loop convolution.
inline Tensor naive_conv(const layer::Conv2d& c, const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const std::size_t oh = (h + 2 * c.padding - c.kernel) / c.stride + 1;
    const std::size_t ow = (wd + 2 * c.padding - c.kernel) / c.stride + 1;
    Tensor y({n, c.out_ch, oh, ow});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t o = 0; o < c.out_ch; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double acc = b[o];
                    for (std::size_t ic = 0; ic < c.in_ch; ++ic)
                        for (std::size_t ki = 0; ki < c.kernel; ++ki)
                            for (std::size_t kj = 0; kj < c.kernel; ++kj) {
                                const long r = long(i * c.stride + ki) - long(c.padding);
                                const long q = long(j * c.stride + kj) - long(c.padding);
                                if (r < 0 || q < 0 || r >= long(h) || q >= long(wd)) continue;
                                acc += w[((o * c.in_ch + ic) * c.kernel + ki) * c.kernel + kj] *
                                       x[((s * c.in_ch + ic) * h + std::size_t(r)) * wd + std::size_t(q)];
                            }
                    y[((s * c.out_ch + o) * oh + i) * ow + j] = acc;
                }
    return y;
}

/// Image coordinates written out from the layout description: axis is the
/// channel, each finger owns a 4-column block, pads stack base to tip.
inline PixelIndex layout_oracle(const TaxelIndex& t) {
    return {t.axis, (t.pad % 4) * 4 + t.row, (t.pad / 4) * 4 + t.col};
}

inline double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

struct OracleScales {
    double visual = 1.0;
    double tactile = 1.0;
};

/// 1 / (largest pairwise distance) per modality, 1 when that distance is 0.
inline OracleScales oracle_scales(const std::vector<IndexRow>& rows) {
    double mv = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j) {
            mv = std::max(mv, euclid(rows[i].visual, rows[j].visual));
            mt = std::max(mt, euclid(rows[i].tactile, rows[j].tactile));
        }
    return {mv > 0 ? 1.0 / mv : 1.0, mt > 0 ? 1.0 / mt : 1.0};
}

/// Exhaustive scan: first row (lowest index) with minimal scaled distance among non-rejected rows.
inline std::optional<std::size_t> brute_force_nn(const std::vector<IndexRow>& rows, const OracleScales& sc,
                                                 ModalityWeights w, std::span<const double> v,
                                                 std::span<const double> t, const std::set<std::size_t>& rejected) {
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rejected.count(i)) continue;
        const double d =
            w.visual * sc.visual * euclid(v, rows[i].visual) + w.tactile * sc.tactile * euclid(t, rows[i].tactile);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline double oracle_displacement(const RobotState& a, const RobotState& b) {
    double s = euclid(a.ee_pos, b.ee_pos);
    for (std::size_t f = 0; f < kNumFingers; ++f) s += euclid(a.fingertips[f], b.fingertips[f]);
    return s;
}

/// Checks the retained set against the contract; returns an empty string when it holds.
inline std::string check_subsample_contract(const Trajectory& traj, const std::vector<std::size_t>& kept,
                                            double threshold) {
    if (kept.empty() || kept.front() != 0) return "frame 0 not retained";
    for (std::size_t k = 1; k < kept.size(); ++k)
        if (kept[k] <= kept[k - 1]) return "indices not strictly increasing";
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const std::size_t i = kept[k];
        const std::size_t j = k + 1 < kept.size() ? kept[k + 1] : traj.size();
        double acc = 0.0;
        for (std::size_t m = i + 1; m < traj.size() && m <= j; ++m) {
            acc += oracle_displacement(traj.frames[m - 1].state, traj.frames[m].state);
            if (m < j && acc > threshold) return "skipped frame " + std::to_string(m) + " exceeds threshold";
            if (m == j && !(acc > threshold)) return "retained frame " + std::to_string(m) + " does not exceed threshold";
        }
    }
    return {};
}

/// Random-walk trajectory with stationary stretches and occasional large jumps.
inline Trajectory random_trajectory(Rng& rng, std::size_t n) {
    Trajectory t;
    RobotState s;
    std::normal_distribution<double> step(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double mode = uniform(rng, 0.0, 1.0);
        const double scale = mode < 0.2 ? 0.0 : mode < 0.9 ? 0.002 : 0.01;
        for (double& v : s.ee_pos) v += scale * step(rng);
        for (auto& tip : s.fingertips)
            for (double& v : tip) v += scale * step(rng);
        TrajectoryFrame f;
        f.t = 0.1 * double(i);
        f.state = s;
        t.frames.push_back(f);
    }
    return t;
}

struct NnCheck {
    std::size_t queries = 0;
    std::size_t mismatches = 0;
    std::string first;
};

/// Runs `queries` sequential nn_query calls through one reject buffer and
/// compares each answer with brute_force_nn fed an independently kept FIFO.
/// Every third index uses integer-valued features so exact ties occur.
inline NnCheck check_nn_query(std::uint64_t seed, std::size_t size, std::size_t reject_k, std::size_t queries) {
    Rng rng(seed);
    const std::size_t dv = 1 + rng() % 6, dt = 1 + rng() % 12;
    const bool coarse = seed % 3 == 0;
    const auto value = [&] { return coarse ? double(rng() % 3) : gaussian(rng, 1.0); };
    std::vector<IndexRow> rows(size);
    for (auto& r : rows) {
        r.visual.resize(dv);
        r.tactile.resize(dt);
        for (double& v : r.visual) v = value();
        for (double& v : r.tactile) v = value();
    }
    const ModalityWeights w{uniform(rng, 0.0, 2.0), uniform(rng, 0.0, 2.0)};
    const FeatureIndex index = FeatureIndex::build(rows, w);
    const OracleScales scales = oracle_scales(rows);
    RejectBuffer buffer(reject_k);
    std::deque<std::size_t> fifo;
    NnCheck out;
    for (std::size_t q = 0; q < queries; ++q) {
        std::vector<double> v(dv), t(dt);
        if (rng() % 4 == 0) {
            const auto& src = rows[rng() % size];
            v = src.visual;
            t = src.tactile;
        } else {
            for (double& x : v) x = value();
            for (double& x : t) x = value();
        }
        const std::set<std::size_t> rejected(fifo.begin(), fifo.end());
        const auto expect = brute_force_nn(rows, scales, w, v, t, rejected);
        ++out.queries;
        std::string err;
        try {
            const QueryResult got = nn_query(index, v, t, buffer);
            if (!expect) {
                err = "expected exhaustion, got row " + std::to_string(got.row);
            } else if (got.row != *expect) {
                err = "row " + std::to_string(got.row) + " != oracle " + std::to_string(*expect);
            }
            if (expect && reject_k > 0) {
                fifo.push_back(*expect);
                if (fifo.size() > reject_k) fifo.pop_front();
            }
        } catch (const DataError&) {
            if (expect) err = "unexpected exhaustion";
        }
        if (!err.empty()) {
            if (out.mismatches == 0)
                out.first = "seed " + std::to_string(seed) + " size " + std::to_string(size) + " k " +
                            std::to_string(reject_k) + " query " + std::to_string(q) + ": " + err;
            ++out.mismatches;
        }
    }
    return out;
}

/// Trajectory with visual features, tactile frames and an action on every
/// frame, each frame distinct from the others.
inline Trajectory random_demo(Rng& rng, std::size_t n, std::size_t visual_dim = 4) {
    Trajectory t = random_trajectory(rng, n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& f = t.frames[i];
        f.visual = std::vector<double>(visual_dim);
        for (double& v : *f.visual) v = gaussian(rng, 1.0);
        for (std::size_t k = 0; k < kTactileDim; k += 7) f.tactile.set(taxel_from_flat(k), uniform(rng, 0.0, 50.0));
        Action a;
        a.ee_pos = f.state.ee_pos;
        for (double& j : a.joints) j = uniform(rng, -1.0, 1.0);
        f.action = a;
    }
    return t;
}

}  // namespace tdex::testing
