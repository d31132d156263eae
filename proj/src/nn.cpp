#include "tdex/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "tdex/error.hpp"

namespace tdex {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string param_name(const NetSpec& net, std::size_t layer, const char* kind) {
    return net.name + "." + std::to_string(layer) + "." + kind;
}

[[noreturn]] void shape_error(const NetSpec& net, std::size_t i, const std::string& what) {
    throw InvariantError("net `" + net.name + "` layer " + std::to_string(i) + " (" +
                         layer_name(net.layers[i]) + "): " + what);
}

// Range of output positions whose input coordinate o*stride + k - pad lies in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t in, std::size_t out, std::size_t k,
                                                std::size_t stride, std::size_t pad) {
    const long lo_num = static_cast<long>(pad) - static_cast<long>(k);
    long lo = lo_num <= 0 ? 0 : (lo_num + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    const long hi_num = static_cast<long>(in) - 1 + static_cast<long>(pad) - static_cast<long>(k);
    long hi = hi_num < 0 ? -1 : hi_num / static_cast<long>(stride);
    hi = std::min(hi, static_cast<long>(out) - 1);
    if (hi < lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
}

std::size_t conv_out(std::size_t in, const layer::Conv2d& c) {
    return (in + 2 * c.padding - c.kernel) / c.stride + 1;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Unfolds x [N, C, H, W] into a (C*k*k) x (N*OH*OW) matrix; out-of-range taps are 0.
RowMat im2col(const layer::Conv2d& c, const Tensor& x, std::size_t oh_n, std::size_t ow_n) {
    const std::size_t n_batch = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const std::size_t plane = oh_n * ow_n;
    RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(c.in_ch * c.kernel * c.kernel),
                               static_cast<Eigen::Index>(n_batch * plane));
    const double* xp = x.data().data();
    for (std::size_t ic = 0; ic < c.in_ch; ++ic) {
        for (std::size_t kh = 0; kh < c.kernel; ++kh) {
            const auto [oh_lo, oh_hi] = valid_range(h, oh_n, kh, c.stride, c.padding);
            for (std::size_t kw = 0; kw < c.kernel; ++kw) {
                const auto [ow_lo, ow_hi] = valid_range(wd, ow_n, kw, c.stride, c.padding);
                double* row = cols.data() + ((ic * c.kernel + kh) * c.kernel + kw) * n_batch * plane;
                for (std::size_t n = 0; n < n_batch; ++n) {
                    const double* in = xp + ((n * c.in_ch + ic) * h) * wd;
                    for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                        const double* in_row = in + (oh * c.stride + kh - c.padding) * wd;
                        double* out = row + n * plane + oh * ow_n;
                        for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) out[ow] = in_row[ow * c.stride + kw - c.padding];
                    }
                }
            }
        }
    }
    return cols;
}

Tensor conv_forward(const layer::Conv2d& c, const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t n_batch = x.dim(0);
    const std::size_t oh_n = conv_out(x.dim(2), c), ow_n = conv_out(x.dim(3), c);
    const std::size_t plane = oh_n * ow_n;
    const RowMat cols = im2col(c, x, oh_n, ow_n);
    const ConstMapMat wm(w.data().data(), static_cast<Eigen::Index>(c.out_ch),
                         static_cast<Eigen::Index>(c.in_ch * c.kernel * c.kernel));
    const RowMat ym = wm * cols;  // out_ch x (N*plane)
    Tensor y({n_batch, c.out_ch, oh_n, ow_n});
    double* yp = y.data().data();
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t oc = 0; oc < c.out_ch; ++oc) {
            const double* src = ym.data() + oc * n_batch * plane + n * plane;
            double* dst = yp + (n * c.out_ch + oc) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + b[oc];
        }
    }
    return y;
}

void conv_backward(const layer::Conv2d& c, const Tensor& x, const Tensor& w, const Tensor& gy,
                   Tensor& gx, Tensor& gw, Tensor& gb) {
    const std::size_t n_batch = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const std::size_t oh_n = gy.dim(2), ow_n = gy.dim(3);
    const std::size_t plane = oh_n * ow_n;
    const auto taps = static_cast<Eigen::Index>(c.in_ch * c.kernel * c.kernel);

    RowMat gym(static_cast<Eigen::Index>(c.out_ch), static_cast<Eigen::Index>(n_batch * plane));
    gb = Tensor({c.out_ch});
    const double* gyp = gy.data().data();
    for (std::size_t oc = 0; oc < c.out_ch; ++oc) {
        double bias_sum = 0.0;
        for (std::size_t n = 0; n < n_batch; ++n) {
            const double* src = gyp + (n * c.out_ch + oc) * plane;
            double* dst = gym.data() + oc * n_batch * plane + n * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = src[i];
                bias_sum += src[i];
            }
        }
        gb[oc] = bias_sum;
    }

    const RowMat cols = im2col(c, x, oh_n, ow_n);
    gw = Tensor(w.shape());
    MapMat(gw.data().data(), static_cast<Eigen::Index>(c.out_ch), taps).noalias() = gym * cols.transpose();

    const ConstMapMat wm(w.data().data(), static_cast<Eigen::Index>(c.out_ch), taps);
    const RowMat gcols = wm.transpose() * gym;
    gx = Tensor(x.shape());
    double* gxp = gx.data().data();
    for (std::size_t ic = 0; ic < c.in_ch; ++ic) {
        for (std::size_t kh = 0; kh < c.kernel; ++kh) {
            const auto [oh_lo, oh_hi] = valid_range(h, oh_n, kh, c.stride, c.padding);
            for (std::size_t kw = 0; kw < c.kernel; ++kw) {
                const auto [ow_lo, ow_hi] = valid_range(wd, ow_n, kw, c.stride, c.padding);
                const double* row = gcols.data() + ((ic * c.kernel + kh) * c.kernel + kw) * n_batch * plane;
                for (std::size_t n = 0; n < n_batch; ++n) {
                    double* gin = gxp + ((n * c.in_ch + ic) * h) * wd;
                    for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                        double* gin_row = gin + (oh * c.stride + kh - c.padding) * wd;
                        const double* src = row + n * plane + oh * ow_n;
                        for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) gin_row[ow * c.stride + kw - c.padding] += src[ow];
                    }
                }
            }
        }
    }
}

Tensor linear_forward(const layer::Linear& l, const Tensor& x, const Tensor& w, const Tensor& b) {
    const auto n_batch = static_cast<Eigen::Index>(x.dim(0));
    const auto in = static_cast<Eigen::Index>(l.in), out = static_cast<Eigen::Index>(l.out);
    Tensor y({x.dim(0), l.out});
    MapMat ym(y.data().data(), n_batch, out);
    ym.noalias() = ConstMapMat(x.data().data(), n_batch, in) * ConstMapMat(w.data().data(), out, in).transpose();
    for (Eigen::Index n = 0; n < n_batch; ++n)
        for (Eigen::Index o = 0; o < out; ++o) ym(n, o) += b[static_cast<std::size_t>(o)];
    return y;
}

void linear_backward(const layer::Linear& l, const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw, Tensor& gb) {
    const auto n_batch = static_cast<Eigen::Index>(x.dim(0));
    const auto in = static_cast<Eigen::Index>(l.in), out = static_cast<Eigen::Index>(l.out);
    const ConstMapMat xm(x.data().data(), n_batch, in);
    const ConstMapMat gym(gy.data().data(), n_batch, out);
    gx = Tensor(x.shape());
    gw = Tensor(w.shape());
    gb = Tensor({l.out});
    MapMat(gx.data().data(), n_batch, in).noalias() = gym * ConstMapMat(w.data().data(), out, in);
    MapMat(gw.data().data(), out, in).noalias() = gym.transpose() * xm;
    for (Eigen::Index o = 0; o < out; ++o) gb[static_cast<std::size_t>(o)] = gym.col(o).sum();
}

constexpr double kNormEps = 1e-12;

}  // namespace

std::string layer_name(const LayerSpec& layer) {
    return std::visit(
        Overloaded{
            [](const layer::Conv2d& c) {
                return "conv2d(" + std::to_string(c.in_ch) + "->" + std::to_string(c.out_ch) + ",k" +
                       std::to_string(c.kernel) + ",s" + std::to_string(c.stride) + ",p" +
                       std::to_string(c.padding) + ")";
            },
            [](const layer::Relu&) { return std::string("relu"); },
            [](const layer::GlobalAvgPool&) { return std::string("global_avg_pool"); },
            [](const layer::Linear& l) {
                return "linear(" + std::to_string(l.in) + "->" + std::to_string(l.out) + ")";
            },
            [](const layer::L2Normalize&) { return std::string("l2_normalize"); },
            [](const layer::FoldRows& f) { return "fold_rows(" + std::to_string(f.group) + ")"; },
        },
        layer);
}

Shape NetSpec::output_shape() const {
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::visit(Overloaded{
                       [&](const layer::Conv2d& c) {
                           if (s.size() != 3 || s[0] != c.in_ch) {
                               shape_error(*this, i, "expected [" + std::to_string(c.in_ch) +
                                                         ",H,W], got " + shape_string(s));
                           }
                           if (s[1] + 2 * c.padding < c.kernel || s[2] + 2 * c.padding < c.kernel ||
                               c.stride == 0) {
                               shape_error(*this, i, "kernel larger than padded input " + shape_string(s));
                           }
                           s = {c.out_ch, conv_out(s[1], c), conv_out(s[2], c)};
                       },
                       [&](const layer::Relu&) {},
                       [&](const layer::GlobalAvgPool&) {
                           if (s.size() != 3) shape_error(*this, i, "expected [C,H,W], got " + shape_string(s));
                           s = {s[0]};
                       },
                       [&](const layer::Linear& l) {
                           if (s.size() != 1 || s[0] != l.in) {
                               shape_error(*this, i, "expected [" + std::to_string(l.in) + "], got " +
                                                         shape_string(s));
                           }
                           s = {l.out};
                       },
                       [&](const layer::L2Normalize&) {
                           if (s.size() != 1) shape_error(*this, i, "expected [D], got " + shape_string(s));
                       },
                       [&](const layer::FoldRows& f) {
                           if (s.size() != 1 || f.group == 0) {
                               shape_error(*this, i, "expected [D], got " + shape_string(s));
                           }
                           s = {s[0] * f.group};
                       },
                   },
                   layers[i]);
    }
    return s;
}

std::size_t NetSpec::rows_per_sample() const {
    std::size_t r = 1;
    for (const auto& l : layers) {
        if (const auto* f = std::get_if<layer::FoldRows>(&l)) r *= f->group;
    }
    return r;
}

std::vector<std::string> NetSpec::param_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (std::holds_alternative<layer::Conv2d>(layers[i]) ||
            std::holds_alternative<layer::Linear>(layers[i])) {
            names.push_back(param_name(*this, i, "weight"));
            names.push_back(param_name(*this, i, "bias"));
        }
    }
    return names;
}

void ParamStore::add(const std::string& name, Tensor value) {
    if (contains(name)) throw InvariantError("duplicate parameter `" + name + "`");
    Tensor zeros(value.shape());
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(value), zeros, zeros});
    ++version_;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvariantError("unknown parameter `" + name + "`");
    return entries_[it->second].value;
}

Tensor& ParamStore::mutable_value(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvariantError("unknown parameter `" + name + "`");
    ++version_;
    return entries_[it->second].value;
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

ParamStore ParamStore::subset(const std::string& prefix) const {
    ParamStore out;
    for (const auto& e : entries_) {
        if (e.name.rfind(prefix, 0) == 0) out.add(e.name, e.value);
    }
    return out;
}

void ParamStore::round_to_f32() {
    for (auto& e : entries_) e.value.round_to_f32();
    ++version_;
}

void accumulate(Gradients& dst, const Gradients& src) {
    for (const auto& [name, g] : src) {
        auto it = dst.find(name);
        if (it == dst.end()) {
            dst.emplace(name, g);
            continue;
        }
        if (it->second.shape() != g.shape()) throw InvariantError("gradient shape mismatch for " + name);
        auto d = it->second.data();
        auto s = g.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
}

void init_params(const NetSpec& net, ParamStore& params, std::uint64_t seed) {
    (void)net.output_shape();
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Shape wshape;
        std::size_t fan_in = 0;
        std::size_t n_out = 0;
        if (const auto* c = std::get_if<layer::Conv2d>(&net.layers[i])) {
            wshape = {c->out_ch, c->in_ch, c->kernel, c->kernel};
            fan_in = c->in_ch * c->kernel * c->kernel;
            n_out = c->out_ch;
        } else if (const auto* l = std::get_if<layer::Linear>(&net.layers[i])) {
            wshape = {l->out, l->in};
            fan_in = l->in;
            n_out = l->out;
        } else {
            continue;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w(wshape);
        for (double& x : w.data()) x = dist(rng);
        params.add(param_name(net, i, "weight"), std::move(w));
        params.add(param_name(net, i, "bias"), Tensor({n_out}));
    }
}

ForwardResult forward(const NetSpec& net, const ParamStore& params, const Tensor& input) {
    if (input.rank() != net.input_shape.size() + 1 ||
        !std::equal(net.input_shape.begin(), net.input_shape.end(), input.shape().begin() + 1)) {
        throw InvariantError("net `" + net.name + "` expects rows of " + shape_string(net.input_shape) +
                             ", got " + shape_string(input.shape()));
    }
    (void)net.output_shape();
    ForwardResult res;
    res.tape.net = &net;
    res.tape.params = &params;
    res.tape.params_version = params.version();
    res.tape.inputs.reserve(net.layers.size());
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        res.tape.inputs.push_back(x);
        x = std::visit(
            Overloaded{
                [&](const layer::Conv2d& c) {
                    return conv_forward(c, x, params.get(param_name(net, i, "weight")),
                                        params.get(param_name(net, i, "bias")));
                },
                [&](const layer::Relu&) {
                    Tensor y = x;
                    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
                    return y;
                },
                [&](const layer::GlobalAvgPool&) {
                    const std::size_t n = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
                    Tensor y({n, ch});
                    for (std::size_t b = 0; b < n; ++b) {
                        for (std::size_t c = 0; c < ch; ++c) {
                            const double* p = x.data().data() + (b * ch + c) * hw;
                            double s = 0.0;
                            for (std::size_t k = 0; k < hw; ++k) s += p[k];
                            y[b * ch + c] = s / static_cast<double>(hw);
                        }
                    }
                    return y;
                },
                [&](const layer::Linear& l) {
                    return linear_forward(l, x, params.get(param_name(net, i, "weight")),
                                          params.get(param_name(net, i, "bias")));
                },
                [&](const layer::L2Normalize&) {
                    Tensor y = x;
                    for (std::size_t b = 0; b < y.dim(0); ++b) {
                        auto r = y.row(b);
                        double ss = 0.0;
                        for (double v : r) ss += v * v;
                        const double norm = std::max(std::sqrt(ss), kNormEps);
                        for (double& v : r) v /= norm;
                    }
                    return y;
                },
                [&](const layer::FoldRows& f) {
                    if (x.dim(0) % f.group != 0) {
                        shape_error(net, i, "batch " + std::to_string(x.dim(0)) +
                                                " not divisible by group " + std::to_string(f.group));
                    }
                    return x.reshaped({x.dim(0) / f.group, x.dim(1) * f.group});
                },
            },
            net.layers[i]);
    }
    res.output = x;
    res.tape.output = x;
    return res;
}

Tensor forward_only(const NetSpec& net, const ParamStore& params, const Tensor& input) {
    return forward(net, params, input).output;
}

BackwardResult backward(const Tape& tape, const Tensor& grad_output) {
    if (tape.net == nullptr || tape.params == nullptr) throw InvariantError("empty tape");
    if (tape.params->version() != tape.params_version) throw InvariantError("stale tape");
    if (grad_output.shape() != tape.output.shape()) {
        throw InvariantError("grad_output shape " + shape_string(grad_output.shape()) +
                             " does not match output " + shape_string(tape.output.shape()));
    }
    const NetSpec& net = *tape.net;
    const ParamStore& params = *tape.params;
    BackwardResult res;
    Tensor g = grad_output;
    for (std::size_t ii = net.layers.size(); ii-- > 0;) {
        const Tensor& x = tape.inputs[ii];
        std::visit(
            Overloaded{
                [&](const layer::Conv2d& c) {
                    Tensor gx, gw, gb;
                    conv_backward(c, x, params.get(param_name(net, ii, "weight")), g, gx, gw, gb);
                    res.params[param_name(net, ii, "weight")] = std::move(gw);
                    res.params[param_name(net, ii, "bias")] = std::move(gb);
                    g = std::move(gx);
                },
                [&](const layer::Relu&) {
                    auto gd = g.data();
                    auto xd = x.data();
                    for (std::size_t k = 0; k < gd.size(); ++k) {
                        if (!(xd[k] > 0.0)) gd[k] = 0.0;
                    }
                },
                [&](const layer::GlobalAvgPool&) {
                    const std::size_t n = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
                    Tensor gx(x.shape());
                    for (std::size_t b = 0; b < n; ++b) {
                        for (std::size_t c = 0; c < ch; ++c) {
                            const double v = g[b * ch + c] / static_cast<double>(hw);
                            double* p = gx.data().data() + (b * ch + c) * hw;
                            std::fill(p, p + hw, v);
                        }
                    }
                    g = std::move(gx);
                },
                [&](const layer::Linear& l) {
                    Tensor gx, gw, gb;
                    linear_backward(l, x, params.get(param_name(net, ii, "weight")), g, gx, gw, gb);
                    res.params[param_name(net, ii, "weight")] = std::move(gw);
                    res.params[param_name(net, ii, "bias")] = std::move(gb);
                    g = std::move(gx);
                },
                [&](const layer::L2Normalize&) {
                    Tensor gx(x.shape());
                    for (std::size_t b = 0; b < x.dim(0); ++b) {
                        auto xr = x.row(b);
                        auto gr = g.row(b);
                        auto out = gx.row(b);
                        double ss = 0.0;
                        for (double v : xr) ss += v * v;
                        const double norm = std::sqrt(ss);
                        if (norm < kNormEps) {
                            for (std::size_t k = 0; k < xr.size(); ++k) out[k] = gr[k] / kNormEps;
                            continue;
                        }
                        double dot = 0.0;
                        for (std::size_t k = 0; k < xr.size(); ++k) dot += xr[k] * gr[k];
                        dot /= norm * norm;
                        for (std::size_t k = 0; k < xr.size(); ++k) out[k] = (gr[k] - xr[k] * dot) / norm;
                    }
                    g = std::move(gx);
                },
                [&](const layer::FoldRows&) { g = g.reshaped(x.shape()); },
            },
            net.layers[ii]);
    }
    res.input = std::move(g);
    return res;
}

void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& cfg) {
    const std::uint64_t t = params.step() + 1;
    params.set_step(t);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& e : params.mutable_entries()) {
        auto it = grads.find(e.name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (g.shape() != e.value.shape()) throw InvariantError("gradient shape mismatch for " + e.name);
        auto p = e.value.data();
        auto m = e.m.data();
        auto v = e.v.data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k] + cfg.weight_decay * p[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace tdex
