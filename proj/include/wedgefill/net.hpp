#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wedgefill/grid.hpp"
#include "wedgefill/rng.hpp"
#include "wedgefill/tensor.hpp"

namespace wedgefill {

// Small dilated convolutional network: six 3x3 conv layers with dilations
// {1,2,4,8,4,1}, ReLU between layers, linear zero-initialized output layer,
// plus a zero-initialized 1x1 linear skip from the input stack to the output
// so linear maps of the inputs are exactly representable.
// The normalized step t/T is injected as a constant extra input channel.
// stacking_depth > 1 re-applies the same weights, feeding the previous
// output back in as the primary channel.
struct NetSpec {
    int in_channels = 1;   // data channels, excluding the time channel
    int out_channels = 1;
    int hidden_channels = 32;
    int stacking_depth = 1;

    static constexpr int kLayers = 6;
    static constexpr std::array<int, kLayers> kDilations = {1, 2, 4, 8, 4, 1};

    int layer_in(int l) const { return l == 0 ? in_channels + 1 : hidden_channels; }
    int layer_out(int l) const { return l == kLayers - 1 ? out_channels : hidden_channels; }

    size_t param_count() const {
        size_t n = 0;
        for (int l = 0; l < kLayers; ++l)
            n += static_cast<size_t>(layer_out(l)) * layer_in(l) * 9 + layer_out(l);
        n += static_cast<size_t>(out_channels) * (in_channels + 1);  // linear skip
        return n;
    }

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || hidden_channels < 1 || stacking_depth < 1)
            throw std::invalid_argument("NetSpec: fields must be positive");
        if (stacking_depth > 1 && out_channels != 1)
            throw std::invalid_argument("NetSpec: stacked application requires out_channels == 1");
    }
};

inline ModelParams init_params(const NetSpec& spec, Rng rng) {
    spec.validate();
    ModelParams p;
    for (int l = 0; l < NetSpec::kLayers; ++l) {
        const int ci = spec.layer_in(l), co = spec.layer_out(l);
        p.add("conv" + std::to_string(l) + ".w", {co, ci, 3, 3});
        p.add("conv" + std::to_string(l) + ".b", {co});
        if (l < NetSpec::kLayers - 1) {
            // Kaiming-uniform fan-in; the output layer stays zero so the
            // initial prediction is zero.
            const double bound = std::sqrt(6.0 / (ci * 9.0));
            Tensor& w = p.at("conv" + std::to_string(l) + ".w");
            for (double& x : w.data) x = rng.uniform(-bound, bound);
        }
    }
    p.add("skip.w", {spec.out_channels, spec.in_channels + 1});  // stays zero
    return p;
}

namespace detail {

inline void conv3x3(const Tensor& w, const Tensor& b, const std::vector<Grid>& in, int dil,
                    std::vector<Grid>& out) {
    const int co = w.shape[0], ci = w.shape[1];
    const int R = in[0].rows, C = in[0].cols;
    out.assign(co, Grid(R, C));
    for (int oc = 0; oc < co; ++oc) {
        Grid& o = out[oc];
        std::fill(o.v.begin(), o.v.end(), b.data[oc]);
        for (int ic = 0; ic < ci; ++ic) {
            const Grid& src = in[ic];
            for (int kr = -1; kr <= 1; ++kr) {
                for (int kc = -1; kc <= 1; ++kc) {
                    const double wv = w.data[((static_cast<size_t>(oc) * ci + ic) * 3 + (kr + 1)) * 3 + (kc + 1)];
                    if (wv == 0.0) continue;
                    const int dr = kr * dil, dc = kc * dil;
                    const int r0 = std::max(0, -dr), r1 = std::min(R, R - dr);
                    const int c0 = std::max(0, -dc), c1 = std::min(C, C - dc);
                    for (int r = r0; r < r1; ++r) {
                        double* orow = o.row(r) + c0;
                        const double* srow = src.row(r + dr) + c0 + dc;
                        const int n = c1 - c0;
                        for (int i = 0; i < n; ++i) orow[i] += wv * srow[i];
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias/input gradients for conv3x3.
inline void conv3x3_backward(const Tensor& w, const std::vector<Grid>& in,
                             const std::vector<Grid>& gout, int dil, Tensor& gw, Tensor& gb,
                             std::vector<Grid>& gin) {
    const int co = w.shape[0], ci = w.shape[1];
    const int R = in[0].rows, C = in[0].cols;
    if (gin.empty()) gin.assign(ci, Grid(R, C));
    for (int oc = 0; oc < co; ++oc) {
        const Grid& g = gout[oc];
        double bs = 0.0;
        for (double x : g.v) bs += x;
        gb.data[oc] += bs;
        for (int ic = 0; ic < ci; ++ic) {
            const Grid& src = in[ic];
            Grid& gi = gin[ic];
            for (int kr = -1; kr <= 1; ++kr) {
                for (int kc = -1; kc <= 1; ++kc) {
                    const size_t widx = ((static_cast<size_t>(oc) * ci + ic) * 3 + (kr + 1)) * 3 + (kc + 1);
                    const double wv = w.data[widx];
                    const int dr = kr * dil, dc = kc * dil;
                    const int r0 = std::max(0, -dr), r1 = std::min(R, R - dr);
                    const int c0 = std::max(0, -dc), c1 = std::min(C, C - dc);
                    double acc = 0.0;
                    for (int r = r0; r < r1; ++r) {
                        const double* grow = g.row(r) + c0;
                        const double* srow = src.row(r + dr) + c0 + dc;
                        double* girow = gi.row(r + dr) + c0 + dc;
                        const int n = c1 - c0;
                        for (int i = 0; i < n; ++i) {
                            acc += grow[i] * srow[i];
                            girow[i] += wv * grow[i];
                        }
                    }
                    gw.data[widx] += acc;
                }
            }
        }
    }
}

}  // namespace detail

// Saved intermediates for one forward call (all stacked passes).
struct NetWorkspace {
    // per pass: input channel stack fed to conv0
    std::vector<std::vector<Grid>> inputs;
    // per pass, per layer: pre-activation conv outputs
    std::vector<std::array<std::vector<Grid>, NetSpec::kLayers>> pre;
};

inline std::vector<Grid> net_forward(const ModelParams& params, const NetSpec& spec,
                                     const std::vector<Grid>& data_channels, double t_norm,
                                     NetWorkspace* ws = nullptr) {
    spec.validate();
    if (static_cast<int>(data_channels.size()) != spec.in_channels)
        throw std::invalid_argument("net_forward: channel count mismatch");
    const int R = data_channels[0].rows, C = data_channels[0].cols;
    for (const Grid& g : data_channels)
        if (g.rows != R || g.cols != C) throw std::invalid_argument("net_forward: ragged channels");
    if (ws) {
        ws->inputs.clear();
        ws->pre.clear();
    }
    Grid tchan(R, C, t_norm);
    std::vector<Grid> out;
    for (int pass = 0; pass < spec.stacking_depth; ++pass) {
        std::vector<Grid> x;
        x.reserve(spec.in_channels + 1);
        if (pass == 0) {
            x.assign(data_channels.begin(), data_channels.end());
        } else {
            x.push_back(out[0]);  // previous output becomes the primary channel
            for (int i = 1; i < spec.in_channels; ++i) x.push_back(data_channels[i]);
        }
        x.push_back(tchan);
        if (ws) {
            ws->inputs.push_back(x);
            ws->pre.emplace_back();
        }
        // linear skip contribution, accumulated before the stack consumes x
        const Tensor& sw = params.entries[2 * NetSpec::kLayers].value;
        std::vector<Grid> skip(spec.out_channels, Grid(R, C));
        for (int oc = 0; oc < spec.out_channels; ++oc)
            for (int ic = 0; ic <= spec.in_channels; ++ic) {
                const double wv = sw.data[static_cast<size_t>(oc) * (spec.in_channels + 1) + ic];
                if (wv == 0.0) continue;
                for (size_t i = 0; i < skip[oc].v.size(); ++i) skip[oc].v[i] += wv * x[ic].v[i];
            }
        for (int l = 0; l < NetSpec::kLayers; ++l) {
            std::vector<Grid> y;
            detail::conv3x3(params.entries[2 * l].value, params.entries[2 * l + 1].value, x,
                            NetSpec::kDilations[l], y);
            if (ws) ws->pre.back()[l] = y;
            if (l < NetSpec::kLayers - 1)
                for (Grid& g : y)
                    for (double& v : g.v) v = v > 0.0 ? v : 0.0;
            x = std::move(y);
        }
        for (int oc = 0; oc < spec.out_channels; ++oc) x[oc] += skip[oc];
        out = std::move(x);
    }
    return out;
}

// Exact reverse-mode gradients of net_forward contracted with `upstream`.
// Parameter gradients accumulate into `grads`; the return value is the
// gradient with respect to the data channels (channel 0 is chained through
// every stacked pass).
inline std::vector<Grid> net_backward(const ModelParams& params, const NetSpec& spec,
                                      const NetWorkspace& ws, const std::vector<Grid>& upstream,
                                      Grads& grads) {
    if (static_cast<int>(ws.inputs.size()) != spec.stacking_depth)
        throw std::invalid_argument("net_backward: workspace does not match spec");
    const int R = ws.inputs[0][0].rows, C = ws.inputs[0][0].cols;
    std::vector<Grid> gdata(spec.in_channels, Grid(R, C));
    std::vector<Grid> gout = upstream;  // gradient wrt current pass output
    for (int pass = spec.stacking_depth - 1; pass >= 0; --pass) {
        std::vector<Grid> g = gout;
        for (int l = NetSpec::kLayers - 1; l >= 0; --l) {
            if (l < NetSpec::kLayers - 1) {
                // ReLU mask from stored pre-activations
                const auto& pre = ws.pre[pass][l];
                for (size_t ch = 0; ch < g.size(); ++ch)
                    for (size_t i = 0; i < g[ch].v.size(); ++i)
                        if (pre[ch].v[i] <= 0.0) g[ch].v[i] = 0.0;
            }
            const std::vector<Grid>& in =
                l == 0 ? ws.inputs[pass]
                       : [&]() -> std::vector<Grid> {
                             std::vector<Grid> a = ws.pre[pass][l - 1];
                             for (Grid& gr : a)
                                 for (double& v : gr.v) v = v > 0.0 ? v : 0.0;
                             return a;
                         }();
            std::vector<Grid> gin;
            detail::conv3x3_backward(params.entries[2 * l].value, in, g, NetSpec::kDilations[l],
                                     grads[2 * l], grads[2 * l + 1], gin);
            g = std::move(gin);
        }
        // skip path: weight grads plus its contribution to the input grads
        const Tensor& sw = params.entries[2 * NetSpec::kLayers].value;
        Tensor& gsw = grads[2 * NetSpec::kLayers];
        for (int oc = 0; oc < spec.out_channels; ++oc)
            for (int ic = 0; ic <= spec.in_channels; ++ic) {
                const size_t widx = static_cast<size_t>(oc) * (spec.in_channels + 1) + ic;
                const double wv = sw.data[widx];
                double acc = 0.0;
                const Grid& src = ws.inputs[pass][ic];
                for (size_t i = 0; i < src.v.size(); ++i) {
                    acc += gout[oc].v[i] * src.v[i];
                    g[ic].v[i] += wv * gout[oc].v[i];
                }
                gsw.data[widx] += acc;
            }
        // g now holds gradients for this pass's input stack (incl. time channel)
        if (pass == 0) {
            for (int i = 0; i < spec.in_channels; ++i) gdata[i] += g[i];
        } else {
            gout.assign(1, g[0]);  // chain into previous pass's output
            for (int i = 1; i < spec.in_channels; ++i) gdata[i] += g[i];
        }
    }
    return gdata;
}

}  // namespace wedgefill
