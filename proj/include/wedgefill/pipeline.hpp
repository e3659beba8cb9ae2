#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wedgefill/dataset.hpp"
#include "wedgefill/diffusion.hpp"
#include "wedgefill/loss.hpp"
#include "wedgefill/net.hpp"
#include "wedgefill/optim.hpp"
#include "wedgefill/schedule.hpp"
#include "wedgefill/tomo.hpp"

namespace wedgefill {

// Shared knobs for one training stage. Unused fields are ignored by stages
// that do not need them.
struct TrainingConfig {
    int iterations = 1000;
    int batch_size = 4;
    double lr = 5e-4;
    double lr_min = 1e-5;
    int hidden_channels = 32;
    double boundary_weight = 0.01;  // omega; kept small
    double proxy_gamma = 0.5;       // gradient term inside the proxy distance
    double proxy_weight = 0.5;      // postproc mse/proxy mix
    int n_ensemble = 4;
    uint64_t seed = 1;
};

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_log;  // one entry per optimizer step this call
};

inline NetSpec score_net_spec(int hidden) { return {3, 1, hidden, 1}; }    // x_t, mu, lowfid
inline NetSpec student_net_spec(int hidden) { return {3, 1, hidden, 2}; }  // x_T, mu, lowfid; stacked twice
inline NetSpec mse_net_spec(int hidden) { return {2, 1, hidden, 2}; }      // lowfid, mu; stacked twice
inline NetSpec postproc_net_spec(int hidden) { return {2, 1, hidden, 1}; } // fbp mean, fbp std

// Fill missing angle rows by per-detector-bin linear interpolation between
// the nearest kept rows (cyclic in the angle index); kept rows untouched.
inline Grid low_fidelity_inpaint(const Grid& mu, const AngleMask& mask) {
    const int A = mu.rows;
    if (A != mask.geo.num_angles || mu.cols != mask.geo.detector_bins)
        throw std::invalid_argument("low_fidelity_inpaint: shape does not match mask geometry");
    int kept_count = 0;
    for (uint8_t k : mask.kept) kept_count += k;
    if (kept_count == 0) throw std::invalid_argument("low_fidelity_inpaint: mask keeps zero rows");
    Grid out = mu;
    if (kept_count == A) return out;
    for (int i = 0; i < A; ++i) {
        if (mask.kept[i]) continue;
        int below = i, above = i, db = 0, da = 0;
        while (!mask.kept[(below + A) % A]) { --below; ++db; }
        while (!mask.kept[above % A]) { ++above; ++da; }
        const double w = static_cast<double>(db) / (db + da);
        const double* lo = mu.row((below + A) % A);
        const double* hi = mu.row(above % A);
        double* dst = out.row(i);
        for (int j = 0; j < mu.cols; ++j) dst[j] = (1.0 - w) * lo[j] + w * hi[j];
    }
    return out;
}

inline Sinogram low_fidelity_inpaint(const Sinogram& mu, const AngleMask& mask) {
    Sinogram out = mu;
    out.data = low_fidelity_inpaint(mu.data, mask);
    return out;
}

// Kept rows copied bit-exactly from the observation y, missing rows taken
// from the restoration.
inline Grid rectify_rnsd(const Grid& x0_hat, const Grid& y, const AngleMask& mask) {
    if (!x0_hat.same_shape(y) || y.rows != mask.geo.num_angles)
        throw std::invalid_argument("rectify_rnsd: shape mismatch");
    Grid out = x0_hat;
    for (int i = 0; i < y.rows; ++i)
        if (mask.kept[i])
            for (int j = 0; j < y.cols; ++j) out.at(i, j) = y.at(i, j);
    return out;
}

inline Sinogram rectify_rnsd(const Sinogram& x0_hat, const Sinogram& y, const AngleMask& mask) {
    if (!(x0_hat.geo == y.geo) || !(y.geo == mask.geo))
        throw std::invalid_argument("rectify_rnsd: geometry mismatch");
    Sinogram out = x0_hat;
    out.data = rectify_rnsd(x0_hat.data, y.data, mask);
    return out;
}

// Per-item training views in the normalized sinogram domain.
struct SinoSample {
    Grid x0;      // ground-truth sinogram / scale
    Grid mu;      // masked observation (mean-reversion target)
    Grid lowfid;  // interpolation-filled conditioning channel
};

inline std::vector<SinoSample> make_sino_samples(const Dataset& ds, const AngleMask& mask,
                                                 double scale, bool train_split) {
    std::vector<SinoSample> out;
    const int n = train_split ? ds.num_train : ds.num_test();
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const DatasetItem& it = train_split ? ds.train_item(i) : ds.test_item(i);
        SinoSample s;
        s.x0 = it.sino.data * (1.0 / scale);
        s.mu = apply_mask(it.sino, mask).data * (1.0 / scale);
        s.lowfid = low_fidelity_inpaint(s.mu, mask);
        out.push_back(std::move(s));
    }
    return out;
}

// The score model predicts eps through an x_0-space parametrization:
// the network refines the low-fidelity fill, x0_net = lowfid + f(...), and
// eps_hat = (x_t - mu - mean_coeff * (x0_net - mu)) / std is assembled
// analytically. A direct eps head would have to reproduce the known term
// (x_t - mu)/std with a t-dependent gain, and the reverse flow multiplies
// exactly those errors by e^{zeta_bar}; predicting in x_0 space cancels the
// amplification.
inline Grid score_predict_eps(const ModelParams& params, const NetSpec& spec,
                              const NoiseSchedule& sched, int t, const Grid& x_t, const Grid& mu,
                              const Grid& lowfid, NetWorkspace* ws = nullptr) {
    const auto [mc, sd] = marginal_params(sched, t);
    if (!(sd > 0.0)) throw std::invalid_argument("score_predict_eps: t has zero marginal std");
    Grid f = net_forward(params, spec, {x_t, mu, lowfid}, static_cast<double>(t) / sched.T, ws)[0];
    Grid eps(x_t.rows, x_t.cols);
    for (size_t i = 0; i < eps.v.size(); ++i) {
        const double x0_net = lowfid.v[i] + f.v[i];
        eps.v[i] = (x_t.v[i] - mu.v[i] - mc * (x0_net - mu.v[i])) / sd;
    }
    return eps;
}

// Noise-prediction training of the score model: random t, x_t from the
// closed-form marginal, MSE against the drawn unit noise. Conditioning
// channels: x_t, mu, lowfid; t/T enters as the network's time channel.
// Resuming from a checkpoint continues both the step count and the exact
// per-step random streams.
inline TrainResult train_score(const std::vector<SinoSample>& samples, const AngleMask& mask,
                               const NoiseSchedule& sched, const TrainingConfig& cfg,
                               ModelParams* resume = nullptr) {
    (void)mask;
    sched.validate();
    if (samples.empty()) throw std::invalid_argument("train_score: empty sample set");
    const NetSpec spec = score_net_spec(cfg.hidden_channels);
    Rng root(cfg.seed);
    TrainResult res;
    res.params = resume ? *resume : init_params(spec, root.derive(0));
    Grads grads = zero_grads(res.params);
    while (res.params.step_count < cfg.iterations) {
        const int64_t step = res.params.step_count;
        Rng rng = root.derive(0x5C02E000ULL + static_cast<uint64_t>(step));
        for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const SinoSample& s = samples[rng.uniform_index(samples.size())];
            const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
            const auto [mc, sd] = marginal_params(sched, t);
            Grid eps(s.x0.rows, s.x0.cols);
            rng.fill_normal(eps);
            Grid x_t(s.x0.rows, s.x0.cols);
            for (size_t i = 0; i < x_t.v.size(); ++i)
                x_t.v[i] = s.mu.v[i] + (s.x0.v[i] - s.mu.v[i]) * mc + sd * eps.v[i];
            NetWorkspace ws;
            Grid eps_hat = score_predict_eps(res.params, spec, sched, t, x_t, s.mu, s.lowfid, &ws);
            loss += mse(eps_hat, eps) / cfg.batch_size;
            Grid up = mse_grad(eps_hat, eps);
            up *= -mc / (sd * cfg.batch_size);  // d eps_hat / d f = -mean_coeff / std
            net_backward(res.params, spec, ws, {up}, grads);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("train_score: loss diverged (non-finite)");
        AdamConfig ac;
        ac.lr = cosine_lr(cfg.lr, cfg.lr_min, step, cfg.iterations);
        adam_step(res.params, grads, ac);
        res.loss_log.push_back(loss);
    }
    return res;
}

// Terminal-state draw x_T = mu + lambda sqrt(1 - e^{-2 zeta_bar_T}) z.
inline Grid sample_terminal(const NoiseSchedule& sched, const Grid& mu, Rng& rng) {
    const double sd = marginal_params(sched, sched.T).std;
    Grid x(mu.rows, mu.cols);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = mu.v[i] + sd * rng.normal();
    return x;
}

// Deterministic multi-step restoration: probability-flow steps T..1 driven
// by the trained score model. The flow multiplies score error by e^{zeta_bar}
// (up to 1/mean_coeff_T), so the implied x_0 deviation is clamped to a range
// generous for [0,1]-normalized data; the clamp never engages when the score
// is exact and the true x_0 is in range.
constexpr double kTeacherX0Bound = 1.5;

inline Grid teacher_restore_from(const ModelParams& score_params, const NetSpec& spec,
                                 const NoiseSchedule& sched, Grid x, const Grid& mu,
                                 const Grid& lowfid) {
    for (int t = sched.T; t >= 1; --t) {
        Grid eps_hat = score_predict_eps(score_params, spec, sched, t, x, mu, lowfid);
        const auto [a_t, s_t] = marginal_params(sched, t);
        const auto [a_p, s_p] = marginal_params(sched, t - 1);
        for (size_t i = 0; i < x.v.size(); ++i) {
            const double dev = x.v[i] - mu.v[i];
            double x0_dev = (dev - s_t * eps_hat.v[i]) / a_t;
            x0_dev = std::clamp(x0_dev, -kTeacherX0Bound, kTeacherX0Bound);
            const double eps = s_t > 0.0 ? (dev - a_t * x0_dev) / s_t : 0.0;
            x.v[i] = mu.v[i] + a_p * x0_dev + s_p * eps;
        }
    }
    return x;
}

inline Grid teacher_restore_ode(const ModelParams& score_params, const NetSpec& spec,
                                const NoiseSchedule& sched, const Grid& mu, const Grid& lowfid,
                                uint64_t seed) {
    Rng rng = Rng(seed).derive(0x7EAC4E2ULL);
    Grid x_T = sample_terminal(sched, mu, rng);
    return teacher_restore_from(score_params, spec, sched, x_T, mu, lowfid);
}

// One distillation example: a terminal draw and its deterministic teacher
// restoration, plus the conditioning and the target it was built from.
struct PairRecord {
    Grid x_T;
    Grid x0_hat;
    Grid mu;
    Grid lowfid;
    Grid gt;
};

inline std::vector<PairRecord> generate_pairs(const ModelParams& score_params, const NetSpec& spec,
                                              const NoiseSchedule& sched,
                                              const std::vector<SinoSample>& samples, int count,
                                              uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("generate_pairs: empty sample set");
    std::vector<PairRecord> pairs;
    pairs.reserve(count);
    Rng root(seed);
    std::vector<size_t> order;
    for (int i = 0; i < count; ++i) {
        if (order.empty()) {
            // fresh shuffle each time the dataset is exhausted
            order.resize(samples.size());
            for (size_t k = 0; k < order.size(); ++k) order[k] = k;
            Rng sh = root.derive(0x0D0E0ULL + i);
            for (size_t k = order.size(); k > 1; --k)
                std::swap(order[k - 1], order[sh.uniform_index(k)]);
        }
        const SinoSample& s = samples[order.back()];
        order.pop_back();
        Rng rng = root.derive(0xBA12ULL + static_cast<uint64_t>(i));
        PairRecord p;
        p.x_T = sample_terminal(sched, s.mu, rng);
        p.x0_hat = teacher_restore_from(score_params, spec, sched, p.x_T, s.mu, s.lowfid);
        p.mu = s.mu;
        p.lowfid = s.lowfid;
        p.gt = s.x0;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

// The student outputs the residual r_hat; its restoration is x_T - r_hat.
// The interpolation fill is a conditioning channel: the dominant part of the
// residual, x_T - lowfid, is then a linear function of the inputs, so the
// network only has to learn what the teacher adds on top of the fill.
inline Grid student_predict(const ModelParams& student_params, const NetSpec& spec, const Grid& x_T,
                            const Grid& mu, const Grid& lowfid, NetWorkspace* ws = nullptr) {
    return net_forward(student_params, spec, {x_T, mu, lowfid}, 1.0, ws)[0];
}

// One-step distillation: proxy distance to the teacher residual plus a
// boundary term holding the rectified restoration near the ground truth on
// the missing rows.
inline TrainResult distill_student(const std::vector<PairRecord>& pairs, const AngleMask& mask,
                                   const TrainingConfig& cfg, ModelParams* resume = nullptr) {
    if (pairs.empty()) throw std::invalid_argument("distill_student: no pairs");
    const NetSpec spec = student_net_spec(cfg.hidden_channels);
    Rng root(cfg.seed);
    TrainResult res;
    res.params = resume ? *resume : init_params(spec, root.derive(0));
    Grads grads = zero_grads(res.params);
    const double omega = cfg.boundary_weight;
    while (res.params.step_count < cfg.iterations) {
        const int64_t step = res.params.step_count;
        Rng rng = root.derive(0xD157111ULL + static_cast<uint64_t>(step));
        for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const PairRecord& p = pairs[rng.uniform_index(pairs.size())];
            NetWorkspace ws;
            Grid r_hat = student_predict(res.params, spec, p.x_T, p.mu, p.lowfid, &ws);
            Grid target = p.x_T - p.x0_hat;  // teacher residual
            loss += perceptual_proxy(r_hat, target, cfg.proxy_gamma) / cfg.batch_size;
            Grid up = perceptual_proxy_grad(r_hat, target, cfg.proxy_gamma);
            if (omega > 0.0) {
                // rectified restoration: kept rows are the observation itself
                Grid rest = rectify_rnsd(p.x_T - r_hat, p.mu, mask);
                loss += omega * perceptual_proxy(rest, p.gt, cfg.proxy_gamma) / cfg.batch_size;
                Grid gb = perceptual_proxy_grad(rest, p.gt, cfg.proxy_gamma);
                for (int i = 0; i < gb.rows; ++i)
                    if (mask.kept[i])
                        for (int j = 0; j < gb.cols; ++j) gb.at(i, j) = 0.0;
                gb *= -omega;  // d rest / d r_hat = -(I - M)
                up += gb;
            }
            up *= 1.0 / cfg.batch_size;
            net_backward(res.params, spec, ws, {up}, grads);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("distill_student: loss diverged (non-finite)");
        AdamConfig ac;
        ac.lr = cosine_lr(cfg.lr, cfg.lr_min, step, cfg.iterations);
        adam_step(res.params, grads, ac);
        res.loss_log.push_back(loss);
    }
    return res;
}

// N independent terminal draws, one student pass each, all rectified against
// the observation, so every member agrees bit-exactly on kept rows.
inline std::vector<Grid> ensemble_sample(const ModelParams& student_params, const NetSpec& spec,
                                         const NoiseSchedule& sched, const Grid& mu,
                                         const AngleMask& mask, int N, uint64_t seed) {
    if (N < 1) throw std::invalid_argument("ensemble_sample: N < 1");
    std::vector<Grid> out;
    out.reserve(N);
    Rng root(seed);
    Grid lowfid = low_fidelity_inpaint(mu, mask);
    for (int i = 0; i < N; ++i) {
        Rng rng = root.derive(0xE45ULL + static_cast<uint64_t>(i));
        Grid x_T = sample_terminal(sched, mu, rng);
        Grid r_hat = student_predict(student_params, spec, x_T, mu, lowfid);
        out.push_back(rectify_rnsd(x_T - r_hat, mu, mask));
    }
    return out;
}

inline void ensemble_mean_std(const std::vector<Image>& members, Image& mean, Image& stddev) {
    const int N = static_cast<int>(members.size());
    mean = Grid(members[0].rows, members[0].cols);
    stddev = Grid(members[0].rows, members[0].cols);
    for (const Image& m : members) mean += m;
    mean *= 1.0 / N;
    if (N > 1) {
        for (const Image& m : members)
            for (size_t i = 0; i < stddev.v.size(); ++i) {
                const double d = m.v[i] - mean.v[i];
                stddev.v[i] += d * d;
            }
        for (double& s : stddev.v) s = std::sqrt(s / (N - 1));  // unbiased
    }
}

inline Image postproc_refine(const ModelParams& tau_params, const NetSpec& spec,
                             const Image& fbp_mean, const Image& fbp_std,
                             NetWorkspace* ws = nullptr) {
    return net_forward(tau_params, spec, {fbp_mean, fbp_std}, 0.0, ws)[0];
}

// Precomputed refinement training inputs for one phantom.
struct PostprocSample {
    Image fbp_mean;
    Image fbp_std;
    Image gt;
};

// FBP of the rectified ensemble (or of the bare masked sinogram when
// use_inpainting is false, the "direct post-processing" ablation).
inline PostprocSample make_postproc_sample(const ModelParams& student_params, const NetSpec& spec,
                                           const NoiseSchedule& sched, const DatasetItem& item,
                                           const AngleMask& mask, double scale, int n_ensemble,
                                           uint64_t seed, bool use_inpainting = true) {
    PostprocSample ps;
    ps.gt = item.phantom;
    const int n = item.phantom.rows;
    Sinogram masked = apply_mask(item.sino, mask);
    if (!use_inpainting) {
        ps.fbp_mean = fbp(masked, n, Apodization::None);
        ps.fbp_std = Grid(n, n);
        return ps;
    }
    Grid mu = masked.data * (1.0 / scale);
    std::vector<Grid> sinos = ensemble_sample(student_params, spec, sched, mu, mask, n_ensemble, seed);
    std::vector<Image> recons;
    recons.reserve(sinos.size());
    for (const Grid& s : sinos) {
        Sinogram phys(item.sino.geo);
        phys.data = s * scale;
        recons.push_back(fbp(phys, n, Apodization::None));
    }
    ensemble_mean_std(recons, ps.fbp_mean, ps.fbp_std);
    return ps;
}

// Refinement training: direct image prediction from (mean, std), MSE plus a
// proxy term (proxy_weight 0 drops the perceptual term, an ablation switch).
inline TrainResult train_postproc(const std::vector<PostprocSample>& samples,
                                  const TrainingConfig& cfg, ModelParams* resume = nullptr) {
    if (samples.empty()) throw std::invalid_argument("train_postproc: empty sample set");
    const NetSpec spec = postproc_net_spec(cfg.hidden_channels);
    Rng root(cfg.seed);
    TrainResult res;
    res.params = resume ? *resume : init_params(spec, root.derive(0));
    Grads grads = zero_grads(res.params);
    while (res.params.step_count < cfg.iterations) {
        const int64_t step = res.params.step_count;
        Rng rng = root.derive(0x9057ULL + static_cast<uint64_t>(step));
        for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const PostprocSample& s = samples[rng.uniform_index(samples.size())];
            NetWorkspace ws;
            Grid out = postproc_refine(res.params, spec, s.fbp_mean, s.fbp_std, &ws);
            loss += mse(out, s.gt) / cfg.batch_size;
            Grid up = mse_grad(out, s.gt);
            if (cfg.proxy_weight > 0.0) {
                loss += cfg.proxy_weight * perceptual_proxy(out, s.gt, cfg.proxy_gamma) / cfg.batch_size;
                Grid gp = perceptual_proxy_grad(out, s.gt, cfg.proxy_gamma);
                gp *= cfg.proxy_weight;
                up += gp;
            }
            up *= 1.0 / cfg.batch_size;
            net_backward(res.params, spec, ws, {up}, grads);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("train_postproc: loss diverged (non-finite)");
        AdamConfig ac;
        ac.lr = cosine_lr(cfg.lr, cfg.lr_min, step, cfg.iterations);
        adam_step(res.params, grads, ac);
        res.loss_log.push_back(loss);
    }
    return res;
}

// Direct one-step MSE inpainter (distillation ablation): maps (mu, lowfid)
// straight to the ground-truth sinogram with a plain MSE loss; no diffusion,
// no rectification.
inline TrainResult train_mse_inpainter(const std::vector<SinoSample>& samples,
                                       const TrainingConfig& cfg, ModelParams* resume = nullptr) {
    if (samples.empty()) throw std::invalid_argument("train_mse_inpainter: empty sample set");
    const NetSpec spec = mse_net_spec(cfg.hidden_channels);
    Rng root(cfg.seed);
    TrainResult res;
    res.params = resume ? *resume : init_params(spec, root.derive(0));
    Grads grads = zero_grads(res.params);
    while (res.params.step_count < cfg.iterations) {
        const int64_t step = res.params.step_count;
        Rng rng = root.derive(0x3153ULL + static_cast<uint64_t>(step));
        for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const SinoSample& s = samples[rng.uniform_index(samples.size())];
            NetWorkspace ws;
            // residual convention: prediction = lowfid - r_hat
            Grid r_hat = net_forward(res.params, spec, {s.lowfid, s.mu}, 1.0, &ws)[0];
            Grid pred = s.lowfid - r_hat;
            loss += mse(pred, s.x0) / cfg.batch_size;
            Grid up = mse_grad(pred, s.x0);
            up *= -1.0 / cfg.batch_size;
            net_backward(res.params, spec, ws, {up}, grads);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("train_mse_inpainter: loss diverged (non-finite)");
        AdamConfig ac;
        ac.lr = cosine_lr(cfg.lr, cfg.lr_min, step, cfg.iterations);
        adam_step(res.params, grads, ac);
        res.loss_log.push_back(loss);
    }
    return res;
}

inline Grid mse_inpaint_predict(const ModelParams& params, const NetSpec& spec, const Grid& mu,
                                const AngleMask& mask) {
    Grid lowfid = low_fidelity_inpaint(mu, mask);
    Grid r_hat = net_forward(params, spec, {lowfid, mu}, 1.0)[0];
    return lowfid - r_hat;
}

struct RestoreResult {
    Image refined;                  // final clipped output
    Image fbp_mean;
    Image fbp_std;
    std::vector<Sinogram> inpainted;  // physical units, rectified
};

// End-to-end inference: ensemble of one-step inpaintings, FBP each, refine
// the (mean, std) pair, clip to [0,1].
inline RestoreResult full_restore(const ModelParams& student_params, const NetSpec& student_spec,
                                  const ModelParams& tau_params, const NetSpec& tau_spec,
                                  const NoiseSchedule& sched, const Sinogram& observed,
                                  const AngleMask& mask, int image_size, double scale, int N,
                                  uint64_t seed) {
    Sinogram y = apply_mask(observed, mask);
    Grid mu = y.data * (1.0 / scale);
    std::vector<Grid> sinos = ensemble_sample(student_params, student_spec, sched, mu, mask, N, seed);
    RestoreResult res;
    std::vector<Image> recons;
    recons.reserve(sinos.size());
    for (const Grid& s : sinos) {
        Sinogram phys(y.geo);
        phys.data = s * scale;
        // re-rectify in physical units so kept rows equal the observation
        // bit-exactly regardless of the normalization scale
        phys.data = rectify_rnsd(phys.data, y.data, mask);
        recons.push_back(fbp(phys, image_size, Apodization::None));
        res.inpainted.push_back(std::move(phys));
    }
    ensemble_mean_std(recons, res.fbp_mean, res.fbp_std);
    res.refined = postproc_refine(tau_params, tau_spec, res.fbp_mean, res.fbp_std);
    clip01(res.refined);
    return res;
}

}  // namespace wedgefill
