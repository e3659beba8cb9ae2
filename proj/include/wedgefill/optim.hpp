#pragma once

#include <cmath>
#include <stdexcept>

#include "wedgefill/tensor.hpp"

namespace wedgefill {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

inline void adam_step(ModelParams& params, const Grads& grads, const AdamConfig& cfg) {
    if (grads.size() != params.entries.size())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    for (const Tensor& g : grads)
        for (double x : g.data)
            if (!std::isfinite(x)) throw std::runtime_error("adam_step: non-finite gradient");
    params.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(params.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(params.step_count));
    for (size_t e = 0; e < params.entries.size(); ++e) {
        ParamEntry& p = params.entries[e];
        const Tensor& g = grads[e];
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            double& m = p.m.data[i];
            double& v = p.v.data[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g.data[i];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            const double mh = m / bc1;
            const double vh = v / bc2;
            double& x = p.value.data[i];
            if (cfg.weight_decay > 0.0) x -= cfg.lr * cfg.weight_decay * x;
            x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        }
    }
}

// Cosine decay from lr0 to lr_min over total steps.
inline double cosine_lr(double lr0, double lr_min, int64_t step, int64_t total) {
    if (total <= 1) return lr0;
    const double f = 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min<int64_t>(step, total) /
                                           static_cast<double>(total)));
    return lr_min + (lr0 - lr_min) * f;
}

}  // namespace wedgefill
