#pragma once

#include <cmath>
#include <stdexcept>

#include "wedgefill/grid.hpp"
#include "wedgefill/rng.hpp"
#include "wedgefill/schedule.hpp"

namespace wedgefill {

struct MarginalParams {
    double mean_coeff;  // e^{-zeta_bar_t}
    double std;         // lambda * sqrt(1 - e^{-2 zeta_bar_t})
};

// x_t | x_0 ~ N(mu + (x_0 - mu) * mean_coeff, std^2) per pixel.
inline MarginalParams marginal_params(const NoiseSchedule& s, int t) {
    const double zb = s.zeta_bar_at(t);
    const double mc = std::exp(-zb);
    return {mc, s.lambda * std::sqrt(1.0 - mc * mc)};
}

inline Grid forward_sample(const NoiseSchedule& s, int t, const Grid& x0, const Grid& mu, Rng& rng) {
    if (!x0.same_shape(mu)) throw std::invalid_argument("forward_sample: shape mismatch");
    const auto [mc, sd] = marginal_params(s, t);
    Grid out(x0.rows, x0.cols);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = mu.v[i] + (x0.v[i] - mu.v[i]) * mc + sd * rng.normal();
    return out;
}

struct PosteriorParams {
    double a;  // weight on (x_t - mu)
    double b;  // weight on (x_0 - mu)
    double v;  // posterior variance
};

// Gaussian posterior p(x_{t-1} | x_t, x_0): mean = mu + a (x_t - mu) + b (x_0 - mu).
// Coefficients are pinned by the requirement that composing the posterior
// with the one-step kernel reproduces the closed-form marginal.
inline PosteriorParams posterior_params(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T) throw std::out_of_range("posterior_params: t out of [1,T]");
    const double zb_prev = s.zeta_bar_at(t - 1);
    const double zb = s.zeta_bar_at(t);
    const double zp = s.zeta_prime(t);
    const double e_prev2 = std::exp(-2.0 * zb_prev);
    const double e2 = std::exp(-2.0 * zb);
    const double ep = std::exp(-zp);
    PosteriorParams p;
    p.a = ep * (1.0 - e_prev2) / (1.0 - e2);
    p.b = std::exp(-zb_prev) * (1.0 - ep * ep) / (1.0 - e2);
    p.v = s.lambda2() * (1.0 - e_prev2) * (1.0 - ep * ep) / (1.0 - e2);
    return p;
}

// score = grad_x log p(x_t | x_0) recovered from the predicted normalized noise.
inline Grid score_from_eps(const NoiseSchedule& s, int t, const Grid& eps_hat) {
    if (t < 1 || t > s.T) throw std::out_of_range("score_from_eps: t out of [1,T]");
    const double sd = marginal_params(s, t).std;
    if (!(sd > 0.0)) throw std::invalid_argument("score_from_eps: zero std");
    Grid out = eps_hat;
    out *= -1.0 / sd;
    return out;
}

// One ancestral sampling step: draw x_{t-1} from the posterior with the
// model's estimate of x_0 plugged in.
inline Grid reverse_sde_step(const NoiseSchedule& s, int t, const Grid& x_t, const Grid& mu,
                             const Grid& x0_hat, Rng& rng) {
    if (!x_t.same_shape(mu) || !x_t.same_shape(x0_hat))
        throw std::invalid_argument("reverse_sde_step: shape mismatch");
    const auto [a, b, v] = posterior_params(s, t);
    const double sd = std::sqrt(std::max(0.0, v));
    Grid out(x_t.rows, x_t.cols);
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double mean = mu.v[i] + a * (x_t.v[i] - mu.v[i]) + b * (x0_hat.v[i] - mu.v[i]);
        out.v[i] = sd > 0.0 ? mean + sd * rng.normal() : mean;
    }
    return out;
}

// Deterministic probability-flow step from t to t-1. Uses the exponential
// update that solves the flow exactly for a Gaussian conditional: the score
// is converted to an x_0 estimate through the marginal relation and the
// state is re-projected onto the t-1 marginal at the same noise quantile.
// A plain unit Euler step leaves an O(sqrt(zeta_1)) residual of the terminal
// noise in the final iterate; this form does not.
inline Grid reverse_ode_step(const NoiseSchedule& s, int t, const Grid& x_t, const Grid& mu,
                             const Grid& score) {
    if (!x_t.same_shape(mu) || !x_t.same_shape(score))
        throw std::invalid_argument("reverse_ode_step: shape mismatch");
    const auto [a_t, s_t] = marginal_params(s, t);
    const auto [a_p, s_p] = marginal_params(s, t - 1);
    // x0_dev = (x_t - mu + s_t^2 * score) / a_t;  out = mu + a_{t-1} x0_dev + s_{t-1} eps
    // with eps = -s_t * score, folded into two coefficients:
    const double ca = a_p / a_t;                  // on (x_t - mu)
    const double cs = a_p / a_t * s_t * s_t - s_p * s_t;  // on score
    Grid out(x_t.rows, x_t.cols);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = mu.v[i] + ca * (x_t.v[i] - mu.v[i]) + cs * score.v[i];
    return out;
}

// Analytic conditional score when x_0 is known; used by oracle tests and
// never by the trained pipeline.
inline Grid analytic_score(const NoiseSchedule& s, int t, const Grid& x_t, const Grid& mu,
                           const Grid& x0) {
    const auto [mc, sd] = marginal_params(s, t);
    Grid out(x_t.rows, x_t.cols);
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double mean = mu.v[i] + (x0.v[i] - mu.v[i]) * mc;
        out.v[i] = -(x_t.v[i] - mean) / (sd * sd);
    }
    return out;
}

}  // namespace wedgefill
