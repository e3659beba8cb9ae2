#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace wedgefill {

// Mean-reversion schedule. Per-step drift rates zeta_t (t = 1..T) with
// cumulative sums zeta_bar_t; the noise power is tied to the drift,
// sigma_t^2 = 2 * lambda^2 * zeta_t, which is what makes the marginal
// x_t | x_0 ~ N(mu + (x_0 - mu) e^{-zeta_bar_t}, lambda^2 (1 - e^{-2 zeta_bar_t}))
// hold in closed form.
struct NoiseSchedule {
    int T = 0;
    double lambda = 0.5;
    std::vector<double> zeta;      // zeta[t-1] = zeta_t, t = 1..T
    std::vector<double> zeta_bar;  // zeta_bar[t] = sum_{z<=t} zeta_z, t = 0..T

    double lambda2() const { return lambda * lambda; }
    double sigma2(int t) const { return 2.0 * lambda2() * zeta_at(t); }
    double zeta_at(int t) const {
        if (t < 1 || t > T) throw std::out_of_range("NoiseSchedule: t out of [1,T]");
        return zeta[t - 1];
    }
    // Unit-step discretization: the integral of a piecewise-constant rate
    // over one step is the rate itself.
    double zeta_prime(int t) const { return zeta_at(t); }
    double zeta_bar_at(int t) const {
        if (t < 0 || t > T) throw std::out_of_range("NoiseSchedule: t out of [0,T]");
        return zeta_bar[t];
    }

    void validate() const {
        if (T < 1 || static_cast<int>(zeta.size()) != T || static_cast<int>(zeta_bar.size()) != T + 1)
            throw std::invalid_argument("NoiseSchedule: inconsistent sizes");
        if (!(lambda > 0.0)) throw std::invalid_argument("NoiseSchedule: lambda must be positive");
        for (double z : zeta)
            if (!(z > 0.0)) throw std::invalid_argument("NoiseSchedule: zeta_t must be positive");
        if (zeta_bar.back() < std::log(100.0) - 1e-9)
            throw std::invalid_argument("NoiseSchedule: zeta_bar_T below ln(100)");
    }
};

// Linearly increasing drift rates, globally rescaled so that
// e^{-zeta_bar_T} = 0.01 (terminal state within 1% of stationarity).
inline NoiseSchedule make_linear_schedule(int T, double lambda = 0.5, double zeta_lo = 0.002,
                                          double zeta_hi = 0.04) {
    if (T < 1) throw std::invalid_argument("make_linear_schedule: T < 1");
    NoiseSchedule s;
    s.T = T;
    s.lambda = lambda;
    s.zeta.resize(T);
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        s.zeta[t] = T > 1 ? zeta_lo + (zeta_hi - zeta_lo) * t / (T - 1) : zeta_lo;
        total += s.zeta[t];
    }
    const double scale = std::log(100.0) / total;
    s.zeta_bar.resize(T + 1);
    s.zeta_bar[0] = 0.0;
    for (int t = 0; t < T; ++t) {
        s.zeta[t] *= scale;
        s.zeta_bar[t + 1] = s.zeta_bar[t] + s.zeta[t];
    }
    s.validate();
    return s;
}

}  // namespace wedgefill
