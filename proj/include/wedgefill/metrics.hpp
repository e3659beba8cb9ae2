#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wedgefill/grid.hpp"

namespace wedgefill {

// Capped sentinel for identical images (MSE = 0).
constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) on [0,1]-normalized images.
inline double psnr(const Grid& a, const Grid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1. Mean over valid window positions only.
inline double ssim(const Grid& a, const Grid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    constexpr int W = 11;
    if (a.rows < W || a.cols < W) throw std::invalid_argument("ssim: image smaller than window");
    static const std::vector<double> win = [] {
        std::vector<double> w(W);
        double s = 0.0;
        for (int i = 0; i < W; ++i) {
            const double d = i - (W - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            s += w[i];
        }
        for (double& x : w) x /= s;
        return w;
    }();
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

    // separable weighted moments
    auto hconv = [&](const Grid& src) {
        Grid out(src.rows, src.cols - W + 1);
        for (int r = 0; r < src.rows; ++r)
            for (int c = 0; c < out.cols; ++c) {
                double s = 0.0;
                for (int k = 0; k < W; ++k) s += win[k] * src.at(r, c + k);
                out.at(r, c) = s;
            }
        return out;
    };
    auto vconv = [&](const Grid& src) {
        Grid out(src.rows - W + 1, src.cols);
        for (int c = 0; c < src.cols; ++c)
            for (int r = 0; r < out.rows; ++r) {
                double s = 0.0;
                for (int k = 0; k < W; ++k) s += win[k] * src.at(r + k, c);
                out.at(r, c) = s;
            }
        return out;
    };
    auto wmean = [&](const Grid& src) { return vconv(hconv(src)); };

    Grid aa(a.rows, a.cols), bb(a.rows, a.cols), ab(a.rows, a.cols);
    for (size_t i = 0; i < a.v.size(); ++i) {
        aa.v[i] = a.v[i] * a.v[i];
        bb.v[i] = b.v[i] * b.v[i];
        ab.v[i] = a.v[i] * b.v[i];
    }
    Grid mu_a = wmean(a), mu_b = wmean(b);
    Grid m_aa = wmean(aa), m_bb = wmean(bb), m_ab = wmean(ab);
    double total = 0.0;
    for (size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = m_aa.v[i] - ma * ma;
        const double vb = m_bb.v[i] - mb * mb;
        const double cov = m_ab.v[i] - ma * mb;
        total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) /
                 ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    return total / static_cast<double>(mu_a.v.size());
}

}  // namespace wedgefill
