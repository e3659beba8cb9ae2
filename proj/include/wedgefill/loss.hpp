#pragma once

#include <stdexcept>

#include "wedgefill/grid.hpp"

namespace wedgefill {

// Forward-difference spatial gradients (last row/col zero).
inline void spatial_gradients(const Grid& a, Grid& gx, Grid& gy) {
    gx = Grid(a.rows, a.cols);
    gy = Grid(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) {
            if (c + 1 < a.cols) gx.at(r, c) = a.at(r, c + 1) - a.at(r, c);
            if (r + 1 < a.rows) gy.at(r, c) = a.at(r + 1, c) - a.at(r, c);
        }
}

// Gradient-domain perceptual stand-in: MSE(a,b) + gamma * MSE(grad a, grad b).
// Symmetric, zero iff a == b, and differentiable everywhere.
inline double perceptual_proxy(const Grid& a, const Grid& b, double gamma = 0.5) {
    if (!a.same_shape(b)) throw std::invalid_argument("perceptual_proxy: shape mismatch");
    Grid ax, ay, bx, by;
    spatial_gradients(a, ax, ay);
    spatial_gradients(b, bx, by);
    return mse(a, b) + gamma * 0.5 * (mse(ax, bx) + mse(ay, by));
}

// d perceptual_proxy / d a.
inline Grid perceptual_proxy_grad(const Grid& a, const Grid& b, double gamma = 0.5) {
    if (!a.same_shape(b)) throw std::invalid_argument("perceptual_proxy_grad: shape mismatch");
    const double n = static_cast<double>(a.v.size());
    Grid g(a.rows, a.cols);
    for (size_t i = 0; i < a.v.size(); ++i) g.v[i] = 2.0 * (a.v[i] - b.v[i]) / n;
    // transpose of the forward-difference operator
    const double w = gamma * 0.5 * 2.0 / n;
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) {
            if (c + 1 < a.cols) {
                const double d = (a.at(r, c + 1) - a.at(r, c)) - (b.at(r, c + 1) - b.at(r, c));
                g.at(r, c + 1) += w * d;
                g.at(r, c) -= w * d;
            }
            if (r + 1 < a.rows) {
                const double d = (a.at(r + 1, c) - a.at(r, c)) - (b.at(r + 1, c) - b.at(r, c));
                g.at(r + 1, c) += w * d;
                g.at(r, c) -= w * d;
            }
        }
    return g;
}

// d MSE(a,b) / d a.
inline Grid mse_grad(const Grid& a, const Grid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse_grad: shape mismatch");
    Grid g(a.rows, a.cols);
    const double n = static_cast<double>(a.v.size());
    for (size_t i = 0; i < a.v.size(); ++i) g.v[i] = 2.0 * (a.v[i] - b.v[i]) / n;
    return g;
}

}  // namespace wedgefill
