#pragma once

#include <cmath>
#include <stdexcept>

#include "wedgefill/grid.hpp"
#include "wedgefill/rng.hpp"
#include "wedgefill/tomo.hpp"

namespace wedgefill {

struct Ellipse {
    double value;     // signed additive intensity
    double a, b;      // semi-axes, in [-1,1] coordinates
    double x0, y0;    // center
    double phi_deg;   // rotation
};

inline void add_ellipse(Image& img, const Ellipse& e) {
    const int n = img.rows;
    const double half = 0.5 * (n - 1);
    const double c = std::cos(deg2rad(e.phi_deg)), s = std::sin(deg2rad(e.phi_deg));
    for (int r = 0; r < n; ++r) {
        const double y = (half - r) / (0.5 * n);
        for (int col = 0; col < n; ++col) {
            const double x = (col - half) / (0.5 * n);
            const double xr = (x - e.x0) * c + (y - e.y0) * s;
            const double yr = -(x - e.x0) * s + (y - e.y0) * c;
            if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) img.at(r, col) += e.value;
        }
    }
}

// Classical ten-ellipse head phantom, min-max rescaled to [0,1].
inline Image shepp_logan(int size) {
    if (size < 16) throw std::invalid_argument("shepp_logan: size < 16");
    static const Ellipse ells[10] = {
        {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
        {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
        {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
        {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
        {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
        {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
        {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
        {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
        {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
        {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
    };
    Image img(size, size, 0.0);
    for (const Ellipse& e : ells) add_ellipse(img, e);
    double lo = img.v[0], hi = img.v[0];
    for (double x : img.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    for (double& x : img.v) x = (x - lo) / (hi - lo);
    return img;
}

// 5-12 random ellipses, centers within radius 0.8, signed intensities in
// [-0.5, 1], clipped to [0,1]. Deterministic given the seed.
inline Image random_ellipse_phantom(int size, uint64_t seed) {
    if (size < 16) throw std::invalid_argument("random_ellipse_phantom: size < 16");
    Rng rng(seed ^ 0xE11195E5ULL);
    Image img(size, size, 0.0);
    const int count = 5 + static_cast<int>(rng.uniform_index(8));
    for (int k = 0; k < count; ++k) {
        Ellipse e;
        const double rad = 0.8 * rng.uniform();
        const double ang = rng.uniform(0.0, 2.0 * kPi);
        e.x0 = rad * std::cos(ang);
        e.y0 = rad * std::sin(ang);
        e.a = rng.uniform(0.05, 0.45);
        e.b = rng.uniform(0.05, 0.45);
        e.phi_deg = rng.uniform(0.0, 180.0);
        e.value = rng.uniform(-0.5, 1.0);
        add_ellipse(img, e);
    }
    clip01(img);
    return img;
}

}  // namespace wedgefill
