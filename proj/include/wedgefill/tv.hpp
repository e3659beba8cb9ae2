#pragma once

#include <cmath>
#include <vector>

#include "wedgefill/grid.hpp"
#include "wedgefill/rng.hpp"
#include "wedgefill/tomo.hpp"

namespace wedgefill {

struct TvResult {
    Image image;                  // ergodic average of the primal iterates
    std::vector<double> objective;  // logged checkpoints
    bool converged = true;        // false if the objective rose 10 checks in a row
};

// Total-variation reconstruction: min_x 0.5 ||M R x - y||^2 + lambda TV(x),
// solved with a primal-dual (Chambolle-Pock) iteration on K = (M R; grad),
// step sizes tau = sigma = 0.99 / ||K|| with ||K|| from power iteration.
inline TvResult tv_reconstruct(const Sinogram& y, const AngleMask& mask, int image_size,
                               double lambda_tv, int iters, uint64_t seed = 12345) {
    y.validate();
    const ScanGeometry& geo = y.geo;
    const int n = image_size;

    const Sinogram ym = apply_mask(y, mask);

    auto fwd = [&](const Image& x) { return apply_mask(radon_forward(x, geo), mask); };
    auto adj = [&](const Sinogram& s) { return backproject(apply_mask(s, mask), n); };

    auto grad = [&](const Image& x, Grid& gx, Grid& gy) {
        gx = Grid(n, n);
        gy = Grid(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                if (c + 1 < n) gx.at(r, c) = x.at(r, c + 1) - x.at(r, c);
                if (r + 1 < n) gy.at(r, c) = x.at(r + 1, c) - x.at(r, c);
            }
    };
    auto div_adj = [&](const Grid& px, const Grid& py) {
        Grid out(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                if (c + 1 < n) {
                    out.at(r, c) -= px.at(r, c);
                    out.at(r, c + 1) += px.at(r, c);
                }
                if (r + 1 < n) {
                    out.at(r, c) -= py.at(r, c);
                    out.at(r + 1, c) += py.at(r, c);
                }
            }
        return out;
    };

    // ||K||^2 by 50 power iterations on K^T K
    double L2 = 1.0;
    {
        Image v(n, n);
        Rng rng(seed);
        rng.fill_normal(v);
        for (int it = 0; it < 50; ++it) {
            Image w = adj(fwd(v));
            Grid gx, gy;
            grad(v, gx, gy);
            w += div_adj(gx, gy);
            L2 = std::sqrt(dot(w, w));
            if (L2 <= 0.0) break;
            w *= 1.0 / L2;
            v = w;
        }
    }
    const double step = 0.99 / std::sqrt(std::max(L2, 1e-12));
    const double tau = step, sigma = step;

    Image x(n, n), xbar(n, n), xsum(n, n);
    Sinogram q(geo);
    Grid px(n, n), py(n, n);

    auto objective = [&](const Image& z) {
        Sinogram r = fwd(z);
        r.data -= ym.data;
        double data = 0.5 * dot(r.data, r.data);
        Grid gx, gy;
        grad(z, gx, gy);
        double tv = 0.0;
        for (size_t i = 0; i < gx.v.size(); ++i) tv += std::sqrt(gx.v[i] * gx.v[i] + gy.v[i] * gy.v[i]);
        return data + lambda_tv * tv;
    };

    TvResult res;
    const int check_every = std::max(1, iters / 20);
    int rising = 0;
    double prev_obj = 0.0;
    bool have_prev = false;

    for (int it = 1; it <= iters; ++it) {
        // dual updates at xbar
        {
            Sinogram ax = fwd(xbar);
            for (size_t i = 0; i < q.data.v.size(); ++i)
                q.data.v[i] = (q.data.v[i] + sigma * (ax.data.v[i] - ym.data.v[i])) / (1.0 + sigma);
            Grid gx, gy;
            grad(xbar, gx, gy);
            for (size_t i = 0; i < px.v.size(); ++i) {
                px.v[i] += sigma * gx.v[i];
                py.v[i] += sigma * gy.v[i];
                const double norm = std::sqrt(px.v[i] * px.v[i] + py.v[i] * py.v[i]);
                if (norm > lambda_tv) {
                    const double s = lambda_tv / norm;
                    px.v[i] *= s;
                    py.v[i] *= s;
                }
            }
        }
        // primal update
        Image xprev = x;
        Image gstep = adj(q);
        gstep += div_adj(px, py);
        for (size_t i = 0; i < x.v.size(); ++i) x.v[i] -= tau * gstep.v[i];
        for (size_t i = 0; i < x.v.size(); ++i) xbar.v[i] = 2.0 * x.v[i] - xprev.v[i];
        xsum += x;

        if (it % check_every == 0) {
            Image avg = xsum;
            avg *= 1.0 / it;
            const double obj = objective(avg);
            res.objective.push_back(obj);
            if (have_prev && obj > prev_obj + 1e-12) {
                if (++rising >= 10) res.converged = false;
            } else {
                rising = 0;
            }
            prev_obj = obj;
            have_prev = true;
        }
    }
    res.image = xsum;
    res.image *= 1.0 / iters;
    return res;
}

}  // namespace wedgefill
