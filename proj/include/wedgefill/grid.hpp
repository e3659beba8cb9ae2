#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wedgefill {

// Dense row-major 2-D array of doubles. Images, sinograms and network
// feature maps are all Grids underneath.
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return v.size(); }

    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Grid& operator+=(const Grid& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    Grid& operator-=(const Grid& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    Grid& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
};

inline Grid operator+(Grid a, const Grid& b) { a += b; return a; }
inline Grid operator-(Grid a, const Grid& b) { a -= b; return a; }
inline Grid operator*(Grid a, double s) { a *= s; return a; }
inline Grid operator*(double s, Grid a) { a *= s; return a; }

inline double dot(const Grid& a, const Grid& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

inline double sum(const Grid& a) {
    double s = 0.0;
    for (double x : a.v) s += x;
    return s;
}

inline double mse(const Grid& a, const Grid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return s / static_cast<double>(a.v.size());
}

inline void clip01(Grid& g) {
    for (double& x : g.v) x = std::clamp(x, 0.0, 1.0);
}

}  // namespace wedgefill
