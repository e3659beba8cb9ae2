#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wedgefill/fft.hpp"
#include "wedgefill/grid.hpp"

namespace wedgefill {

constexpr double kPi = 3.14159265358979323846264338327950288;

inline double deg2rad(double d) { return d * kPi / 180.0; }

// Reconstruction target: square image, values are normalized attenuation.
using Image = Grid;

// Parallel-beam scan description. Angles are i * angle_step_deg for
// i in [0, num_angles); detector bins are centered on the rotation axis.
struct ScanGeometry {
    int num_angles = 180;
    double angle_step_deg = 1.0;
    int detector_bins = 192;
    double detector_spacing = 1.0;

    double coverage_deg() const { return num_angles * angle_step_deg; }
    double angle_deg(int i) const { return i * angle_step_deg; }
    double detector_t(int j) const {
        return (j - 0.5 * (detector_bins - 1)) * detector_spacing;
    }

    bool operator==(const ScanGeometry&) const = default;

    void validate() const {
        if (num_angles <= 0 || angle_step_deg <= 0.0 || detector_bins <= 0 || detector_spacing <= 0.0)
            throw std::invalid_argument("ScanGeometry: fields must be positive");
        if (coverage_deg() > 180.0 + 1e-9)
            throw std::invalid_argument("ScanGeometry: coverage exceeds 180 degrees");
    }

    // Detector must span the image diagonal.
    void validate_covers(int image_size) const {
        validate();
        if (detector_bins * detector_spacing < image_size * std::sqrt(2.0) - 1e-9)
            throw std::invalid_argument("ScanGeometry: detector does not cover image support");
    }
};

struct Sinogram {
    ScanGeometry geo;
    Grid data;  // num_angles x detector_bins

    Sinogram() = default;
    explicit Sinogram(const ScanGeometry& g, double fill = 0.0)
        : geo(g), data(g.num_angles, g.detector_bins, fill) {}

    void validate() const {
        geo.validate();
        if (data.rows != geo.num_angles || data.cols != geo.detector_bins)
            throw std::invalid_argument("Sinogram: shape does not match geometry");
    }
};

// Limited-angle degradation: a contiguous angular block of rows is missing.
struct AngleMask {
    ScanGeometry geo;
    std::vector<uint8_t> kept;  // per angle row
    double missing_start_deg = 0.0;

    int num_missing() const {
        int n = 0;
        for (uint8_t k : kept) n += (k == 0);
        return n;
    }
    double missing_deg() const { return num_missing() * geo.angle_step_deg; }
};

// Missing wedge [start_deg, start_deg + missing_deg). A negative start_deg
// selects the default trailing block [coverage - missing, coverage).
inline AngleMask make_wedge_mask(const ScanGeometry& geo, double missing_deg, double start_deg = -1.0) {
    geo.validate();
    if (missing_deg <= 0.0 || missing_deg >= geo.coverage_deg())
        throw std::invalid_argument("make_wedge_mask: missing_deg out of range");
    if (start_deg < 0.0) start_deg = geo.coverage_deg() - missing_deg;
    if (start_deg + missing_deg > geo.coverage_deg() + 1e-9)
        throw std::invalid_argument("make_wedge_mask: wedge exceeds coverage");
    AngleMask m;
    m.geo = geo;
    m.missing_start_deg = start_deg;
    m.kept.resize(geo.num_angles, 1);
    for (int i = 0; i < geo.num_angles; ++i) {
        double a = geo.angle_deg(i);
        if (a >= start_deg - 1e-9 && a < start_deg + missing_deg - 1e-9) m.kept[i] = 0;
    }
    if (m.num_missing() == 0 || m.num_missing() == geo.num_angles)
        throw std::invalid_argument("make_wedge_mask: degenerate mask");
    return m;
}

inline AngleMask full_keep_mask(const ScanGeometry& geo) {
    AngleMask m;
    m.geo = geo;
    m.kept.resize(geo.num_angles, 1);
    return m;
}

// Kept rows copied, missing rows zeroed. Acts as both A and its
// pseudo-inverse (row masking is its own pseudo-inverse for inpainting).
inline Sinogram apply_mask(const Sinogram& sino, const AngleMask& mask) {
    sino.validate();
    if (!(sino.geo == mask.geo)) throw std::invalid_argument("apply_mask: geometry mismatch");
    Sinogram out = sino;
    for (int i = 0; i < sino.geo.num_angles; ++i) {
        if (!mask.kept[i]) {
            double* r = out.data.row(i);
            for (int j = 0; j < sino.geo.detector_bins; ++j) r[j] = 0.0;
        }
    }
    return out;
}

namespace detail {

// Joseph-style projection: walk the driving axis (the one most aligned with
// the ray), linearly interpolating along the other axis. Templated so the
// exact same stencil serves as forward (gather) and adjoint (scatter).
template <bool Forward>
inline void radon_stencil(Grid& img, Grid& sino, const ScanGeometry& geo) {
    const int n = img.rows;
    const double cx = 0.5 * (n - 1);
    const double cy = 0.5 * (n - 1);
    for (int a = 0; a < geo.num_angles; ++a) {
        const double th = deg2rad(geo.angle_deg(a));
        const double c = std::cos(th), s = std::sin(th);
        double* srow = sino.row(a);
        if (std::fabs(c) >= std::fabs(s)) {
            // drive along rows (y); interpolate along columns
            const double w = 1.0 / std::fabs(c);
            for (int j = 0; j < geo.detector_bins; ++j) {
                const double t = geo.detector_t(j);
                double acc = 0.0;
                for (int r = 0; r < n; ++r) {
                    const double x = (t - (r - cy) * s) / c + cx;
                    const int xi = static_cast<int>(std::floor(x));
                    const double f = x - xi;
                    if constexpr (Forward) {
                        if (xi >= 0 && xi < n) acc += (1.0 - f) * img.at(r, xi);
                        if (xi + 1 >= 0 && xi + 1 < n) acc += f * img.at(r, xi + 1);
                    } else {
                        const double val = srow[j] * w;
                        if (xi >= 0 && xi < n) img.at(r, xi) += (1.0 - f) * val;
                        if (xi + 1 >= 0 && xi + 1 < n) img.at(r, xi + 1) += f * val;
                    }
                }
                if constexpr (Forward) srow[j] = acc * w;
            }
        } else {
            // drive along columns (x); interpolate along rows
            const double w = 1.0 / std::fabs(s);
            for (int j = 0; j < geo.detector_bins; ++j) {
                const double t = geo.detector_t(j);
                double acc = 0.0;
                for (int col = 0; col < n; ++col) {
                    const double y = (t - (col - cx) * c) / s + cy;
                    const int yi = static_cast<int>(std::floor(y));
                    const double f = y - yi;
                    if constexpr (Forward) {
                        if (yi >= 0 && yi < n) acc += (1.0 - f) * img.at(yi, col);
                        if (yi + 1 >= 0 && yi + 1 < n) acc += f * img.at(yi + 1, col);
                    } else {
                        const double val = srow[j] * w;
                        if (yi >= 0 && yi < n) img.at(yi, col) += (1.0 - f) * val;
                        if (yi + 1 >= 0 && yi + 1 < n) img.at(yi + 1, col) += f * val;
                    }
                }
                if constexpr (Forward) srow[j] = acc * w;
            }
        }
    }
}

}  // namespace detail

inline Sinogram radon_forward(const Image& img, const ScanGeometry& geo) {
    if (img.rows != img.cols || img.rows < 16)
        throw std::invalid_argument("radon_forward: image must be square, size >= 16");
    geo.validate_covers(img.rows);
    if (!img.all_finite()) throw std::invalid_argument("radon_forward: non-finite image");
    Sinogram sino(geo);
    detail::radon_stencil<true>(const_cast<Image&>(img), sino.data, geo);
    return sino;
}

// Exact adjoint of radon_forward (same stencil, scatter instead of gather).
inline Image backproject(const Sinogram& sino, int image_size) {
    sino.validate();
    sino.geo.validate_covers(image_size);
    Image img(image_size, image_size, 0.0);
    detail::radon_stencil<false>(img, const_cast<Grid&>(sino.data), sino.geo);
    return img;
}

enum class Apodization { None, Hann };

// Ramp-filter each row in the frequency domain, then backproject.
inline Image fbp(const Sinogram& sino, int image_size, Apodization apod = Apodization::Hann) {
    sino.validate();
    const int nb = sino.geo.detector_bins;
    const size_t npad = next_pow2(static_cast<size_t>(2 * nb));
    std::vector<double> ramp(npad, 0.0);
    for (size_t k = 1; k < npad; ++k) {
        const double f = static_cast<double>(std::min(k, npad - k)) / static_cast<double>(npad);
        ramp[k] = 2.0 * f;
        if (apod == Apodization::Hann) ramp[k] *= 0.5 * (1.0 + std::cos(2.0 * kPi * f));
    }
    Sinogram filt = sino;
    std::vector<std::complex<double>> buf(npad);
    for (int a = 0; a < sino.geo.num_angles; ++a) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        const double* src = sino.data.row(a);
        for (int j = 0; j < nb; ++j) buf[j] = src[j];
        fft_radix2(buf, false);
        for (size_t k = 0; k < npad; ++k) buf[k] *= ramp[k];
        fft_radix2(buf, true);
        double* dst = filt.data.row(a);
        for (int j = 0; j < nb; ++j) dst[j] = buf[j].real();
    }
    Image img = backproject(filt, image_size);
    img *= kPi / (2.0 * sino.geo.num_angles * sino.geo.detector_spacing);
    return img;
}

}  // namespace wedgefill
