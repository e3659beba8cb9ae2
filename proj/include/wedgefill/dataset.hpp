#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wedgefill/grid.hpp"
#include "wedgefill/phantom.hpp"
#include "wedgefill/tensor_io.hpp"
#include "wedgefill/tomo.hpp"

namespace wedgefill {

// Grid <-> container entry helpers (float32 on disk, double in memory).
inline void put_grid(TensorContainer& tc, const std::string& name, const Grid& g) {
    NamedTensor& e = tc.add(name, {static_cast<uint32_t>(g.rows), static_cast<uint32_t>(g.cols)});
    for (size_t i = 0; i < g.v.size(); ++i) e.data[i] = static_cast<float>(g.v[i]);
}

inline Grid get_grid(const TensorContainer& tc, const std::string& name) {
    const NamedTensor& e = tc.at(name);
    if (e.dims.size() != 2) throw std::runtime_error("entry is not 2-D: " + name);
    Grid g(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]));
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = e.data[i];
    return g;
}

// Ground-truth image plus its fully sampled sinogram.
struct DatasetItem {
    Image phantom;
    Sinogram sino;
};

struct Dataset {
    int image_size = 0;
    ScanGeometry geo;
    int num_train = 0;  // items [0, num_train) train, the rest test
    std::vector<DatasetItem> items;

    const DatasetItem& train_item(int i) const { return items[i]; }
    const DatasetItem& test_item(int i) const { return items[num_train + i]; }
    int num_test() const { return static_cast<int>(items.size()) - num_train; }
};

inline Dataset synthesize_dataset(int image_size, const ScanGeometry& geo, int num_train,
                                  int num_test, uint64_t seed) {
    geo.validate_covers(image_size);
    Dataset ds;
    ds.image_size = image_size;
    ds.geo = geo;
    ds.num_train = num_train;
    ds.items.reserve(num_train + num_test);
    Rng rng(seed);
    for (int i = 0; i < num_train + num_test; ++i) {
        DatasetItem it;
        it.phantom = random_ellipse_phantom(image_size, rng.derive(i).next_u64());
        it.sino = radon_forward(it.phantom, geo);
        ds.items.push_back(std::move(it));
    }
    return ds;
}

// Headerless little-endian float32 slice, windowed to [hu_lo, hu_hi] and
// mapped linearly so hu_lo -> 0 and hu_hi -> 1.
inline Image load_raw_slice(const std::filesystem::path& path, int size, double hu_lo, double hu_hi) {
    if (size < 16) throw std::runtime_error("raw slice size must be >= 16");
    if (!(hu_hi > hu_lo)) throw std::runtime_error("HU window must be increasing");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open raw slice: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const size_t want = static_cast<size_t>(size) * size * 4;
    if (bytes.size() != want)
        throw std::runtime_error("raw slice " + path.string() + ": expected " + std::to_string(want) +
                                 " bytes, got " + std::to_string(bytes.size()));
    Image img(size, size);
    for (size_t i = 0; i < img.v.size(); ++i) {
        uint32_t b = static_cast<uint8_t>(bytes[4 * i]) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(bytes[4 * i + 1])) << 8) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(bytes[4 * i + 2])) << 16) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(bytes[4 * i + 3])) << 24);
        const double hu = detail::bits_f32(b);
        if (!std::isfinite(hu)) throw std::runtime_error("raw slice " + path.string() + ": non-finite value");
        img.v[i] = (std::clamp(hu, hu_lo, hu_hi) - hu_lo) / (hu_hi - hu_lo);
    }
    return img;
}

inline Dataset import_raw_dataset(const std::filesystem::path& dir, int size, double hu_lo,
                                  double hu_hi, const ScanGeometry& geo, int num_train) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("raw import: no files in " + dir.string());
    Dataset ds;
    ds.image_size = size;
    ds.geo = geo;
    ds.num_train = std::min<int>(num_train, static_cast<int>(files.size()));
    for (const auto& p : files) {
        DatasetItem it;
        it.phantom = load_raw_slice(p, size, hu_lo, hu_hi);
        it.sino = radon_forward(it.phantom, geo);
        ds.items.push_back(std::move(it));
    }
    return ds;
}

namespace detail {

inline std::string item_key(const char* kind, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s/%04d", kind, i);
    return buf;
}

}  // namespace detail

inline TensorContainer dataset_to_container(const Dataset& ds,
                                            const std::vector<double>& mask_scenarios_deg = {}) {
    TensorContainer tc;
    NamedTensor& meta = tc.add("meta", {6});
    meta.data = {static_cast<float>(ds.image_size),
                 static_cast<float>(ds.num_train),
                 static_cast<float>(ds.num_test()),
                 static_cast<float>(ds.geo.num_angles),
                 static_cast<float>(ds.geo.detector_bins),
                 0.0f};
    NamedTensor& steps = tc.add("geometry", {2});
    steps.data = {static_cast<float>(ds.geo.angle_step_deg), static_cast<float>(ds.geo.detector_spacing)};
    for (size_t i = 0; i < ds.items.size(); ++i) {
        put_grid(tc, detail::item_key("phantom", static_cast<int>(i)), ds.items[i].phantom);
        put_grid(tc, detail::item_key("sino", static_cast<int>(i)), ds.items[i].sino.data);
    }
    for (double deg : mask_scenarios_deg) {
        AngleMask m = make_wedge_mask(ds.geo, deg);
        char name[32];
        std::snprintf(name, sizeof(name), "mask/%g", deg);
        NamedTensor& e = tc.add(name, {static_cast<uint32_t>(m.kept.size())});
        for (size_t i = 0; i < m.kept.size(); ++i) e.data[i] = m.kept[i] ? 1.0f : 0.0f;
    }
    return tc;
}

inline Dataset dataset_from_container(const TensorContainer& tc) {
    const NamedTensor& meta = tc.at("meta");
    const NamedTensor& steps = tc.at("geometry");
    Dataset ds;
    ds.image_size = static_cast<int>(meta.data[0]);
    ds.num_train = static_cast<int>(meta.data[1]);
    const int num_test = static_cast<int>(meta.data[2]);
    ds.geo.num_angles = static_cast<int>(meta.data[3]);
    ds.geo.detector_bins = static_cast<int>(meta.data[4]);
    ds.geo.angle_step_deg = steps.data[0];
    ds.geo.detector_spacing = steps.data[1];
    ds.geo.validate_covers(ds.image_size);
    for (int i = 0; i < ds.num_train + num_test; ++i) {
        DatasetItem it;
        it.phantom = get_grid(tc, detail::item_key("phantom", i));
        it.sino.geo = ds.geo;
        it.sino.data = get_grid(tc, detail::item_key("sino", i));
        it.sino.validate();
        ds.items.push_back(std::move(it));
    }
    return ds;
}

}  // namespace wedgefill
