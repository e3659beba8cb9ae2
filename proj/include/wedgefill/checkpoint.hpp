#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wedgefill/net.hpp"
#include "wedgefill/tensor.hpp"
#include "wedgefill/tensor_io.hpp"

namespace wedgefill {

namespace detail {

// Doubles are stored exactly as two float32 bit patterns (high word, low
// word); the container only moves raw bits, so resume is bit-exact.
inline void put_f64_vec(TensorContainer& tc, const std::string& name, const std::vector<double>& v) {
    NamedTensor& e = tc.add(name, {2, static_cast<uint32_t>(v.size())});
    for (size_t i = 0; i < v.size(); ++i) {
        uint64_t b;
        std::memcpy(&b, &v[i], 8);
        e.data[i] = bits_f32(static_cast<uint32_t>(b >> 32));
        e.data[v.size() + i] = bits_f32(static_cast<uint32_t>(b & 0xFFFFFFFFULL));
    }
}

inline std::vector<double> get_f64_vec(const TensorContainer& tc, const std::string& name) {
    const NamedTensor& e = tc.at(name);
    if (e.dims.size() != 2 || e.dims[0] != 2) throw std::runtime_error("bad f64 entry: " + name);
    const size_t n = e.dims[1];
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
        const uint64_t b = (static_cast<uint64_t>(f32_bits(e.data[i])) << 32) |
                           f32_bits(e.data[n + i]);
        std::memcpy(&v[i], &b, 8);
    }
    return v;
}

}  // namespace detail

struct Checkpoint {
    NetSpec spec;
    ModelParams params;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
};

inline TensorContainer checkpoint_to_container(const Checkpoint& ck) {
    TensorContainer tc;
    NamedTensor& meta = tc.add("meta", {6});
    meta.data = {static_cast<float>(ck.spec.in_channels),  static_cast<float>(ck.spec.out_channels),
                 static_cast<float>(ck.spec.hidden_channels), static_cast<float>(ck.spec.stacking_depth),
                 static_cast<float>(ck.params.step_count),    static_cast<float>(ck.params.entries.size())};
    NamedTensor& ids = tc.add("ids", {4});
    ids.data = {detail::bits_f32(static_cast<uint32_t>(ck.config_hash >> 32)),
                detail::bits_f32(static_cast<uint32_t>(ck.config_hash & 0xFFFFFFFFULL)),
                detail::bits_f32(static_cast<uint32_t>(ck.seed >> 32)),
                detail::bits_f32(static_cast<uint32_t>(ck.seed & 0xFFFFFFFFULL))};
    for (const ParamEntry& e : ck.params.entries) {
        detail::put_f64_vec(tc, "w/" + e.name, e.value.data);
        detail::put_f64_vec(tc, "m/" + e.name, e.m.data);
        detail::put_f64_vec(tc, "v/" + e.name, e.v.data);
    }
    return tc;
}

// Shapes are rebuilt from the spec, so the checkpoint must describe the
// same architecture that init_params would produce.
inline Checkpoint checkpoint_from_container(const TensorContainer& tc) {
    const NamedTensor& meta = tc.at("meta");
    Checkpoint ck;
    ck.spec.in_channels = static_cast<int>(meta.data[0]);
    ck.spec.out_channels = static_cast<int>(meta.data[1]);
    ck.spec.hidden_channels = static_cast<int>(meta.data[2]);
    ck.spec.stacking_depth = static_cast<int>(meta.data[3]);
    ck.spec.validate();
    const NamedTensor& ids = tc.at("ids");
    ck.config_hash = (static_cast<uint64_t>(detail::f32_bits(ids.data[0])) << 32) |
                     detail::f32_bits(ids.data[1]);
    ck.seed = (static_cast<uint64_t>(detail::f32_bits(ids.data[2])) << 32) |
              detail::f32_bits(ids.data[3]);
    ck.params = init_params(ck.spec, Rng(0));
    ck.params.step_count = static_cast<int64_t>(meta.data[4]);
    if (static_cast<size_t>(meta.data[5]) != ck.params.entries.size())
        throw std::runtime_error("checkpoint: entry count mismatch");
    for (ParamEntry& e : ck.params.entries) {
        e.value.data = detail::get_f64_vec(tc, "w/" + e.name);
        e.m.data = detail::get_f64_vec(tc, "m/" + e.name);
        e.v.data = detail::get_f64_vec(tc, "v/" + e.name);
        if (e.value.data.size() != Tensor::count(e.value.shape) ||
            e.m.data.size() != e.value.data.size() || e.v.data.size() != e.value.data.size())
            throw std::runtime_error("checkpoint: size mismatch for " + e.name);
    }
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    save_container(path, checkpoint_to_container(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_container(load_container(path));
}

}  // namespace wedgefill
