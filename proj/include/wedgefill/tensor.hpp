#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace wedgefill {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh, double fill = 0.0) : shape(std::move(sh)) {
        data.assign(count(shape), fill);
    }

    static size_t count(const std::vector<int>& sh) {
        size_t n = 1;
        for (int d : sh) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return data.size(); }
};

// Ordered named parameter collection with Adam moment state per entry.
struct ParamEntry {
    std::string name;
    Tensor value;
    Tensor m;  // first moment
    Tensor v;  // second moment
};

struct ModelParams {
    std::vector<ParamEntry> entries;
    int64_t step_count = 0;

    Tensor& add(const std::string& name, std::vector<int> shape) {
        for (const auto& e : entries)
            if (e.name == name) throw std::invalid_argument("ModelParams: duplicate name " + name);
        entries.push_back({name, Tensor(shape), Tensor(shape), Tensor(shape)});
        return entries.back().value;
    }

    Tensor& at(const std::string& name) {
        for (auto& e : entries)
            if (e.name == name) return e.value;
        throw std::out_of_range("ModelParams: no entry " + name);
    }
    const Tensor& at(const std::string& name) const {
        return const_cast<ModelParams*>(this)->at(name);
    }

    size_t total_values() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& e : entries)
            for (double x : e.value.data)
                if (!std::isfinite(x)) return false;
        return true;
    }
};

// Gradients aligned with ModelParams::entries by index.
using Grads = std::vector<Tensor>;

inline Grads zero_grads(const ModelParams& p) {
    Grads g;
    g.reserve(p.entries.size());
    for (const auto& e : p.entries) g.emplace_back(e.value.shape);
    return g;
}

}  // namespace wedgefill
