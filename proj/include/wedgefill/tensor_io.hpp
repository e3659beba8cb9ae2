#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wedgefill {

// Binary container of named float32 tensors.
// Layout (all integers little-endian u32):
//   magic "SINOTN01" | entry count | per entry:
//   name length | name bytes | ndim | dims... | row-major float32 data
struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

struct TensorContainer {
    std::vector<NamedTensor> entries;

    NamedTensor& add(const std::string& name, std::vector<uint32_t> dims) {
        for (const auto& e : entries)
            if (e.name == name) throw std::invalid_argument("TensorContainer: duplicate name " + name);
        entries.push_back({name, std::move(dims), {}});
        entries.back().data.assign(entries.back().count(), 0.0f);
        return entries.back();
    }

    const NamedTensor* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
    const NamedTensor& at(const std::string& name) const {
        const NamedTensor* p = find(name);
        if (!p) throw std::out_of_range("TensorContainer: no entry " + name);
        return *p;
    }
};

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline uint32_t get_u32(const std::string& s, size_t& pos) {
    if (pos + 4 > s.size()) throw std::runtime_error("TensorContainer: truncated");
    uint32_t v = static_cast<uint8_t>(s[pos]) | (static_cast<uint32_t>(static_cast<uint8_t>(s[pos + 1])) << 8) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(s[pos + 2])) << 16) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(s[pos + 3])) << 24);
    pos += 4;
    return v;
}

inline uint32_t f32_bits(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}
inline float bits_f32(uint32_t b) {
    float f;
    std::memcpy(&f, &b, 4);
    return f;
}

}  // namespace detail

inline std::string serialize(const TensorContainer& tc) {
    std::string out = "SINOTN01";
    detail::put_u32(out, static_cast<uint32_t>(tc.entries.size()));
    for (const auto& e : tc.entries) {
        detail::put_u32(out, static_cast<uint32_t>(e.name.size()));
        out += e.name;
        detail::put_u32(out, static_cast<uint32_t>(e.dims.size()));
        for (uint32_t d : e.dims) detail::put_u32(out, d);
        for (float f : e.data) detail::put_u32(out, detail::f32_bits(f));
    }
    return out;
}

inline TensorContainer deserialize_container(const std::string& s) {
    if (s.size() < 12 || s.compare(0, 8, "SINOTN01") != 0)
        throw std::runtime_error("TensorContainer: bad magic");
    size_t pos = 8;
    TensorContainer tc;
    const uint32_t n = detail::get_u32(s, pos);
    for (uint32_t i = 0; i < n; ++i) {
        NamedTensor e;
        const uint32_t nl = detail::get_u32(s, pos);
        if (pos + nl > s.size()) throw std::runtime_error("TensorContainer: truncated name");
        e.name = s.substr(pos, nl);
        pos += nl;
        const uint32_t nd = detail::get_u32(s, pos);
        e.dims.resize(nd);
        for (uint32_t d = 0; d < nd; ++d) e.dims[d] = detail::get_u32(s, pos);
        e.data.resize(e.count());
        for (float& f : e.data) f = detail::bits_f32(detail::get_u32(s, pos));
        for (const auto& prev : tc.entries)
            if (prev.name == e.name) throw std::runtime_error("TensorContainer: duplicate name");
        tc.entries.push_back(std::move(e));
    }
    if (pos != s.size()) throw std::runtime_error("TensorContainer: trailing bytes");
    return tc;
}

// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for write: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void save_container(const std::filesystem::path& path, const TensorContainer& tc) {
    write_file_atomic(path, serialize(tc));
}

inline TensorContainer load_container(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_container(bytes);
}

}  // namespace wedgefill
