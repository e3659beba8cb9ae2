#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "wedgefill/grid.hpp"
#include "wedgefill/tensor_io.hpp"

namespace wedgefill {

// 16-bit binary PGM (P5, maxval 65535, most significant byte first),
// linear map from [0,1]; values outside are clamped.
inline std::string encode_pgm16(const Grid& img) {
    std::string out = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n65535\n";
    out.reserve(out.size() + img.size() * 2);
    for (double x : img.v) {
        const double c = std::clamp(x, 0.0, 1.0);
        const auto u = static_cast<uint16_t>(std::lround(c * 65535.0));
        out.push_back(static_cast<char>(u >> 8));
        out.push_back(static_cast<char>(u & 0xFF));
    }
    return out;
}

inline void write_pgm16(const std::filesystem::path& path, const Grid& img) {
    write_file_atomic(path, encode_pgm16(img));
}

}  // namespace wedgefill
