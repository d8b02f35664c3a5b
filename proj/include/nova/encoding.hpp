#pragma once

#include "nova/common.hpp"

#include <numbers>

namespace nova {

inline std::size_t encoded_size(std::size_t input_dim, int levels) {
    return input_dim * (1 + 2 * static_cast<std::size_t>(levels));
}

// Frequency encoding. For each input component v the output holds
// v, sin(2^0 π v), cos(2^0 π v), ..., sin(2^(L-1) π v), cos(2^(L-1) π v).
inline void positional_encoding(std::span<const double> value, int levels, std::span<double> out) {
    if (levels < 0) {
        throw UsageError("encoding level count must be non-negative");
    }
    if (out.size() != encoded_size(value.size(), levels)) {
        throw std::invalid_argument("positional_encoding: output size mismatch");
    }
    std::size_t o = 0;
    for (const double v : value) {
        out[o++] = v;
        double freq = std::numbers::pi;
        for (int k = 0; k < levels; ++k) {
            out[o++] = std::sin(freq * v);
            out[o++] = std::cos(freq * v);
            freq *= 2.0;
        }
    }
}

inline std::vector<double> positional_encoding(std::span<const double> value, int levels) {
    if (levels < 0) {
        throw UsageError("encoding level count must be non-negative");
    }
    std::vector<double> out(encoded_size(value.size(), levels));
    positional_encoding(value, levels, out);
    return out;
}

}  // namespace nova
