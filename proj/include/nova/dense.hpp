#pragma once

// Fully-connected layer kernels over a flat parameter vector.
// Activations are stored feature-major: one column per sample.

#include "nova/common.hpp"

#include <random>

namespace nova::nn {

using Matrix = Eigen::MatrixXd;

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;  // out x in, column-major
    std::size_t bias_offset = 0;    // out

    std::size_t parameter_count() const { return static_cast<std::size_t>(in) * out + out; }
};

// Appends a layer to a running parameter layout.
inline DenseLayer make_layer(int in, int out, std::size_t& offset) {
    DenseLayer layer{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset += layer.parameter_count();
    return layer;
}

inline Eigen::Map<const Matrix> weights(const DenseLayer& l, std::span<const double> params) {
    return {params.data() + l.weight_offset, l.out, l.in};
}

inline Eigen::Map<const Eigen::VectorXd> bias(const DenseLayer& l, std::span<const double> params) {
    return {params.data() + l.bias_offset, l.out};
}

// z = W x + b
inline void dense_forward(const DenseLayer& l, std::span<const double> params, const Matrix& x, Matrix& z) {
    z.noalias() = weights(l, params) * x;
    z.colwise() += bias(l, params);
}

// Accumulates dW, db into dparams and optionally writes dx = Wᵀ dz.
inline void dense_backward(const DenseLayer& l, std::span<const double> params, const Matrix& x, const Matrix& dz,
                           std::span<double> dparams, Matrix* dx) {
    Eigen::Map<Matrix> dw(dparams.data() + l.weight_offset, l.out, l.in);
    Eigen::Map<Eigen::VectorXd> db(dparams.data() + l.bias_offset, l.out);
    // Products land in owned buffers, then accumulate elementwise.
    const Matrix gw = dz * x.transpose();
    const Eigen::VectorXd gb = dz.rowwise().sum();
    dw += gw;
    db += gb;
    if (dx != nullptr) {
        const Matrix w = weights(l, params);
        dx->noalias() = w.transpose() * dz;
    }
}

// Uniform init with bound sqrt(gain * 3 / fan_in); gain 2 is He init for ReLU.
inline void init_layer(const DenseLayer& l, std::span<double> params, std::mt19937_64& rng, double gain) {
    const double bound = std::sqrt(gain * 3.0 / static_cast<double>(l.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * l.out; ++i) {
        params[l.weight_offset + i] = dist(rng);
    }
    for (int i = 0; i < l.out; ++i) {
        params[l.bias_offset + static_cast<std::size_t>(i)] = 0.0;
    }
}

}  // namespace nova::nn
