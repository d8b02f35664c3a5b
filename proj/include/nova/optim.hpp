#pragma once

#include "nova/common.hpp"

#include <map>
#include <string>

namespace nova {

// All trainable scalars of a run, with named disjoint ranges.
class ParameterVector {
public:
    struct Range {
        std::string name;
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    std::size_t add(const std::string& name, std::size_t size) {
        for (const auto& r : ranges_) {
            if (r.name == name) throw UsageError("duplicate parameter range '" + name + "'");
        }
        const std::size_t offset = values_.size();
        ranges_.push_back({name, offset, size});
        values_.resize(offset + size, 0.0);
        return ranges_.size() - 1;
    }

    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<Range>& ranges() const { return ranges_; }

    const Range& range(const std::string& name) const {
        for (const auto& r : ranges_) {
            if (r.name == name) return r;
        }
        throw UsageError("no parameter range named '" + name + "'");
    }

    std::span<double> slice(std::size_t range_index) {
        const auto& r = ranges_.at(range_index);
        return {values_.data() + r.offset, r.size};
    }
    std::span<const double> slice(std::size_t range_index) const {
        const auto& r = ranges_.at(range_index);
        return {values_.data() + r.offset, r.size};
    }

private:
    std::vector<double> values_;
    std::vector<Range> ranges_;
};

struct AdamSettings {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step = 0;
    AdamSettings settings;

    static OptimizerState for_size(std::size_t n, const AdamSettings& settings) {
        return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, settings};
    }
};

// One bias-corrected adaptive-moment update. Throws on a non-finite gradient
// without touching the parameters.
inline void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state) {
    if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw UsageError("optimizer_step: parameter, gradient and state lengths differ");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericalError("non-finite gradient at parameter " + std::to_string(i));
        }
    }
    const auto& s = state.settings;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = s.beta1 * m + (1.0 - s.beta1) * grads[i];
        v = s.beta2 * v + (1.0 - s.beta2) * grads[i] * grads[i];
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

// Rescales g so its L2 norm is at most max_norm; returns the norm before clipping.
inline double clip_global_norm(std::span<double> grads, double max_norm) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grads) g *= s;
    }
    return norm;
}

}  // namespace nova
