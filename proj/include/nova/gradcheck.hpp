#pragma once

#include "nova/common.hpp"

#include <functional>
#include <random>

namespace nova {

// A differentiable computation: returns the objective at `params` and, when
// `grad` is non-empty, overwrites it with the analytic gradient.
using Objective = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradCheckProbe {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double relative_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckProbe> probes;
    double worst_relative_error = 0.0;
    std::size_t worst_index = 0;
    bool passed = true;
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

// Central differences at `probe_count` distinct random parameter indices
// (every index when probe_count >= the parameter count).
inline GradCheckReport grad_check(const Objective& objective, std::span<const double> params,
                                  std::size_t probe_count, double h, double tolerance, std::uint64_t seed = 0) {
    if (!(h > 0.0)) throw UsageError("grad_check: step h must be positive");
    std::vector<double> x(params.begin(), params.end());
    std::vector<double> analytic(x.size(), 0.0);
    objective(x, analytic);

    std::vector<std::size_t> indices(x.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    if (probe_count < indices.size()) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < probe_count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, indices.size() - 1);
            std::swap(indices[i], indices[pick(rng)]);
        }
        indices.resize(probe_count);
    }

    GradCheckReport report;
    for (const std::size_t i : indices) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = objective(x, {});
        x[i] = saved - h;
        const double down = objective(x, {});
        x[i] = saved;
        GradCheckProbe probe{i, analytic[i], (up - down) / (2.0 * h), 0.0};
        probe.relative_error = relative_error(probe.analytic, probe.numeric);
        if (report.probes.empty() || probe.relative_error > report.worst_relative_error) {
            report.worst_relative_error = probe.relative_error;
            report.worst_index = i;
        }
        report.probes.push_back(probe);
    }
    report.passed = report.worst_relative_error < tolerance;
    return report;
}

}  // namespace nova
