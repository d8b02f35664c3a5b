#pragma once

// Volume-rendering reductions over several fields sharing one set of samples.
//
// For ray r, sample k and field n the grid holds opacity α, blending factor β
// and color c. The composed occupancy is a_k = clamp(Σ_n β α, 0, 1) and the
// composed transmittance T_k = Π_{j<k} (1 - a_j). From these:
//
//   composed color      C(r)   = Σ_k T_k Σ_n α β c            (clamped to [0,1] at the end)
//   predicted mask      M^n(r) = Σ_k T_k a_k β^n_k
//   per-field color     C^n(r) = Σ_k T^n_k α^n_k β^n_k c^n_k,  T^n_k = Π_{j<k} (1 - α^n_j β^n_j)
//   expected depth      D(r)   = Σ_k T_k a_k t_k / max(Σ_k T_k a_k, 1e-8)
//
// backward_render() returns the exact partials of any weighted combination of
// these outputs with respect to the grid's α, β and c.

#include "nova/geometry.hpp"

#include <random>

namespace nova {

struct RaySamples {
    std::size_t rays = 0;
    std::size_t samples = 0;
    std::vector<double> depths;  // distance along the ray, [ray][sample]
    std::vector<double> deltas;  // spacing to the next sample (last: far - depth)
    std::vector<Vec3> positions;
};

// K samples per ray in [near, far]: bin midpoints, or one uniform draw per bin
// when stratified. The stream for ray r is seeded from (seed, ray_offset + r) so
// results do not depend on how a batch is split.
inline RaySamples sample_along_rays(std::span<const Ray> rays, int samples, bool stratified, std::uint64_t seed,
                                    std::size_t ray_offset = 0) {
    if (samples < 2) {
        throw UsageError("need at least 2 samples per ray");
    }
    const auto k_count = static_cast<std::size_t>(samples);
    RaySamples out;
    out.rays = rays.size();
    out.samples = k_count;
    out.depths.resize(rays.size() * k_count);
    out.deltas.resize(rays.size() * k_count);
    out.positions.resize(rays.size() * k_count);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const Ray& ray = rays[r];
        if (!(ray.near < ray.far)) {
            throw UsageError("ray " + std::to_string(ray_offset + r) + " has near >= far");
        }
        const double bin = (ray.far - ray.near) / static_cast<double>(k_count);
        std::mt19937_64 rng(mix_seed(seed, ray_offset + r));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        double* depth = out.depths.data() + r * k_count;
        for (std::size_t k = 0; k < k_count; ++k) {
            const double offset = stratified ? uniform(rng) : 0.5;
            depth[k] = ray.near + (static_cast<double>(k) + offset) * bin;
        }
        for (std::size_t k = 0; k < k_count; ++k) {
            const double next = k + 1 < k_count ? depth[k + 1] : ray.far;
            out.deltas[r * k_count + k] = next - depth[k];
            out.positions[r * k_count + k] = ray.at(depth[k]);
        }
    }
    return out;
}

// Per-sample query results for every field, indexed [field][ray][sample].
struct RaySampleGrid {
    std::size_t fields = 0;
    std::size_t rays = 0;
    std::size_t samples = 0;
    std::vector<double> depths;  // [ray][sample]
    std::vector<double> deltas;  // [ray][sample]
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<Vec3> color;

    RaySampleGrid() = default;
    RaySampleGrid(std::size_t n_fields, std::size_t n_rays, std::size_t n_samples)
        : fields(n_fields), rays(n_rays), samples(n_samples), depths(n_rays * n_samples, 0.0),
          deltas(n_rays * n_samples, 0.0), alpha(n_fields * n_rays * n_samples, 0.0),
          beta(n_fields * n_rays * n_samples, 1.0), color(n_fields * n_rays * n_samples, Vec3::Zero()) {}

    std::size_t index(std::size_t n, std::size_t r, std::size_t k) const { return (n * rays + r) * samples + k; }
    double& a(std::size_t n, std::size_t r, std::size_t k) { return alpha[index(n, r, k)]; }
    double a(std::size_t n, std::size_t r, std::size_t k) const { return alpha[index(n, r, k)]; }
    double& b(std::size_t n, std::size_t r, std::size_t k) { return beta[index(n, r, k)]; }
    double b(std::size_t n, std::size_t r, std::size_t k) const { return beta[index(n, r, k)]; }
    Vec3& c(std::size_t n, std::size_t r, std::size_t k) { return color[index(n, r, k)]; }
    const Vec3& c(std::size_t n, std::size_t r, std::size_t k) const { return color[index(n, r, k)]; }
    double depth(std::size_t r, std::size_t k) const { return depths[r * samples + k]; }

    FieldSampleView<const double> alpha_view() const { return {alpha, fields, rays, samples}; }
    FieldSampleView<const double> beta_view() const { return {beta, fields, rays, samples}; }

    // Shape consistency and NaN screening.
    void validate() const {
        const std::size_t cells = fields * rays * samples;
        if (alpha.size() != cells || beta.size() != cells || color.size() != cells ||
            depths.size() != rays * samples || deltas.size() != rays * samples) {
            throw std::invalid_argument("RaySampleGrid: inconsistent storage sizes");
        }
        for (std::size_t n = 0; n < fields; ++n) {
            for (std::size_t r = 0; r < rays; ++r) {
                for (std::size_t k = 0; k < samples; ++k) {
                    const std::size_t i = index(n, r, k);
                    if (std::isnan(alpha[i]) || std::isnan(beta[i]) || color[i].hasNaN()) {
                        throw NumericalError("NaN in render grid at field " + std::to_string(n) + ", ray " +
                                             std::to_string(r) + ", sample " + std::to_string(k));
                    }
                }
            }
        }
    }
};

struct CompositeResult {
    std::vector<Vec3> color;             // [ray], clamped to [0, 1]
    std::vector<Vec3> color_unclamped;   // [ray]
    std::vector<double> transmittance;   // [ray][sample], T_full
    std::vector<double> alpha_full;      // [ray][sample], clamped occupancy
    std::vector<double> occupancy;       // [ray][sample], Σ_n β α before clamping
};

inline CompositeResult composite_full(const RaySampleGrid& grid) {
    grid.validate();
    const std::size_t R = grid.rays;
    const std::size_t K = grid.samples;
    CompositeResult out;
    out.color.assign(R, Vec3::Zero());
    out.color_unclamped.assign(R, Vec3::Zero());
    out.transmittance.assign(R * K, 0.0);
    out.alpha_full.assign(R * K, 0.0);
    out.occupancy.assign(R * K, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        double trans = 1.0;
        Vec3 acc = Vec3::Zero();
        for (std::size_t k = 0; k < K; ++k) {
            double u = 0.0;
            for (std::size_t n = 0; n < grid.fields; ++n) {
                const double w = grid.b(n, r, k) * grid.a(n, r, k);
                u += w;
                acc += (trans * w) * grid.c(n, r, k);
            }
            const double a = std::clamp(u, 0.0, 1.0);
            out.transmittance[r * K + k] = trans;
            out.alpha_full[r * K + k] = a;
            out.occupancy[r * K + k] = u;
            trans *= 1.0 - a;
        }
        out.color_unclamped[r] = acc;
        out.color[r] = acc.cwiseMax(0.0).cwiseMin(1.0);
    }
    return out;
}

inline std::vector<double> render_mask(const RaySampleGrid& grid, const CompositeResult& composite,
                                       std::size_t field) {
    if (field >= grid.fields) {
        throw UsageError("field index " + std::to_string(field) + " out of range (" + std::to_string(grid.fields) +
                         " fields)");
    }
    const std::size_t K = grid.samples;
    std::vector<double> mask(grid.rays, 0.0);
    for (std::size_t r = 0; r < grid.rays; ++r) {
        double m = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            m += composite.transmittance[r * K + k] * composite.alpha_full[r * K + k] * grid.b(field, r, k);
        }
        mask[r] = m;
    }
    return mask;
}

inline std::vector<Vec3> render_rgb_per_field(const RaySampleGrid& grid, std::size_t field) {
    if (field >= grid.fields) {
        throw UsageError("field index " + std::to_string(field) + " out of range (" + std::to_string(grid.fields) +
                         " fields)");
    }
    std::vector<Vec3> out(grid.rays, Vec3::Zero());
    for (std::size_t r = 0; r < grid.rays; ++r) {
        double trans = 1.0;
        Vec3 acc = Vec3::Zero();
        for (std::size_t k = 0; k < grid.samples; ++k) {
            const double w = grid.a(field, r, k) * grid.b(field, r, k);
            acc += trans * w * grid.c(field, r, k);
            trans *= 1.0 - w;
        }
        out[r] = acc;
    }
    return out;
}

inline constexpr double kDepthEpsilon = 1e-8;

inline std::vector<double> render_depth(const RaySampleGrid& grid, const CompositeResult& composite) {
    const std::size_t K = grid.samples;
    std::vector<double> out(grid.rays, 0.0);
    for (std::size_t r = 0; r < grid.rays; ++r) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = composite.transmittance[r * K + k] * composite.alpha_full[r * K + k];
            num += w * grid.depth(r, k);
            den += w;
        }
        out[r] = num / std::max(den, kDepthEpsilon);
    }
    return out;
}

struct RenderOutput {
    CompositeResult composite;
    std::vector<double> mask;        // [field][ray]
    std::vector<Vec3> color_field;   // [field][ray]
    std::vector<double> depth;       // [ray]
    std::size_t fields = 0;
    std::size_t rays = 0;

    const std::vector<Vec3>& color() const { return composite.color; }
    FieldRayView<const double> mask_view() const { return {mask, fields, rays}; }
    FieldRayView<const Vec3> color_field_view() const { return {color_field, fields, rays}; }
};

inline RenderOutput render_all(const RaySampleGrid& grid) {
    RenderOutput out;
    out.composite = composite_full(grid);
    out.fields = grid.fields;
    out.rays = grid.rays;
    out.mask.reserve(grid.fields * grid.rays);
    out.color_field.reserve(grid.fields * grid.rays);
    for (std::size_t n = 0; n < grid.fields; ++n) {
        const auto m = render_mask(grid, out.composite, n);
        out.mask.insert(out.mask.end(), m.begin(), m.end());
        const auto c = render_rgb_per_field(grid, n);
        out.color_field.insert(out.color_field.end(), c.begin(), c.end());
    }
    out.depth = render_depth(grid, out.composite);
    return out;
}

// Partials of a scalar objective with respect to render outputs and, directly,
// to grid values. Empty members contribute nothing.
struct RenderUpstream {
    std::span<const Vec3> color;               // d/dC_full (with respect to the clamped output)
    FieldRayView<const double> mask;           // d/dM^n
    FieldRayView<const Vec3> color_field;      // d/dC^n
    std::span<const double> depth;             // d/dD
    FieldSampleView<const double> alpha;       // direct d/dα
    FieldSampleView<const double> beta;        // direct d/dβ
};

struct GridGradient {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<Vec3> color;
};

inline GridGradient backward_render(const RaySampleGrid& grid, const RenderOutput& fwd, const RenderUpstream& up) {
    const std::size_t N = grid.fields;
    const std::size_t R = grid.rays;
    const std::size_t K = grid.samples;
    GridGradient g;
    g.alpha.assign(N * R * K, 0.0);
    g.beta.assign(N * R * K, 0.0);
    g.color.assign(N * R * K, Vec3::Zero());

    const auto& comp = fwd.composite;
    std::vector<double> emission(K);
    std::vector<double> mask_weight(K);
    for (std::size_t r = 0; r < R; ++r) {
        // Composed outputs: C_full, M^n, depth.
        Vec3 gc = Vec3::Zero();
        if (!up.color.empty()) {
            for (int ch = 0; ch < 3; ++ch) {
                const double raw = comp.color_unclamped[r][ch];
                gc[ch] = (raw >= 0.0 && raw <= 1.0) ? up.color[r][ch] : 0.0;
            }
        }
        double g_num = 0.0;
        double g_den = 0.0;
        if (!up.depth.empty() && up.depth[r] != 0.0) {
            double num = 0.0;
            double den = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double w = comp.transmittance[r * K + k] * comp.alpha_full[r * K + k];
                num += w * grid.depth(r, k);
                den += w;
            }
            if (den > kDepthEpsilon) {
                g_num = up.depth[r] / den;
                g_den = -up.depth[r] * num / (den * den);
            } else {
                g_num = up.depth[r] / kDepthEpsilon;
            }
        }
        const bool has_mask = !up.mask.empty();
        for (std::size_t k = 0; k < K; ++k) {
            double mw = g_num * grid.depth(r, k) + g_den;
            if (has_mask) {
                for (std::size_t n = 0; n < N; ++n) mw += up.mask(n, r) * grid.b(n, r, k);
            }
            mask_weight[k] = mw;
            double ce = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                ce += grid.a(n, r, k) * grid.b(n, r, k) * gc.dot(grid.c(n, r, k));
            }
            emission[k] = ce + comp.alpha_full[r * K + k] * mw;
        }
        // tail = Σ_{m>k} E_m Π_{k<i<m} (1 - a_i), accumulated back to front.
        double tail = 0.0;
        for (std::size_t k = K; k-- > 0;) {
            const double T = comp.transmittance[r * K + k];
            const double a = comp.alpha_full[r * K + k];
            const double u = comp.occupancy[r * K + k];
            const double d_a = T * mask_weight[k] - T * tail;
            const double d_u = (u >= 0.0 && u <= 1.0) ? d_a : 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const std::size_t i = grid.index(n, r, k);
                const double al = grid.alpha[i];
                const double be = grid.beta[i];
                const double cdot = gc.dot(grid.color[i]);
                g.alpha[i] += d_u * be + T * be * cdot;
                g.beta[i] += d_u * al + T * al * cdot;
                if (has_mask) g.beta[i] += T * a * up.mask(n, r);
                g.color[i] += (T * al * be) * gc;
            }
            tail = emission[k] + (1.0 - a) * tail;
        }

        // Per-field colors with their own transmittance.
        if (!up.color_field.empty()) {
            for (std::size_t n = 0; n < N; ++n) {
                const Vec3& gcn = up.color_field(n, r);
                if (gcn.isZero(0.0)) continue;
                double trans = 1.0;
                std::vector<double>& field_trans = emission;  // reuse scratch: T^n_k
                for (std::size_t k = 0; k < K; ++k) {
                    field_trans[k] = trans;
                    trans *= 1.0 - grid.a(n, r, k) * grid.b(n, r, k);
                }
                double field_tail = 0.0;
                for (std::size_t k = K; k-- > 0;) {
                    const std::size_t i = grid.index(n, r, k);
                    const double w = grid.alpha[i] * grid.beta[i];
                    const double cdot = gcn.dot(grid.color[i]);
                    const double d_w = field_trans[k] * cdot - field_trans[k] * field_tail;
                    g.alpha[i] += d_w * grid.beta[i];
                    g.beta[i] += d_w * grid.alpha[i];
                    g.color[i] += (field_trans[k] * w) * gcn;
                    field_tail = w * cdot + (1.0 - w) * field_tail;
                }
            }
        }
    }

    if (!up.alpha.empty()) {
        for (std::size_t i = 0; i < g.alpha.size(); ++i) g.alpha[i] += up.alpha.data()[i];
    }
    if (!up.beta.empty()) {
        for (std::size_t i = 0; i < g.beta.size(); ++i) g.beta[i] += up.beta.data()[i];
    }
    return g;
}

}  // namespace nova
