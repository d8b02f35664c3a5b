#pragma once

// Differentiable render of a composed scene: rays -> samples -> field queries
// -> grid -> reductions, with the matching reverse pass into model parameters.
//
// Work is split into fixed chunks of kChunkRays rays. Each chunk writes its own
// outputs and gradient slot; gradients are merged in chunk order, so results
// are bit-identical for any worker count.

#include "nova/image.hpp"
#include "nova/model.hpp"
#include "nova/parallel.hpp"
#include "nova/renderer.hpp"

#include <optional>

namespace nova {

inline constexpr std::size_t kChunkRays = 64;

// One field placed in the composed scene. Several slots may share a field.
struct RenderSlot {
    std::size_t field = 0;
    SE3 transform;  // world placement of the field's frame
    TimeRemap time_remap;
    std::optional<double> beta_override;
};

// Every model field at its trained placement.
inline std::vector<RenderSlot> default_slots(const SceneModel& model) {
    std::vector<RenderSlot> slots(model.field_count());
    for (std::size_t f = 0; f < slots.size(); ++f) slots[f].field = f;
    return slots;
}

struct SamplingSpec {
    int samples = 32;
    bool stratified = false;
    std::uint64_t seed = 0;
};

struct ChunkState {
    RaySampleGrid grid;
    RenderOutput render;
    std::vector<FieldCache> caches;    // per slot, when kept
    std::vector<FieldOutputs> outputs; // per slot, when kept
};

inline ChunkState forward_chunk(const SceneModel& model, std::span<const RenderSlot> slots, std::span<const Ray> rays,
                                double time, const SamplingSpec& sampling, std::size_t ray_offset, bool keep_cache) {
    if (slots.empty()) throw UsageError("render needs at least one field");
    const RaySamples samples = sample_along_rays(rays, sampling.samples, sampling.stratified, sampling.seed, ray_offset);
    const std::size_t R = rays.size();
    const std::size_t K = samples.samples;
    const auto B = static_cast<Eigen::Index>(R * K);

    ChunkState st;
    st.grid = RaySampleGrid(slots.size(), R, K);
    st.grid.depths = samples.depths;
    st.grid.deltas = samples.deltas;
    if (keep_cache) {
        st.caches.resize(slots.size());
        st.outputs.resize(slots.size());
    }

    for (std::size_t n = 0; n < slots.size(); ++n) {
        const RenderSlot& slot = slots[n];
        if (slot.field >= model.field_count()) {
            throw UsageError("render slot refers to field " + std::to_string(slot.field) + " but the model has " +
                             std::to_string(model.field_count()));
        }
        const SE3 to_local = slot.transform.inverse();
        FieldInputs in;
        in.positions.resize(3, B);
        in.directions.resize(3, B);
        in.times.setConstant(1, B, slot.time_remap(time));
        for (std::size_t r = 0; r < R; ++r) {
            const Vec3 dir = to_local.rotate(rays[r].direction);
            for (std::size_t k = 0; k < K; ++k) {
                const auto i = static_cast<Eigen::Index>(r * K + k);
                in.positions.col(i) = to_local.apply(samples.positions[r * K + k]);
                in.directions.col(i) = dir;
            }
        }
        const FieldView view = model.view(slot.field);
        FieldCache cache;
        FieldOutputs out = field_forward(*view.arch, view.params, in, keep_cache ? &cache : nullptr);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto i = static_cast<Eigen::Index>(r * K + k);
                const std::size_t g = st.grid.index(n, r, k);
                st.grid.alpha[g] = -std::expm1(-out.sigma(0, i) * samples.deltas[r * K + k]);
                st.grid.beta[g] = slot.beta_override ? *slot.beta_override : out.beta(0, i);
                st.grid.color[g] = out.rgb.col(i);
            }
        }
        if (keep_cache) {
            st.caches[n] = std::move(cache);
            st.outputs[n] = std::move(out);
        }
    }
    st.render = render_all(st.grid);
    return st;
}

// Accumulates parameter gradients for one chunk into dparams (full model size).
inline void backward_chunk(const SceneModel& model, std::span<const RenderSlot> slots, const ChunkState& st,
                           const RenderUpstream& upstream, std::span<double> dparams) {
    if (st.caches.size() != slots.size()) throw std::logic_error("backward_chunk: forward pass kept no cache");
    const GridGradient g = backward_render(st.grid, st.render, upstream);
    const std::size_t R = st.grid.rays;
    const std::size_t K = st.grid.samples;
    const auto B = static_cast<Eigen::Index>(R * K);
    for (std::size_t n = 0; n < slots.size(); ++n) {
        const FieldOutputs& out = st.outputs[n];
        nn::Matrix d_rgb(3, B);
        nn::Matrix d_sigma(1, B);
        nn::Matrix d_beta = nn::Matrix::Zero(1, B);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto i = static_cast<Eigen::Index>(r * K + k);
                const std::size_t gi = st.grid.index(n, r, k);
                const double delta = st.grid.deltas[r * K + k];
                d_rgb.col(i) = g.color[gi];
                d_sigma(0, i) = g.alpha[gi] * delta * std::exp(-out.sigma(0, i) * delta);
                if (!slots[n].beta_override) d_beta(0, i) = g.beta[gi];
            }
        }
        const auto& range = model.range(slots[n].field);
        const FieldView view = model.view(slots[n].field);
        field_backward(*view.arch, view.params, st.caches[n], out, d_rgb, d_sigma, d_beta,
                       dparams.subspan(range.offset, range.size));
    }
}

inline std::size_t chunk_count(std::size_t rays) { return (rays + kChunkRays - 1) / kChunkRays; }

inline std::span<const Ray> chunk_rays(std::span<const Ray> rays, std::size_t chunk) {
    const std::size_t begin = chunk * kChunkRays;
    return rays.subspan(begin, std::min(kChunkRays, rays.size() - begin));
}

// Forward-only render of arbitrary rays; outputs are in ray order.
inline RenderOutput render_rays(const SceneModel& model, std::span<const RenderSlot> slots, std::span<const Ray> rays,
                                double time, const SamplingSpec& sampling, unsigned workers = 1) {
    const std::size_t R = rays.size();
    const std::size_t N = slots.size();
    const auto K = static_cast<std::size_t>(sampling.samples);
    RenderOutput out;
    out.fields = N;
    out.rays = R;
    out.composite.color.resize(R);
    out.composite.color_unclamped.resize(R);
    out.composite.transmittance.resize(R * K);
    out.composite.alpha_full.resize(R * K);
    out.composite.occupancy.resize(R * K);
    out.mask.resize(N * R);
    out.color_field.resize(N * R);
    out.depth.resize(R);

    parallel_chunks(chunk_count(R), workers, [&](std::size_t c) {
        const auto part = chunk_rays(rays, c);
        const std::size_t off = c * kChunkRays;
        const ChunkState st = forward_chunk(model, slots, part, time, sampling, off, false);
        const auto& rc = st.render;
        for (std::size_t r = 0; r < part.size(); ++r) {
            out.composite.color[off + r] = rc.composite.color[r];
            out.composite.color_unclamped[off + r] = rc.composite.color_unclamped[r];
            out.depth[off + r] = rc.depth[r];
            for (std::size_t k = 0; k < K; ++k) {
                out.composite.transmittance[(off + r) * K + k] = rc.composite.transmittance[r * K + k];
                out.composite.alpha_full[(off + r) * K + k] = rc.composite.alpha_full[r * K + k];
                out.composite.occupancy[(off + r) * K + k] = rc.composite.occupancy[r * K + k];
            }
            for (std::size_t n = 0; n < N; ++n) {
                out.mask[n * R + off + r] = rc.mask[n * part.size() + r];
                out.color_field[n * R + off + r] = rc.color_field[n * part.size() + r];
            }
        }
    });
    return out;
}

// Full-image render, rays in row-major pixel order.
inline RenderOutput render_image(const SceneModel& model, std::span<const RenderSlot> slots, const Camera& camera,
                                 const RayBounds& bounds, double time, const SamplingSpec& sampling,
                                 unsigned workers = 1) {
    const auto rays = generate_rays(camera, bounds);
    return render_rays(model, slots, rays, time, sampling, workers);
}

struct RenderedImages {
    RgbImage color;
    std::vector<GrayImage> masks;
    std::vector<RgbImage> field_colors;
    GrayImage depth;
};

inline RenderedImages to_images(const RenderOutput& out, int width, int height) {
    if (out.rays != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw UsageError("to_images: ray count does not match the image size");
    }
    RenderedImages img;
    img.color = RgbImage(width, height, 3);
    img.depth = GrayImage(width, height);
    img.masks.assign(out.fields, GrayImage(width, height));
    img.field_colors.assign(out.fields, RgbImage(width, height, 3));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t r = static_cast<std::size_t>(y) * width + x;
            set_rgb(img.color, x, y, out.composite.color[r]);
            img.depth(x, y) = out.depth[r];
            for (std::size_t n = 0; n < out.fields; ++n) {
                img.masks[n](x, y) = out.mask[n * out.rays + r];
                set_rgb(img.field_colors[n], x, y, out.color_field[n * out.rays + r]);
            }
        }
    }
    return img;
}

}  // namespace nova
