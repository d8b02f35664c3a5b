#pragma once

// Joint training of the static and dynamic fields.
//
// Each step draws a reference frame and
//   1. renders `rays` random reference pixels: recon, plus the mask term on
//      dynamic fields when train.ref_mask_loss is set;
//   2. perturbs the reference camera, forward-warps the frame into it and
//      renders `novel_rays` random pixels that received a splat: nvm, nvcn,
//      nvcf, nvb and nva against the warped supervision.
// The novel pass is skipped when every novel-view weight is zero. Loss terms
// are normalized by counts over the whole batch, taken before chunking, so
// gradients do not depend on chunk boundaries or worker count.

#include "nova/config.hpp"
#include "nova/pipeline.hpp"
#include "nova/warp.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

namespace nova {

// Rays with their supervision. Masks are [object][ray].
struct RayBatch {
    std::vector<Ray> rays;
    std::vector<Vec3> rgb;
    std::vector<double> masks;
    std::vector<std::uint8_t> validity;
    double time = 0.0;

    std::size_t size() const { return rays.size(); }
};

struct StepSampling {
    SamplingSpec reference;
    SamplingSpec novel;
};

namespace detail {

// Mask weights used by the per-field color term: the static field owns the
// complement of the dynamic masks.
inline std::vector<double> responsibility(const RayBatch& b, std::size_t fields) {
    const std::size_t R = b.size();
    std::vector<double> w(fields * R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        double covered = 0.0;
        for (std::size_t n = 1; n < fields; ++n) {
            w[n * R + r] = b.masks[(n - 1) * R + r];
            covered += w[n * R + r];
        }
        w[r] = std::max(0.0, 1.0 - covered);
    }
    return w;
}

}  // namespace detail

// Evaluates the weighted objective on a reference batch and an optional novel
// batch. When `grad` is non-empty it receives d(total)/d(params) (overwritten).
inline LossReport evaluate_objective(const SceneModel& model, const RayBatch& reference, const RayBatch* novel,
                                     const LossWeights& weights, bool ref_mask_loss, const StepSampling& sampling,
                                     unsigned workers, std::span<double> grad) {
    const auto slots = default_slots(model);
    const std::size_t N = model.field_count();
    const std::size_t objects = model.object_count();
    const bool want_grad = !grad.empty();
    const std::size_t P = model.parameters().size();
    if (want_grad && grad.size() != P) throw std::invalid_argument("evaluate_objective: gradient size mismatch");
    if (reference.size() == 0) throw UsageError("reference batch is empty");

    std::vector<double> total_grad(want_grad ? P : 0, 0.0);
    LossReport ref_report;
    LossReport novel_report;

    // Reference pass.
    {
        const std::size_t R = reference.size();
        const double recon_count = 3.0 * static_cast<double>(R);
        const bool mask_term = ref_mask_loss && objects > 0;
        const double mask_count = static_cast<double>(objects * R);
        const double s_recon = weights.recon / recon_count;
        const double s_mask = mask_term ? weights.nvm / mask_count : 0.0;
        const std::size_t chunks = chunk_count(R);
        std::vector<std::array<double, 2>> sums(chunks, {0.0, 0.0});
        std::vector<std::vector<double>> slots_grad(want_grad ? chunks : 0);
        parallel_chunks(chunks, workers, [&](std::size_t c) {
            const std::size_t off = c * kChunkRays;
            const auto rays = chunk_rays(reference.rays, c);
            const std::size_t Rc = rays.size();
            ChunkState st = forward_chunk(model, slots, rays, reference.time, sampling.reference, off, want_grad);
            st.grid.validate();
            const std::span<const Vec3> gt(reference.rgb.data() + off, Rc);
            std::vector<Vec3> d_color(want_grad ? Rc : 0, Vec3::Zero());
            sums[c][0] = terms::recon_sum(st.render.composite.color, gt, d_color, s_recon);
            std::vector<double> d_mask(want_grad ? N * Rc : 0, 0.0);
            if (mask_term) {
                std::vector<double> gt_mask(objects * Rc);
                for (std::size_t o = 0; o < objects; ++o) {
                    for (std::size_t r = 0; r < Rc; ++r) gt_mask[o * Rc + r] = reference.masks[o * R + off + r];
                }
                const std::vector<std::uint8_t> valid(Rc, 1);
                const FieldRayView<const double> pred(std::span<const double>(st.render.mask).subspan(Rc), objects, Rc);
                FieldRayView<double> g;
                if (want_grad && s_mask != 0.0) g = {std::span<double>(d_mask).subspan(Rc), objects, Rc};
                sums[c][1] = terms::nvm_sum(pred, {gt_mask, objects, Rc}, valid, g, s_mask);
            }
            if (want_grad) {
                slots_grad[c].assign(P, 0.0);
                RenderUpstream up;
                up.color = d_color;
                if (mask_term) up.mask = {d_mask, N, Rc};
                backward_chunk(model, slots, st, up, slots_grad[c]);
            }
        });
        double recon = 0.0;
        double mask = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            recon += sums[c][0];
            mask += sums[c][1];
            if (want_grad) {
                for (std::size_t i = 0; i < P; ++i) total_grad[i] += slots_grad[c][i];
            }
        }
        ref_report.add("recon", {recon / recon_count, recon_count});
        if (mask_term) ref_report.add("ref_mask", {mask / mask_count, mask_count});
    }

    // Novel-view pass.
    if (novel != nullptr && novel->size() > 0) {
        const RayBatch& b = *novel;
        const std::size_t R = b.size();
        const std::size_t K = static_cast<std::size_t>(sampling.novel.samples);
        const auto resp = detail::responsibility(b, N);
        const double valid = terms::valid_count(b.validity);
        if (valid == 0.0) throw DataError("novel-view batch has no valid rays");
        const FieldRayView<const double> gt_masks(b.masks, objects, R);
        const FieldRayView<const double> resp_view(resp, N, R);
        const double c_nvm = terms::nvm_count(objects, b.validity);
        const double c_nvcn = terms::nvcn_count(resp_view, b.validity);
        const double c_nvcf = 3.0 * valid;
        const double c_nvb = static_cast<double>(R * K);
        const double c_nva = terms::nva_count(gt_masks, b.validity);
        auto scale = [](double w, double count) { return count > 0.0 ? w / count : 0.0; };
        const double s_nvm = scale(weights.nvm, c_nvm);
        const double s_nvcn = scale(weights.nvcn, c_nvcn);
        const double s_nvcf = scale(weights.nvcf, c_nvcf);
        const double s_nvb = scale(weights.nvb, c_nvb);
        const double s_nva = scale(weights.nva, c_nva);

        const std::size_t chunks = chunk_count(R);
        std::vector<std::array<double, 5>> sums(chunks, {0.0, 0.0, 0.0, 0.0, 0.0});
        std::vector<std::vector<double>> slots_grad(want_grad ? chunks : 0);
        parallel_chunks(chunks, workers, [&](std::size_t c) {
            const std::size_t off = c * kChunkRays;
            const auto rays = chunk_rays(b.rays, c);
            const std::size_t Rc = rays.size();
            ChunkState st = forward_chunk(model, slots, rays, b.time, sampling.novel, off, want_grad);
            st.grid.validate();
            const std::span<const std::uint8_t> vc(b.validity.data() + off, Rc);
            const std::span<const Vec3> gt(b.rgb.data() + off, Rc);
            std::vector<double> gm(objects * Rc);
            for (std::size_t o = 0; o < objects; ++o) {
                for (std::size_t r = 0; r < Rc; ++r) gm[o * Rc + r] = b.masks[o * R + off + r];
            }
            std::vector<double> rc(N * Rc);
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t r = 0; r < Rc; ++r) rc[n * Rc + r] = resp[n * R + off + r];
            }
            const auto& out = st.render;

            std::vector<double> d_mask(want_grad ? N * Rc : 0, 0.0);
            std::vector<Vec3> d_field(want_grad ? N * Rc : 0, Vec3::Zero());
            std::vector<Vec3> d_color(want_grad ? Rc : 0, Vec3::Zero());
            std::vector<double> d_beta(want_grad ? N * Rc * K : 0, 0.0);
            std::vector<double> d_alpha(want_grad ? N * Rc * K : 0, 0.0);
            auto on = [&](double s) { return want_grad && s != 0.0; };

            auto& sc = sums[c];
            if (objects > 0) {
                const FieldRayView<const double> pred(std::span<const double>(out.mask).subspan(Rc), objects, Rc);
                FieldRayView<double> g;
                if (on(s_nvm)) g = {std::span<double>(d_mask).subspan(Rc), objects, Rc};
                sc[0] = terms::nvm_sum(pred, {gm, objects, Rc}, vc, g, s_nvm);
            }
            {
                FieldRayView<Vec3> g;
                if (on(s_nvcn)) g = {d_field, N, Rc};
                sc[1] = terms::nvcn_sum(out.color_field_view(), gt, {rc, N, Rc}, vc, g, s_nvcn);
            }
            sc[2] = terms::nvcf_sum(out.composite.color, gt, vc, on(s_nvcf) ? std::span<Vec3>(d_color) : std::span<Vec3>(),
                                    s_nvcf);
            {
                FieldSampleView<double> g;
                if (on(s_nvb)) g = {d_beta, N, Rc, K};
                sc[3] = terms::nvb_sum(st.grid.beta_view(), g, s_nvb);
            }
            if (objects > 0) {
                const FieldSampleView<const double> alpha_dyn(std::span<const double>(st.grid.alpha).subspan(Rc * K),
                                                              objects, Rc, K);
                FieldSampleView<double> g;
                if (on(s_nva)) g = {std::span<double>(d_alpha).subspan(Rc * K), objects, Rc, K};
                sc[4] = terms::nva_sum(alpha_dyn, {gm, objects, Rc}, vc, g, s_nva);
            }
            if (want_grad) {
                slots_grad[c].assign(P, 0.0);
                RenderUpstream up;
                up.color = d_color;
                up.mask = {d_mask, N, Rc};
                up.color_field = {d_field, N, Rc};
                up.beta = {d_beta, N, Rc, K};
                up.alpha = {d_alpha, N, Rc, K};
                backward_chunk(model, slots, st, up, slots_grad[c]);
            }
        });
        std::array<double, 5> total{0.0, 0.0, 0.0, 0.0, 0.0};
        for (std::size_t c = 0; c < chunks; ++c) {
            for (std::size_t t = 0; t < 5; ++t) total[t] += sums[c][t];
            if (want_grad) {
                for (std::size_t i = 0; i < P; ++i) total_grad[i] += slots_grad[c][i];
            }
        }
        auto value = [](double sum, double count) { return LossValue{count > 0.0 ? sum / count : 0.0, count}; };
        if (objects > 0) novel_report.add("nvm", value(total[0], c_nvm));
        novel_report.add("nvcn", value(total[1], c_nvcn));
        novel_report.add("nvcf", value(total[2], c_nvcf));
        novel_report.add("nvb", value(total[3], c_nvb));
        if (objects > 0) novel_report.add("nva", value(total[4], c_nva));
    }

    LossReport report = total_loss(ref_report, novel_report, weights);
    if (want_grad) std::copy(total_grad.begin(), total_grad.end(), grad.begin());
    return report;
}

// ---------------------------------------------------------------------------

inline std::vector<const Frame*> frames_with_split(const std::vector<Frame>& frames, Split split) {
    std::vector<const Frame*> out;
    for (const auto& f : frames) {
        if (f.split == split) out.push_back(&f);
    }
    return out;
}

// Uniformly sampled pixels (with replacement) of a frame.
inline RayBatch reference_batch(const Frame& frame, std::size_t count, const RayBounds& bounds, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> px(0, frame.width() - 1);
    std::uniform_int_distribution<int> py(0, frame.height() - 1);
    std::vector<Pixel> pixels(count);
    for (auto& p : pixels) {
        p.x = px(rng);
        p.y = py(rng);
    }
    RayBatch b;
    b.time = frame.time;
    b.rays = generate_rays(frame.camera, bounds, pixels);
    b.rgb.resize(count);
    b.masks.assign(frame.masks.size() * count, 0.0);
    b.validity.assign(count, 1);
    for (std::size_t r = 0; r < count; ++r) {
        b.rgb[r] = rgb_at(frame.rgb, pixels[r].x, pixels[r].y);
        for (std::size_t o = 0; o < frame.masks.size(); ++o) {
            b.masks[o * count + r] = frame.masks[o](pixels[r].x, pixels[r].y) != 0 ? 1.0 : 0.0;
        }
    }
    return b;
}

// Random pixels among those that received warped supervision at `novel`.
// Empty when the warp left no valid pixel.
inline RayBatch novel_batch(const Frame& source, const Camera& novel, std::size_t count, const RayBounds& bounds,
                            std::mt19937_64& rng) {
    const FrameWarp warp = warp_frame_to_novel_view(source, novel);
    std::vector<Pixel> valid;
    for (int y = 0; y < novel.height; ++y) {
        for (int x = 0; x < novel.width; ++x) {
            if (warp.validity(x, y) != 0) valid.push_back({x, y});
        }
    }
    RayBatch b;
    b.time = source.time;
    if (valid.empty() || count == 0) return b;
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    std::vector<Pixel> pixels(count);
    for (auto& p : pixels) p = valid[pick(rng)];
    b.rays = generate_rays(novel, bounds, pixels);
    b.rgb.resize(count);
    b.masks.assign(source.masks.size() * count, 0.0);
    b.validity.assign(count, 1);
    for (std::size_t r = 0; r < count; ++r) {
        b.rgb[r] = rgb_at(warp.rgb, pixels[r].x, pixels[r].y);
        for (std::size_t o = 0; o < source.masks.size(); ++o) {
            b.masks[o * count + r] = warp.masks[o](pixels[r].x, pixels[r].y) != 0 ? 1.0 : 0.0;
        }
    }
    return b;
}

struct TrainOptions {
    unsigned workers = 1;
    std::optional<std::filesystem::path> out_dir;  // checkpoints and log are written here when set
    std::function<void(const std::string&)> on_log;  // receives each log line
};

struct TrainResult {
    SceneModel model;
    std::int64_t steps = 0;
    std::vector<LossReport> logged;  // reports at logged steps
    std::vector<std::string> log_lines;
    std::vector<std::filesystem::path> checkpoints;
    std::optional<std::filesystem::path> log_path;
    LossReport last;
};

inline SceneModel initial_model(const RunConfig& config, std::size_t objects) {
    return SceneModel::create(config.model, objects, mix_seed(config.seed, 0x6d6f64656cULL));
}

inline TrainResult train(const RunConfig& config, const std::vector<Frame>& frames, const TrainOptions& options = {}) {
    validate(config);
    const auto train_frames = frames_with_split(frames, Split::Train);
    if (train_frames.empty()) throw DataError("dataset has no training frames");
    const std::size_t objects = train_frames.front()->masks.size();
    for (const Frame* f : train_frames) {
        if (f->masks.size() != objects) throw DataError("training frames disagree on the object count");
    }

    TrainResult result;
    result.model = initial_model(config, objects);
    AdamSettings adam{config.train.learning_rate, config.train.beta1, config.train.beta2, config.train.epsilon};
    OptimizerState opt = OptimizerState::for_size(result.model.parameters().size(), adam);
    const RayBounds bounds = config.render.bounds();
    const bool novel_enabled = config.loss.novel_view_enabled() && config.train.novel_rays > 0;

    std::ofstream log_file;
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        result.log_path = *options.out_dir / "train_log.jsonl";
        log_file.open(*result.log_path, std::ios::binary | std::ios::trunc);
        if (!log_file) throw DataError("cannot write " + result.log_path->string());
    }
    auto save = [&](const std::string& name, std::int64_t step) {
        if (!options.out_dir) return;
        const auto path = *options.out_dir / name;
        save_checkpoint(result.model, path, step);
        if (std::find(result.checkpoints.begin(), result.checkpoints.end(), path) == result.checkpoints.end()) {
            result.checkpoints.push_back(path);
        }
    };

    std::vector<double> grad(result.model.parameters().size());
    const std::int64_t steps = config.train.steps;
    for (std::int64_t step = 0; step < steps; ++step) {
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(step) * 4 + 1));
        std::uniform_int_distribution<std::size_t> pick_frame(0, train_frames.size() - 1);
        const Frame& ref = *train_frames[pick_frame(rng)];
        const RayBatch reference = reference_batch(ref, static_cast<std::size_t>(config.train.rays), bounds, rng);
        RayBatch novel;
        if (novel_enabled) {
            const Camera cam = perturb_camera(ref.camera, config.augment.max_translation,
                                              config.augment.max_rotation_deg, rng());
            novel = novel_batch(ref, cam, static_cast<std::size_t>(config.train.novel_rays), bounds, rng);
        }
        StepSampling sampling;
        sampling.reference = {config.render.samples, true, mix_seed(config.seed, static_cast<std::uint64_t>(step) * 4 + 2)};
        sampling.novel = {config.render.samples, true, mix_seed(config.seed, static_cast<std::uint64_t>(step) * 4 + 3)};

        LossReport report;
        try {
            report = evaluate_objective(result.model, reference, novel.size() > 0 ? &novel : nullptr, config.loss,
                                        config.train.ref_mask_loss, sampling, options.workers, grad);
        } catch (const NumericalError&) {
            save("checkpoint.json", step);
            throw;
        }
        bool finite = std::isfinite(report.total);
        for (double g : grad) finite = finite && std::isfinite(g);
        if (!finite) {
            save("checkpoint.json", step);
            throw NumericalError("non-finite loss or gradient at step " + std::to_string(step) +
                                 "; last good parameters kept in the checkpoint");
        }
        if (config.train.grad_clip > 0.0) clip_global_norm(grad, config.train.grad_clip);
        const double progress = static_cast<double>(step) / static_cast<double>(steps);
        opt.settings.learning_rate = config.train.learning_rate * std::pow(config.train.lr_decay, progress);
        optimizer_step(result.model.parameters().values(), grad, opt);
        result.steps = step + 1;
        result.last = report;

        if (step % config.train.log_every == 0 || step + 1 == steps) {
            const std::string line = report.to_log_line(step);
            result.logged.push_back(report);
            result.log_lines.push_back(line);
            if (log_file) log_file << line << '\n' << std::flush;
            if (options.on_log) options.on_log(line);
        }
        if (config.train.checkpoint_every > 0 && (step + 1) % config.train.checkpoint_every == 0 && step + 1 < steps) {
            save("checkpoint_" + std::to_string(step + 1) + ".json", step + 1);
        }
    }
    save("checkpoint.json", result.steps);
    return result;
}

}  // namespace nova
