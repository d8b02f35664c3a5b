#pragma once

// Metrics over rendered frames: reference-view PSNR and mask IoU, the
// fixed-viewpoint protocol, and mask leakage at perturbed cameras and in
// composed scenes.

#include "nova/metrics.hpp"
#include "nova/synthetic.hpp"
#include "nova/trainer.hpp"

#include <numeric>

namespace nova {

// Deterministic evaluation render: bin-midpoint samples.
inline SamplingSpec eval_sampling(int samples) { return {samples, false, 0}; }

inline RenderedImages render_view(const SceneModel& model, std::span<const RenderSlot> slots, const Camera& camera,
                                  double time, const RenderSettings& render, unsigned workers = 1) {
    const auto out = render_image(model, slots, camera, render.bounds(), time, eval_sampling(render.samples), workers);
    return to_images(out, camera.width, camera.height);
}

struct FrameMetrics {
    std::size_t index = 0;  // position in the dataset
    Split split = Split::Train;
    double time = 0.0;
    double psnr = 0.0;
    double mask_iou = 1.0;  // mean over objects
};

inline FrameMetrics evaluate_frame(const SceneModel& model, const Frame& frame, std::size_t index,
                                   const RenderSettings& render, unsigned workers = 1) {
    if (frame.masks.size() != model.object_count()) {
        throw DataError("frame " + std::to_string(index) + " has " + std::to_string(frame.masks.size()) +
                        " object masks but the model has " + std::to_string(model.object_count()) + " dynamic fields");
    }
    const auto slots = default_slots(model);
    const RenderedImages img = render_view(model, slots, frame.camera, frame.time, render, workers);
    FrameMetrics m;
    m.index = index;
    m.split = frame.split;
    m.time = frame.time;
    m.psnr = psnr(img.color, frame.rgb);
    if (!frame.masks.empty()) {
        double sum = 0.0;
        for (std::size_t o = 0; o < frame.masks.size(); ++o) sum += mask_iou(img.masks[o + 1], frame.masks[o]);
        m.mask_iou = sum / static_cast<double>(frame.masks.size());
    }
    return m;
}

struct SplitSummary {
    std::vector<FrameMetrics> frames;
    double mean_psnr = 0.0;
    double mean_iou = 0.0;
};

inline SplitSummary evaluate_split(const SceneModel& model, const std::vector<Frame>& frames, Split split,
                                   const RenderSettings& render, unsigned workers = 1) {
    SplitSummary s;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].split == split) s.frames.push_back(evaluate_frame(model, frames[i], i, render, workers));
    }
    if (!s.frames.empty()) {
        for (const auto& f : s.frames) {
            s.mean_psnr += f.psnr;
            s.mean_iou += f.mask_iou;
        }
        s.mean_psnr /= static_cast<double>(s.frames.size());
        s.mean_iou /= static_cast<double>(s.frames.size());
    }
    return s;
}

struct EvalReport {
    SplitSummary holdout;
    SplitSummary fixed_view;
    SplitSummary train;
    bool train_not_below_holdout = true;

    nlohmann::ordered_json to_json() const {
        auto split_json = [](const SplitSummary& s) {
            nlohmann::ordered_json frames = nlohmann::ordered_json::array();
            for (const auto& f : s.frames) {
                frames.push_back({{"frame", f.index}, {"time", f.time}, {"psnr", f.psnr}, {"mask_iou", f.mask_iou}});
            }
            return nlohmann::ordered_json{
                {"count", s.frames.size()}, {"mean_psnr", s.mean_psnr}, {"mean_mask_iou", s.mean_iou}, {"frames", frames}};
        };
        nlohmann::ordered_json j;
        j["holdout"] = split_json(holdout);
        j["fixed_view"] = split_json(fixed_view);
        j["train"] = split_json(train);
        j["train_not_below_holdout"] = train_not_below_holdout;
        return j;
    }
};

inline EvalReport evaluate_dataset(const SceneModel& model, const std::vector<Frame>& frames,
                                   const RenderSettings& render, unsigned workers = 1) {
    EvalReport r;
    r.holdout = evaluate_split(model, frames, Split::Holdout, render, workers);
    r.fixed_view = evaluate_split(model, frames, Split::Eval, render, workers);
    if (r.holdout.frames.empty() && r.fixed_view.frames.empty()) {
        throw DataError("dataset has no held-out frames to evaluate");
    }
    r.train = evaluate_split(model, frames, Split::Train, render, workers);
    const double reference = r.holdout.frames.empty() ? r.fixed_view.mean_psnr : r.holdout.mean_psnr;
    r.train_not_below_holdout = r.train.frames.empty() || r.train.mean_psnr >= reference;
    return r;
}

// ---------------------------------------------------------------------------
// Mask leakage.

// Binary mask grown by `radius` pixels (Chebyshev neighborhood).
inline MaskImage dilate(const MaskImage& mask, int radius) {
    MaskImage out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0) continue;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < mask.width() && ny < mask.height()) out(nx, ny) = 1;
                }
            }
        }
    }
    return out;
}

// Mean predicted mask value over pixels outside `support`; 0 if support covers the image.
inline double out_of_support_response(const GrayImage& predicted, const MaskImage& support) {
    require_same_size(predicted, support, "out_of_support_response");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < support.data().size(); ++i) {
        if (support.data()[i] != 0) continue;
        sum += predicted.data()[i];
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

struct NovelViewMetrics {
    std::size_t source_frame = 0;
    double psnr = 0.0;
    double mask_iou = 1.0;
    double out_of_support = 0.0;  // mean over objects
};

struct NovelViewSummary {
    std::vector<NovelViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_iou = 0.0;
    double mean_out_of_support = 0.0;
};

inline constexpr int kSupportDilation = 1;

// Perturbed cameras around held-out frames (cycled), rendered at the frame's
// time and compared against the analytic scene at that camera.
inline NovelViewSummary evaluate_novel_views(const SceneModel& model, const SyntheticScene& scene,
                                             const std::vector<Frame>& frames, const RunConfig& config,
                                             std::size_t views, std::uint64_t seed, unsigned workers = 1) {
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].split == Split::Holdout) sources.push_back(i);
    }
    if (sources.empty()) throw DataError("novel-view evaluation needs held-out frames");
    const auto slots = default_slots(model);
    NovelViewSummary s;
    for (std::size_t v = 0; v < views; ++v) {
        const std::size_t src = sources[v % sources.size()];
        const Frame& frame = frames[src];
        const Camera cam = perturb_camera(frame.camera, config.augment.max_translation,
                                          config.augment.max_rotation_deg, mix_seed(seed, v));
        const Frame gt = scene.render(cam, frame.time);
        const RenderedImages img = render_view(model, slots, cam, frame.time, config.render, workers);
        NovelViewMetrics m;
        m.source_frame = src;
        m.psnr = psnr(img.color, gt.rgb);
        if (!gt.masks.empty()) {
            double iou = 0.0;
            double leak = 0.0;
            for (std::size_t o = 0; o < gt.masks.size(); ++o) {
                iou += mask_iou(img.masks[o + 1], gt.masks[o]);
                leak += out_of_support_response(img.masks[o + 1], dilate(gt.masks[o], kSupportDilation));
            }
            m.mask_iou = iou / static_cast<double>(gt.masks.size());
            m.out_of_support = leak / static_cast<double>(gt.masks.size());
        }
        s.views.push_back(m);
    }
    for (const auto& m : s.views) {
        s.mean_psnr += m.psnr;
        s.mean_iou += m.mask_iou;
        s.mean_out_of_support += m.out_of_support;
    }
    const auto n = static_cast<double>(s.views.size());
    if (n > 0) {
        s.mean_psnr /= n;
        s.mean_iou /= n;
        s.mean_out_of_support /= n;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Composition.

// Copies of trained objects placed into the static scene. Each insertion
// re-uses the dynamic field of `object` under a rigid transform and time remap.
struct Insertion {
    std::size_t object = 0;
    SE3 transform;
    TimeRemap time_remap;
};

inline std::vector<RenderSlot> composition_slots(const SceneModel& model, std::span<const Insertion> insertions) {
    std::vector<RenderSlot> slots(1);
    slots[0].field = 0;
    for (std::size_t i = 0; i < insertions.size(); ++i) {
        const Insertion& ins = insertions[i];
        if (ins.object >= model.object_count()) {
            throw UsageError("insertion " + std::to_string(i) + " refers to object " + std::to_string(ins.object) +
                             " but the model has " + std::to_string(model.object_count()));
        }
        if (!ins.transform.is_valid()) {
            throw UsageError("insertion " + std::to_string(i) + " has an invalid rigid transform");
        }
        if (!std::isfinite(ins.time_remap.scale) || !std::isfinite(ins.time_remap.offset)) {
            throw UsageError("insertion " + std::to_string(i) + " has a non-finite time remap");
        }
        slots.push_back({ins.object + 1, ins.transform, ins.time_remap, std::nullopt});
    }
    return slots;
}

inline std::vector<ObjectPlacement> composition_placements(std::span<const Insertion> insertions) {
    std::vector<ObjectPlacement> p;
    for (const auto& ins : insertions) p.push_back({ins.object, ins.transform, ins.time_remap});
    return p;
}

struct CompositionMetrics {
    std::vector<double> out_of_support;  // per insertion
    double mean_out_of_support = 0.0;
    double psnr = 0.0;  // against the analytic composed scene
};

inline CompositionMetrics evaluate_composition(const SceneModel& model, const SyntheticScene& scene,
                                               std::span<const Insertion> insertions, const Camera& camera,
                                               double time, const RenderSettings& render, unsigned workers = 1) {
    const auto slots = composition_slots(model, insertions);
    const RenderedImages img = render_view(model, slots, camera, time, render, workers);
    const auto placements = composition_placements(insertions);
    const Frame gt = scene.render(camera, time, placements);
    CompositionMetrics m;
    for (std::size_t i = 0; i < insertions.size(); ++i) {
        m.out_of_support.push_back(out_of_support_response(img.masks[i + 1], dilate(gt.masks[i], kSupportDilation)));
    }
    if (!m.out_of_support.empty()) {
        m.mean_out_of_support = std::accumulate(m.out_of_support.begin(), m.out_of_support.end(), 0.0) /
                                static_cast<double>(m.out_of_support.size());
    }
    m.psnr = psnr(img.color, gt.rgb);
    return m;
}

}  // namespace nova
