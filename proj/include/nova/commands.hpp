#pragma once

// The six commands behind the `nova` executable. Each takes parsed arguments,
// writes its artifacts and returns what it computed so tests can call it in-process.

#include "nova/dataset.hpp"
#include "nova/evaluation.hpp"
#include "nova/verify.hpp"

namespace nova {

// Raw config bytes are kept so the run manifest can snapshot them unchanged.
struct LoadedConfig {
    RunConfig config;
    std::string text;
    std::vector<std::string> overrides;
};

inline LoadedConfig read_run_config(const std::filesystem::path& path, std::span<const std::string> overrides = {}) {
    LoadedConfig out;
    out.text = read_text_file(path);
    out.config = load_config(path, overrides);
    out.overrides.assign(overrides.begin(), overrides.end());
    return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_binary(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

inline SyntheticDataset cmd_gen(const RunConfig& config, const std::filesystem::path& out_dir) {
    SyntheticDataset ds = generate_synthetic_scene(config, config.seed);
    save_dataset(ds.frames, out_dir);
    return ds;
}

// ---------------------------------------------------------------------------

struct RunManifest {
    std::filesystem::path out_dir;
    std::string config_snapshot;            // file name inside out_dir
    std::vector<std::string> checkpoints;   // file names inside out_dir
    std::string log;                        // file name inside out_dir
    nlohmann::ordered_json final_metrics;

    nlohmann::ordered_json to_json(const LoadedConfig& cfg) const {
        nlohmann::ordered_json j;
        j["format"] = "nova-run";
        j["version"] = 1;
        j["config_snapshot"] = config_snapshot;
        j["overrides"] = cfg.overrides;
        j["resolved_config"] = nova::to_json(cfg.config);
        j["seed"] = cfg.config.seed;
        j["checkpoints"] = checkpoints;
        j["log"] = log;
        j["final_metrics"] = final_metrics;
        return j;
    }
};

struct TrainCommandResult {
    TrainResult train;
    RunManifest manifest;
};

inline TrainCommandResult cmd_train(const LoadedConfig& cfg, const std::filesystem::path& dataset_dir,
                                    const std::filesystem::path& out_dir, unsigned workers = 1,
                                    std::function<void(const std::string&)> on_log = {}) {
    const std::vector<Frame> frames = load_dataset(dataset_dir);
    if (!frames.empty() && frames.front().masks.size() != cfg.config.scene.objects.size()) {
        throw DataError("dataset has " + std::to_string(frames.front().masks.size()) + " objects but the config lists " +
                        std::to_string(cfg.config.scene.objects.size()));
    }
    std::filesystem::create_directories(out_dir);
    TrainCommandResult r;
    r.manifest.out_dir = out_dir;
    r.manifest.config_snapshot = "config.json";
    io::write_binary(out_dir / r.manifest.config_snapshot, cfg.text);

    TrainOptions opt;
    opt.workers = workers;
    opt.out_dir = out_dir;
    opt.on_log = std::move(on_log);
    r.train = train(cfg.config, frames, opt);

    for (const auto& p : r.train.checkpoints) r.manifest.checkpoints.push_back(p.filename().string());
    r.manifest.log = r.train.log_path ? r.train.log_path->filename().string() : std::string{};
    nlohmann::ordered_json metrics;
    metrics["steps"] = r.train.steps;
    metrics["final_loss"] = r.train.steps > 0 ? r.train.last.total : 0.0;
    metrics["final_recon"] = r.train.steps > 0 ? r.train.last.value("recon") : 0.0;
    bool has_holdout = false;
    for (const auto& f : frames) has_holdout = has_holdout || f.split == Split::Holdout;
    if (has_holdout) {
        const SplitSummary s = evaluate_split(r.train.model, frames, Split::Holdout, cfg.config.render, workers);
        metrics["holdout_psnr"] = s.mean_psnr;
        metrics["holdout_mask_iou"] = s.mean_iou;
    }
    r.manifest.final_metrics = metrics;
    write_json(out_dir / "run_manifest.json", r.manifest.to_json(cfg));
    return r;
}

// ---------------------------------------------------------------------------

// Camera selection shared by render and compose: an explicit camera file, a
// dataset frame, or the scene's fixed evaluation viewpoint.
struct ViewRequest {
    std::optional<std::filesystem::path> camera_file;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::size_t> frame;
    std::optional<double> time;
};

struct ResolvedView {
    Camera camera;
    double time = 0.5;
    std::optional<Frame> frame;
};

inline ResolvedView resolve_view(const RunConfig& config, const ViewRequest& req) {
    ResolvedView v;
    if (req.camera_file && req.frame) throw UsageError("give either --camera or --frame, not both");
    if (req.frame) {
        if (!req.dataset) throw UsageError("--frame needs --dataset");
        auto frames = load_dataset(*req.dataset);
        if (*req.frame >= frames.size()) {
            throw UsageError("frame " + std::to_string(*req.frame) + " out of range (dataset has " +
                             std::to_string(frames.size()) + " frames)");
        }
        v.frame = std::move(frames[*req.frame]);
        v.camera = v.frame->camera;
        v.time = v.frame->time;
    } else if (req.camera_file) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(*req.camera_file));
        } catch (const nlohmann::json::parse_error& e) {
            throw UsageError("camera file " + req.camera_file->string() + " is not valid JSON: " + e.what());
        }
        try {
            v.camera = camera_from_json(j.contains("camera") ? j["camera"] : j);
        } catch (const Error& e) {
            throw UsageError(std::string("camera file ") + req.camera_file->string() + ": " + e.what());
        }
    } else {
        v.camera = SyntheticScene(config.scene, config.seed).fixed_camera();
    }
    if (req.time) v.time = *req.time;
    if (!std::isfinite(v.time)) throw UsageError("render time must be finite");
    return v;
}

inline SceneModel load_model_for(const RunConfig& config, const std::filesystem::path& checkpoint) {
    return load_checkpoint(checkpoint, config.model, config.scene.objects.size()).model;
}

// Depth mapped from [near, far] to [0, 1].
inline GrayImage normalized_depth(const GrayImage& depth, const RenderSettings& render) {
    GrayImage out(depth.width(), depth.height());
    for (std::size_t i = 0; i < depth.data().size(); ++i) {
        out.data()[i] = std::clamp((depth.data()[i] - render.near) / (render.far - render.near), 0.0, 1.0);
    }
    return out;
}

inline void write_rendered(const RenderedImages& img, const RenderSettings& render, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::write_ppm(dir / "color.ppm", img.color);
    for (std::size_t n = 0; n < img.masks.size(); ++n) {
        io::write_pgm(dir / ("mask_" + std::to_string(n) + ".pgm"), img.masks[n]);
        io::write_ppm(dir / ("field_" + std::to_string(n) + ".ppm"), img.field_colors[n]);
    }
    io::write_pgm(dir / "depth.pgm", normalized_depth(img.depth, render));
}

struct RenderRequest {
    std::filesystem::path checkpoint;
    ViewRequest view;
    std::optional<double> static_beta;
    std::optional<int> samples;
    std::filesystem::path out_dir;
};

struct RenderCommandResult {
    RenderedImages images;
    ResolvedView view;
    std::optional<double> psnr;  // against the dataset frame when one was selected
};

inline RenderCommandResult cmd_render(const RunConfig& config, const RenderRequest& req, unsigned workers = 1) {
    RenderSettings render = config.render;
    if (req.samples) {
        if (*req.samples < 2) throw UsageError("--samples must be >= 2");
        render.samples = *req.samples;
    }
    if (req.static_beta && !(*req.static_beta >= 0.0 && *req.static_beta <= 1.0)) {
        throw UsageError("--static-beta must be in [0, 1]");
    }
    const SceneModel model = load_model_for(config, req.checkpoint);
    RenderCommandResult r;
    r.view = resolve_view(config, req.view);
    auto slots = default_slots(model);
    if (req.static_beta) slots[0].beta_override = *req.static_beta;
    r.images = render_view(model, slots, r.view.camera, r.view.time, render, workers);
    write_rendered(r.images, render, req.out_dir);
    nlohmann::ordered_json rep;
    rep["camera"] = camera_to_json(r.view.camera);
    rep["time"] = r.view.time;
    rep["samples"] = render.samples;
    if (r.view.frame) {
        r.psnr = psnr(r.images.color, r.view.frame->rgb);
        rep["psnr"] = *r.psnr;
    }
    write_json(req.out_dir / "render_report.json", rep);
    return r;
}

// ---------------------------------------------------------------------------

// {"version": 1, "insertions": [{"object", "rotation_axis", "rotation_deg",
//   "translation", "time_scale", "time_offset"}, ...]}
inline std::vector<Insertion> parse_insertions(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("insertions") || !j["insertions"].is_array()) {
        throw UsageError("insertion spec must be an object with an 'insertions' array");
    }
    if (j.value("version", 1) != 1) throw UsageError("insertion spec version must be 1");
    std::vector<Insertion> out;
    const auto& list = j["insertions"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        const std::string where = "insertion " + std::to_string(i);
        try {
            Insertion ins;
            const auto object = e.at("object").get<long long>();
            if (object < 0) throw UsageError(where + ": object index must be >= 0");
            ins.object = static_cast<std::size_t>(object);
            const auto axis = e.value("rotation_axis", std::vector<double>{0.0, 1.0, 0.0});
            const double deg = e.value("rotation_deg", 0.0);
            const auto t = e.value("translation", std::vector<double>{0.0, 0.0, 0.0});
            if (axis.size() != 3 || t.size() != 3) throw UsageError(where + ": rotation_axis and translation need 3 values");
            const Vec3 ax(axis[0], axis[1], axis[2]);
            const Vec3 tr(t[0], t[1], t[2]);
            if (!all_finite(ax) || !all_finite(tr) || !std::isfinite(deg)) throw UsageError(where + ": non-finite transform");
            if (deg != 0.0 && ax.norm() == 0.0) throw UsageError(where + ": rotation_axis must be non-zero");
            ins.transform = SE3::from_axis_angle(deg != 0.0 ? ax : Vec3::UnitY(), deg * std::numbers::pi / 180.0, tr);
            ins.time_remap.scale = e.value("time_scale", 1.0);
            ins.time_remap.offset = e.value("time_offset", 0.0);
            if (ins.time_remap.scale == 0.0) throw UsageError(where + ": time_scale must be non-zero");
            out.push_back(ins);
        } catch (const nlohmann::json::exception& ex) {
            throw UsageError(where + ": " + ex.what());
        }
    }
    return out;
}

inline std::vector<Insertion> load_insertions(const std::filesystem::path& path) {
    try {
        return parse_insertions(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("insertion spec " + path.string() + " is not valid JSON: " + e.what());
    }
}

struct ComposeRequest {
    std::filesystem::path checkpoint;
    std::vector<Insertion> insertions;
    ViewRequest view;
    std::filesystem::path out_dir;
};

struct ComposeCommandResult {
    RenderedImages images;
    CompositionMetrics metrics;
};

inline ComposeCommandResult cmd_compose(const RunConfig& config, const ComposeRequest& req, unsigned workers = 1) {
    const SceneModel model = load_model_for(config, req.checkpoint);
    const ResolvedView view = resolve_view(config, req.view);
    const auto slots = composition_slots(model, req.insertions);
    ComposeCommandResult r;
    r.images = render_view(model, slots, view.camera, view.time, config.render, workers);
    write_rendered(r.images, config.render, req.out_dir);
    const SyntheticScene scene(config.scene, config.seed);
    r.metrics = evaluate_composition(model, scene, req.insertions, view.camera, view.time, config.render, workers);
    nlohmann::ordered_json rep;
    rep["camera"] = camera_to_json(view.camera);
    rep["time"] = view.time;
    rep["insertions"] = req.insertions.size();
    rep["out_of_support"] = r.metrics.out_of_support;
    rep["mean_out_of_support"] = r.metrics.mean_out_of_support;
    rep["psnr_vs_analytic"] = r.metrics.psnr;
    write_json(req.out_dir / "compose_report.json", rep);
    return r;
}

// ---------------------------------------------------------------------------

inline EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                           const std::filesystem::path& dataset_dir, const std::filesystem::path& report_path,
                           unsigned workers = 1) {
    const SceneModel model = load_model_for(config, checkpoint);
    const auto frames = load_dataset(dataset_dir);
    EvalReport rep = evaluate_dataset(model, frames, config.render, workers);
    write_json(report_path, rep.to_json());
    return rep;
}

// ---------------------------------------------------------------------------

inline std::vector<CheckResult> cmd_verify(const VerifyOptions& options) { return run_verify(options); }

}  // namespace nova
