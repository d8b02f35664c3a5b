#pragma once

// Run configuration: a versioned JSON document. Every key is optional and
// falls back to the default listed in to_json(RunConfig{}); unknown keys and
// wrongly-typed values are rejected with the offending key path.
//
// Overrides of the form "train.steps=100" or "scene.holdout=[2,7]" are applied
// to the parsed document before validation. The value is read as JSON when it
// parses, otherwise as a plain string.

#include "nova/losses.hpp"
#include "nova/model.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nova {

inline constexpr int kConfigVersion = 1;

struct ObjectSpec {
    std::string shape = "sphere";  // "sphere" | "box"
    double radius = 0.5;           // sphere
    Vec3 half_size{0.4, 0.4, 0.4}; // box
    Vec3 color{0.9, 0.25, 0.2};
    Vec3 start{-0.8, -0.15, -2.5};  // center at t = 0
    Vec3 end{0.8, 0.15, -2.5};      // center at t = 1
    double arc = 0.2;               // vertical bulge of the path at t = 0.5

    // Center position at normalized time t.
    Vec3 center(double t) const {
        return start + (end - start) * t + Vec3(0.0, arc * 4.0 * t * (1.0 - t), 0.0);
    }
};

struct SceneSpec {
    int width = 64;
    int height = 64;
    int frames = 12;
    std::vector<int> holdout{3, 8};
    bool fixed_view_eval = true;  // extra frames from one fixed camera at every time
    double focal = 64.0;
    Vec3 camera_start{-0.25, 0.05, 0.0};
    Vec3 camera_end{0.25, -0.05, 0.0};
    Vec3 look_at{0.0, 0.0, -4.0};
    double wall_depth = 4.0;  // background plane z = -wall_depth
    std::vector<ObjectSpec> objects{ObjectSpec{}};
};

struct RenderSettings {
    double near = 1.0;
    double far = 6.0;
    int samples = 32;

    RayBounds bounds() const { return {near, far}; }
};

struct AugmentSettings {
    double max_translation = 0.15;
    double max_rotation_deg = 3.0;
};

struct TrainSettings {
    std::int64_t steps = 1500;
    int rays = 256;
    int novel_rays = 256;
    double learning_rate = 5e-3;
    double lr_decay = 0.1;  // learning rate multiplier reached at the last step
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 0.0;  // global-norm clip, 0 disables
    bool ref_mask_loss = true;
    int log_every = 50;
    std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
};

struct RunConfig {
    int version = kConfigVersion;
    std::uint64_t seed = 7;
    SceneSpec scene;
    FieldConfig model;
    RenderSettings render;
    LossWeights loss;
    AugmentSettings augment;
    TrainSettings train;
};

// ---------------------------------------------------------------------------

inline nlohmann::ordered_json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline nlohmann::ordered_json to_json(const ObjectSpec& o) {
    return {{"shape", o.shape},     {"radius", o.radius},      {"half_size", vec_json(o.half_size)},
            {"color", vec_json(o.color)}, {"start", vec_json(o.start)}, {"end", vec_json(o.end)},
            {"arc", o.arc}};
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json objects = nlohmann::ordered_json::array();
    for (const auto& o : c.scene.objects) objects.push_back(to_json(o));
    nlohmann::ordered_json j;
    j["version"] = c.version;
    j["seed"] = c.seed;
    j["scene"] = {{"width", c.scene.width},
                  {"height", c.scene.height},
                  {"frames", c.scene.frames},
                  {"holdout", c.scene.holdout},
                  {"fixed_view_eval", c.scene.fixed_view_eval},
                  {"focal", c.scene.focal},
                  {"camera_start", vec_json(c.scene.camera_start)},
                  {"camera_end", vec_json(c.scene.camera_end)},
                  {"look_at", vec_json(c.scene.look_at)},
                  {"wall_depth", c.scene.wall_depth},
                  {"objects", objects}};
    j["model"] = to_json(c.model);
    j["render"] = {{"near", c.render.near}, {"far", c.render.far}, {"samples", c.render.samples}};
    j["loss"] = {{"recon", c.loss.recon}, {"nvm", c.loss.nvm},   {"nvcn", c.loss.nvcn},
                 {"nvcf", c.loss.nvcf},   {"nvb", c.loss.nvb},   {"nva", c.loss.nva}};
    j["augment"] = {{"max_translation", c.augment.max_translation},
                    {"max_rotation_deg", c.augment.max_rotation_deg}};
    j["train"] = {{"steps", c.train.steps},
                  {"rays", c.train.rays},
                  {"novel_rays", c.train.novel_rays},
                  {"learning_rate", c.train.learning_rate},
                  {"lr_decay", c.train.lr_decay},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"epsilon", c.train.epsilon},
                  {"grad_clip", c.train.grad_clip},
                  {"ref_mask_loss", c.train.ref_mask_loss},
                  {"log_every", c.train.log_every},
                  {"checkpoint_every", c.train.checkpoint_every}};
    return j;
}

namespace detail {

class ConfigReader {
public:
    template <class T>
    T get(const nlohmann::json& obj, const std::string& key, const std::string& path) const {
        const std::string full = path.empty() ? key : path + "." + key;
        try {
            return obj.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError("config key '" + full + "' has the wrong type");
        }
    }

    Vec3 vec(const nlohmann::json& obj, const std::string& key, const std::string& path) const {
        const auto v = get<std::vector<double>>(obj, key, path);
        if (v.size() != 3) throw UsageError("config key '" + path + "." + key + "' must have 3 components");
        return {v[0], v[1], v[2]};
    }
};

// Rejects keys absent from the defaults document.
inline void check_keys(const nlohmann::json& user, const nlohmann::json& defaults, const std::string& path) {
    if (!user.is_object()) return;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string full = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.contains(it.key())) throw UsageError("unknown config key '" + full + "'");
        const auto& def = defaults.at(it.key());
        if (def.is_object()) {
            if (!it.value().is_object()) throw UsageError("config key '" + full + "' must be an object");
            check_keys(it.value(), def, full);
        }
    }
}

inline void require(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
    using detail::require;
    require(c.version == kConfigVersion, "config 'version' must be " + std::to_string(kConfigVersion));
    require(c.scene.width >= 1 && c.scene.height >= 1, "scene.width and scene.height must be >= 1");
    require(c.scene.frames >= 2, "scene.frames must be >= 2");
    for (int h : c.scene.holdout) {
        require(h >= 0 && h < c.scene.frames, "scene.holdout entry " + std::to_string(h) + " is not a frame index");
    }
    require(static_cast<int>(c.scene.holdout.size()) < c.scene.frames, "scene.holdout leaves no training frames");
    require(c.scene.focal > 0.0, "scene.focal must be positive");
    require(c.scene.wall_depth > 0.0, "scene.wall_depth must be positive");
    for (std::size_t i = 0; i < c.scene.objects.size(); ++i) {
        const auto& o = c.scene.objects[i];
        const std::string p = "scene.objects[" + std::to_string(i) + "]";
        require(o.shape == "sphere" || o.shape == "box", p + ".shape must be 'sphere' or 'box'");
        require(o.radius > 0.0, p + ".radius must be positive");
        require(o.half_size.minCoeff() > 0.0, p + ".half_size must be positive");
        require(o.color.minCoeff() >= 0.0 && o.color.maxCoeff() <= 1.0, p + ".color must be in [0,1]");
    }
    try {
        c.model.validate();
    } catch (const UsageError& e) {
        throw UsageError(std::string("model: ") + e.what());
    }
    require(c.render.near > 0.0 && c.render.near < c.render.far, "render.near/far must satisfy 0 < near < far");
    require(c.render.samples >= 2, "render.samples must be >= 2");
    try {
        c.loss.validate();
    } catch (const UsageError& e) {
        throw UsageError(std::string("loss: ") + e.what());
    }
    require(c.augment.max_translation >= 0.0, "augment.max_translation must be >= 0");
    require(c.augment.max_rotation_deg >= 0.0 && c.augment.max_rotation_deg <= 45.0,
            "augment.max_rotation_deg must be in [0, 45]");
    require(c.train.steps >= 0, "train.steps must be >= 0");
    require(c.train.rays >= 1, "train.rays must be >= 1");
    require(c.train.novel_rays >= 0, "train.novel_rays must be >= 0");
    require(c.train.learning_rate > 0.0, "train.learning_rate must be positive");
    require(c.train.lr_decay > 0.0, "train.lr_decay must be positive");
    require(c.train.beta1 >= 0.0 && c.train.beta1 < 1.0, "train.beta1 must be in [0, 1)");
    require(c.train.beta2 >= 0.0 && c.train.beta2 < 1.0, "train.beta2 must be in [0, 1)");
    require(c.train.epsilon > 0.0, "train.epsilon must be positive");
    require(c.train.grad_clip >= 0.0, "train.grad_clip must be >= 0");
    require(c.train.log_every >= 1, "train.log_every must be >= 1");
    require(c.train.checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
}

inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw UsageError("override '" + assignment + "' must look like key.path=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    nlohmann::json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
}

inline RunConfig parse_config(nlohmann::json user, std::span<const std::string> overrides = {}) {
    for (const auto& o : overrides) apply_override(user, o);
    if (!user.is_object()) throw UsageError("config must be a JSON object");
    const RunConfig defaults;
    const nlohmann::json def = to_json(defaults);
    detail::check_keys(user, def, "");
    if (user.contains("scene") && user["scene"].contains("objects")) {
        const auto& objs = user["scene"]["objects"];
        if (!objs.is_array()) throw UsageError("config key 'scene.objects' must be an array");
        const nlohmann::json obj_def = to_json(ObjectSpec{});
        for (std::size_t i = 0; i < objs.size(); ++i) {
            detail::check_keys(objs[i], obj_def, "scene.objects[" + std::to_string(i) + "]");
        }
    }

    nlohmann::json merged = def;
    merged.merge_patch(user);
    // merge_patch replaces arrays wholesale; fill object entries from the object defaults.
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : merged["scene"]["objects"]) {
        nlohmann::json full = to_json(ObjectSpec{});
        full.merge_patch(o);
        objects.push_back(full);
    }
    merged["scene"]["objects"] = objects;

    const detail::ConfigReader rd;
    RunConfig c;
    c.version = rd.get<int>(merged, "version", "");
    c.seed = rd.get<std::uint64_t>(merged, "seed", "");
    const auto& s = merged["scene"];
    c.scene.width = rd.get<int>(s, "width", "scene");
    c.scene.height = rd.get<int>(s, "height", "scene");
    c.scene.frames = rd.get<int>(s, "frames", "scene");
    c.scene.holdout = rd.get<std::vector<int>>(s, "holdout", "scene");
    c.scene.fixed_view_eval = rd.get<bool>(s, "fixed_view_eval", "scene");
    c.scene.focal = rd.get<double>(s, "focal", "scene");
    c.scene.camera_start = rd.vec(s, "camera_start", "scene");
    c.scene.camera_end = rd.vec(s, "camera_end", "scene");
    c.scene.look_at = rd.vec(s, "look_at", "scene");
    c.scene.wall_depth = rd.get<double>(s, "wall_depth", "scene");
    c.scene.objects.clear();
    for (std::size_t i = 0; i < s["objects"].size(); ++i) {
        const auto& o = s["objects"][i];
        const std::string p = "scene.objects[" + std::to_string(i) + "]";
        ObjectSpec spec;
        spec.shape = rd.get<std::string>(o, "shape", p);
        spec.radius = rd.get<double>(o, "radius", p);
        spec.half_size = rd.vec(o, "half_size", p);
        spec.color = rd.vec(o, "color", p);
        spec.start = rd.vec(o, "start", p);
        spec.end = rd.vec(o, "end", p);
        spec.arc = rd.get<double>(o, "arc", p);
        c.scene.objects.push_back(spec);
    }
    const auto& m = merged["model"];
    c.model.depth = rd.get<int>(m, "depth", "model");
    c.model.width = rd.get<int>(m, "width", "model");
    c.model.skip = rd.get<int>(m, "skip", "model");
    c.model.pos_levels = rd.get<int>(m, "pos_levels", "model");
    c.model.dir_levels = rd.get<int>(m, "dir_levels", "model");
    c.model.time_levels = rd.get<int>(m, "time_levels", "model");
    c.model.position_scale = rd.get<double>(m, "position_scale", "model");
    c.model.sigma_bias = rd.get<double>(m, "sigma_bias", "model");
    const auto& r = merged["render"];
    c.render.near = rd.get<double>(r, "near", "render");
    c.render.far = rd.get<double>(r, "far", "render");
    c.render.samples = rd.get<int>(r, "samples", "render");
    const auto& l = merged["loss"];
    c.loss.recon = rd.get<double>(l, "recon", "loss");
    c.loss.nvm = rd.get<double>(l, "nvm", "loss");
    c.loss.nvcn = rd.get<double>(l, "nvcn", "loss");
    c.loss.nvcf = rd.get<double>(l, "nvcf", "loss");
    c.loss.nvb = rd.get<double>(l, "nvb", "loss");
    c.loss.nva = rd.get<double>(l, "nva", "loss");
    const auto& a = merged["augment"];
    c.augment.max_translation = rd.get<double>(a, "max_translation", "augment");
    c.augment.max_rotation_deg = rd.get<double>(a, "max_rotation_deg", "augment");
    const auto& t = merged["train"];
    c.train.steps = rd.get<std::int64_t>(t, "steps", "train");
    c.train.rays = rd.get<int>(t, "rays", "train");
    c.train.novel_rays = rd.get<int>(t, "novel_rays", "train");
    c.train.learning_rate = rd.get<double>(t, "learning_rate", "train");
    c.train.lr_decay = rd.get<double>(t, "lr_decay", "train");
    c.train.beta1 = rd.get<double>(t, "beta1", "train");
    c.train.beta2 = rd.get<double>(t, "beta2", "train");
    c.train.epsilon = rd.get<double>(t, "epsilon", "train");
    c.train.grad_clip = rd.get<double>(t, "grad_clip", "train");
    c.train.ref_mask_loss = rd.get<bool>(t, "ref_mask_loss", "train");
    c.train.log_every = rd.get<int>(t, "log_every", "train");
    c.train.checkpoint_every = rd.get<std::int64_t>(t, "checkpoint_every", "train");
    validate(c);
    return c;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {}) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(std::move(doc), overrides);
}

}  // namespace nova
