#pragma once

// A scene model: one static field followed by one dynamic field per object,
// all parameters held in a single ParameterVector.
//
// Checkpoint file (JSON, version 1):
//   {
//     "format": "nova-checkpoint", "version": 1, "step": <int>,
//     "fields": [ { "name": "static" | "dynamic_<i>", "kind": "static" | "dynamic",
//                   "config": { depth, width, skip, pos_levels, dir_levels, time_levels,
//                               position_scale, sigma_bias },
//                   "parameter_count": <int>, "parameters": [ <double>, ... ] }, ... ]
//   }
// Doubles are written with round-trip precision, so save/load is bit-exact.

#include "nova/fields.hpp"
#include "nova/optim.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace nova {

inline nlohmann::ordered_json to_json(const FieldConfig& c) {
    return {{"depth", c.depth},           {"width", c.width},           {"skip", c.skip},
            {"pos_levels", c.pos_levels}, {"dir_levels", c.dir_levels}, {"time_levels", c.time_levels},
            {"position_scale", c.position_scale}, {"sigma_bias", c.sigma_bias}};
}

inline FieldConfig field_config_from_json(const nlohmann::json& j) {
    FieldConfig c;
    c.depth = j.value("depth", c.depth);
    c.width = j.value("width", c.width);
    c.skip = j.value("skip", c.skip);
    c.pos_levels = j.value("pos_levels", c.pos_levels);
    c.dir_levels = j.value("dir_levels", c.dir_levels);
    c.time_levels = j.value("time_levels", c.time_levels);
    c.position_scale = j.value("position_scale", c.position_scale);
    c.sigma_bias = j.value("sigma_bias", c.sigma_bias);
    return c;
}

class SceneModel {
public:
    SceneModel() = default;

    static SceneModel create(const FieldConfig& config, std::size_t objects, std::uint64_t seed) {
        return create(config, config, objects, seed);
    }

    static SceneModel create(const FieldConfig& static_config, const FieldConfig& dynamic_config, std::size_t objects,
                             std::uint64_t seed) {
        SceneModel m;
        m.add_field("static", FieldArchitecture(FieldKind::Static, static_config));
        for (std::size_t i = 0; i < objects; ++i) {
            m.add_field("dynamic_" + std::to_string(i), FieldArchitecture(FieldKind::Dynamic, dynamic_config));
        }
        for (std::size_t f = 0; f < m.archs_.size(); ++f) {
            m.archs_[f].initialize(m.params_.slice(f), mix_seed(seed, f));
        }
        return m;
    }

    std::size_t field_count() const { return archs_.size(); }
    std::size_t object_count() const { return archs_.empty() ? 0 : archs_.size() - 1; }
    const FieldArchitecture& arch(std::size_t field) const { return archs_.at(field); }
    FieldView view(std::size_t field) const { return {&archs_.at(field), params_.slice(field)}; }
    const ParameterVector::Range& range(std::size_t field) const { return params_.ranges().at(field); }

    ParameterVector& parameters() { return params_; }
    const ParameterVector& parameters() const { return params_; }

    void add_field(const std::string& name, FieldArchitecture arch) {
        params_.add(name, arch.parameter_count());
        archs_.push_back(std::move(arch));
    }

private:
    std::vector<FieldArchitecture> archs_;
    ParameterVector params_;
};

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_json(const SceneModel& model, std::int64_t step) {
    nlohmann::ordered_json j;
    j["format"] = "nova-checkpoint";
    j["version"] = kCheckpointVersion;
    j["step"] = step;
    auto fields = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < model.field_count(); ++f) {
        const auto params = model.view(f).params;
        nlohmann::ordered_json entry;
        entry["name"] = model.range(f).name;
        entry["kind"] = to_string(model.arch(f).kind());
        entry["config"] = to_json(model.arch(f).config());
        entry["parameter_count"] = params.size();
        entry["parameters"] = std::vector<double>(params.begin(), params.end());
        fields.push_back(std::move(entry));
    }
    j["fields"] = std::move(fields);
    return j;
}

inline void save_checkpoint(const SceneModel& model, const std::filesystem::path& path, std::int64_t step = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << checkpoint_json(model, step).dump() << '\n';
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

struct LoadedCheckpoint {
    SceneModel model;
    std::int64_t step = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("format", std::string{}) != "nova-checkpoint") {
        throw DataError("checkpoint " + path.string() + " has an unknown format tag");
    }
    if (j.value("version", -1) != kCheckpointVersion) {
        throw DataError("checkpoint " + path.string() + " has unsupported version " +
                        std::to_string(j.value("version", -1)));
    }
    LoadedCheckpoint out;
    out.step = j.value("step", std::int64_t{0});
    const auto& fields = j.at("fields");
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto& entry = fields[f];
        FieldArchitecture arch(parse_field_kind(entry.at("kind").get<std::string>()),
                               field_config_from_json(entry.at("config")));
        const auto declared = entry.at("parameter_count").get<std::size_t>();
        const auto params = entry.at("parameters").get<std::vector<double>>();
        if (declared != arch.parameter_count() || params.size() != arch.parameter_count()) {
            throw DataError("checkpoint field " + std::to_string(f) + " architecture mismatch: config implies " +
                            std::to_string(arch.parameter_count()) + " parameters, file declares " +
                            std::to_string(declared) + " and stores " + std::to_string(params.size()));
        }
        out.model.add_field(entry.at("name").get<std::string>(), std::move(arch));
        auto slice = out.model.parameters().slice(f);
        std::copy(params.begin(), params.end(), slice.begin());
    }
    if (out.model.field_count() == 0 || out.model.arch(0).kind() != FieldKind::Static) {
        throw DataError("checkpoint " + path.string() + " must start with a static field");
    }
    return out;
}

// Loads a checkpoint and rejects it unless it matches the expected architecture.
inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const FieldConfig& expected,
                                        std::size_t expected_objects) {
    auto loaded = load_checkpoint(path);
    if (loaded.model.object_count() != expected_objects) {
        throw DataError("checkpoint " + path.string() + " holds " + std::to_string(loaded.model.object_count()) +
                        " dynamic fields, expected " + std::to_string(expected_objects));
    }
    for (std::size_t f = 0; f < loaded.model.field_count(); ++f) {
        if (!(loaded.model.arch(f).config() == expected)) {
            throw DataError("checkpoint " + path.string() + " field '" + loaded.model.range(f).name +
                            "' has a different network architecture than the configuration");
        }
    }
    return loaded;
}

}  // namespace nova
