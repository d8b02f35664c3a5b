#pragma once

// On-disk dataset: one directory per scene.
//
//   manifest.json            frame list with camera, time and split
//   frame_000.ppm            8-bit binary RGB (P6)
//   frame_000.depth          float32 little-endian z-depth, row-major, width*height values
//   frame_000_mask_0.pgm     8-bit binary mask (P5), values {0, 255}
//
// Manifest (JSON):
//   { "format": "nova-dataset", "version": 1, "width": W, "height": H, "objects": N,
//     "frames": [ { "index": i, "split": "train" | "holdout" | "eval", "time": t,
//                   "camera": { "fx", "fy", "cx", "cy", "rotation": [9, row-major], "translation": [3] },
//                   "rgb": "frame_000.ppm", "depth": "frame_000.depth",
//                   "masks": [ "frame_000_mask_0.pgm", ... ] }, ... ] }

#include "nova/frame.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace nova {

namespace fs = std::filesystem;

inline constexpr int kDatasetVersion = 1;

namespace io {

inline std::string read_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_binary(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

inline std::string netpbm_header(const char* magic, int w, int h) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

// Parses a binary PPM/PGM with maxval 255; returns the raw pixel bytes.
inline std::string read_netpbm(const fs::path& path, const char* magic, int channels, int& w, int& h) {
    const std::string bytes = read_binary(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    if (token() != magic) throw DataError(path.string() + " is not a binary " + magic + " image");
    int maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw DataError(path.string() + " has a corrupt header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw DataError(path.string() + " has unsupported dimensions or maxval");
    ++pos;  // single whitespace after maxval
    const std::size_t expected = static_cast<std::size_t>(w) * h * channels;
    if (bytes.size() < pos + expected) {
        throw DataError(path.string() + " is truncated (expected " + std::to_string(expected) + " pixel bytes, got " +
                        std::to_string(bytes.size() > pos ? bytes.size() - pos : 0) + ")");
    }
    return bytes.substr(pos, expected);
}

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_ppm(const fs::path& path, const RgbImage& img) {
    std::string bytes = netpbm_header("P6", img.width(), img.height());
    for (double v : img.data()) bytes.push_back(static_cast<char>(to_byte(v)));
    write_binary(path, bytes);
}

inline void write_pgm(const fs::path& path, const GrayImage& img) {
    std::string bytes = netpbm_header("P5", img.width(), img.height());
    for (double v : img.data()) bytes.push_back(static_cast<char>(to_byte(v)));
    write_binary(path, bytes);
}

inline void write_mask_pgm(const fs::path& path, const MaskImage& mask) {
    std::string bytes = netpbm_header("P5", mask.width(), mask.height());
    for (auto v : mask.data()) bytes.push_back(static_cast<char>(v != 0 ? 255 : 0));
    write_binary(path, bytes);
}

inline RgbImage read_ppm(const fs::path& path) {
    int w = 0;
    int h = 0;
    const std::string px = read_netpbm(path, "P6", 3, w, h);
    RgbImage img(w, h, 3);
    for (std::size_t i = 0; i < px.size(); ++i) img.data()[i] = static_cast<unsigned char>(px[i]) / 255.0;
    return img;
}

inline MaskImage read_mask_pgm(const fs::path& path) {
    int w = 0;
    int h = 0;
    const std::string px = read_netpbm(path, "P5", 1, w, h);
    MaskImage img(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const auto v = static_cast<unsigned char>(px[i]);
        if (v != 0 && v != 255) throw DataError(path.string() + " is not a binary {0,255} mask");
        img.data()[i] = v != 0 ? 1 : 0;
    }
    return img;
}

inline std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

inline void write_depth(const fs::path& path, const GrayImage& depth) {
    std::string bytes(depth.data().size() * 4, '\0');
    for (std::size_t i = 0; i < depth.data().size(); ++i) {
        const auto f = static_cast<float>(depth.data()[i]);
        const std::uint32_t u = to_little_endian(std::bit_cast<std::uint32_t>(f));
        std::memcpy(bytes.data() + 4 * i, &u, 4);
    }
    write_binary(path, bytes);
}

inline GrayImage read_depth(const fs::path& path, int w, int h, const std::string& frame_name) {
    const std::string bytes = read_binary(path);
    const std::size_t expected = static_cast<std::size_t>(w) * h * 4;
    if (bytes.size() != expected) {
        throw DataError(frame_name + ": depth file " + path.filename().string() + " is truncated or oversized (expected " +
                        std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()) + ")");
    }
    GrayImage depth(w, h);
    for (std::size_t i = 0; i < depth.data().size(); ++i) {
        std::uint32_t u = 0;
        std::memcpy(&u, bytes.data() + 4 * i, 4);
        depth.data()[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(u)));
    }
    return depth;
}

}  // namespace io

inline std::string frame_stem(std::size_t index) {
    std::ostringstream ss;
    ss << "frame_" << std::setw(3) << std::setfill('0') << index;
    return ss.str();
}

inline nlohmann::ordered_json camera_to_json(const Camera& cam) {
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(cam.pose.rotation(r, c));
    }
    const Vec3& t = cam.pose.translation;
    return {{"fx", cam.fx},         {"fy", cam.fy},          {"cx", cam.cx},
            {"cy", cam.cy},         {"width", cam.width},    {"height", cam.height},
            {"rotation", rot},      {"translation", {t.x(), t.y(), t.z()}}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    try {
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto rot = j.at("rotation").get<std::vector<double>>();
        const auto t = j.at("translation").get<std::vector<double>>();
        if (rot.size() != 9 || t.size() != 3) throw DataError("camera rotation/translation have wrong length");
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) cam.pose.rotation(r, c) = rot[static_cast<std::size_t>(r * 3 + c)];
        }
        cam.pose.translation = {t[0], t[1], t[2]};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid camera: ") + e.what());
    }
    cam.validate();
    return cam;
}

inline void save_dataset(const std::vector<Frame>& frames, const fs::path& dir) {
    if (frames.empty()) throw UsageError("save_dataset: no frames");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    const Frame& first = frames.front();
    nlohmann::ordered_json manifest;
    manifest["format"] = "nova-dataset";
    manifest["version"] = kDatasetVersion;
    manifest["width"] = first.width();
    manifest["height"] = first.height();
    manifest["objects"] = first.masks.size();
    auto list = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Frame& f = frames[i];
        if (f.width() != first.width() || f.height() != first.height() || f.masks.size() != first.masks.size()) {
            throw UsageError("save_dataset: frame " + std::to_string(i) + " differs in size or object count");
        }
        const std::string stem = frame_stem(i);
        io::write_ppm(dir / (stem + ".ppm"), f.rgb);
        io::write_depth(dir / (stem + ".depth"), f.depth);
        auto masks = nlohmann::ordered_json::array();
        for (std::size_t n = 0; n < f.masks.size(); ++n) {
            const std::string name = stem + "_mask_" + std::to_string(n) + ".pgm";
            io::write_mask_pgm(dir / name, f.masks[n]);
            masks.push_back(name);
        }
        list.push_back({{"index", i},
                        {"split", to_string(f.split)},
                        {"time", f.time},
                        {"camera", camera_to_json(f.camera)},
                        {"rgb", stem + ".ppm"},
                        {"depth", stem + ".depth"},
                        {"masks", masks}});
    }
    manifest["frames"] = list;
    io::write_binary(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline std::vector<Frame> load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw DataError("dataset manifest " + manifest_path.string() + " not found");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_binary(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    if (manifest.value("format", std::string{}) != "nova-dataset") {
        throw DataError("manifest " + manifest_path.string() + " has an unknown format tag");
    }
    if (manifest.value("version", -1) != kDatasetVersion) {
        throw DataError("manifest " + manifest_path.string() + " has unsupported version");
    }
    int w = 0;
    int h = 0;
    std::size_t objects = 0;
    nlohmann::json list;
    try {
        w = manifest.at("width").get<int>();
        h = manifest.at("height").get<int>();
        objects = manifest.at("objects").get<std::size_t>();
        list = manifest.at("frames");
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!list.is_array() || list.empty()) throw DataError("manifest lists no frames");

    // Every listed frame must be present before anything is parsed.
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        std::vector<std::string> files{e.value("rgb", std::string{}), e.value("depth", std::string{})};
        for (const auto& m : e.value("masks", std::vector<std::string>{})) files.push_back(m);
        for (const auto& name : files) {
            if (name.empty() || !fs::exists(dir / name)) {
                throw DataError("frame " + std::to_string(i) + " missing" + (name.empty() ? "" : " (" + name + ")"));
            }
        }
    }
    std::size_t on_disk = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("frame_") && entry.path().extension() == ".ppm") ++on_disk;
    }
    if (on_disk != list.size()) {
        throw DataError("manifest lists " + std::to_string(list.size()) + " frames but the directory holds " +
                        std::to_string(on_disk) + " frame images");
    }

    std::vector<Frame> frames;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        const std::string frame_name = "frame " + std::to_string(i);
        Frame f;
        try {
            f.time = e.at("time").get<double>();
            f.split = parse_split(e.at("split").get<std::string>());
            f.camera = camera_from_json(e.at("camera"));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(frame_name + ": " + ex.what());
        } catch (const Error& ex) {
            throw DataError(frame_name + ": " + ex.what());
        }
        if (f.camera.width != w || f.camera.height != h) throw DataError(frame_name + ": camera size differs from manifest");
        f.rgb = io::read_ppm(dir / e.at("rgb").get<std::string>());
        if (f.rgb.width() != w || f.rgb.height() != h) throw DataError(frame_name + ": rgb image has the wrong size");
        f.depth = io::read_depth(dir / e.at("depth").get<std::string>(), w, h, frame_name);
        const auto masks = e.at("masks").get<std::vector<std::string>>();
        if (masks.size() != objects) throw DataError(frame_name + ": expected " + std::to_string(objects) + " masks");
        for (const auto& m : masks) {
            f.masks.push_back(io::read_mask_pgm(dir / m));
            if (f.masks.back().width() != w || f.masks.back().height() != h) {
                throw DataError(frame_name + ": mask " + m + " has the wrong size");
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

// Interface for importing the preprocessed real-video layout (per-frame
// images, COLMAP-style poses, masks and monocular depth). Assumptions the
// importer must state: poses are camera-to-world with the -z viewing axis,
// depths are z-depth in pose units, masks are one binary image per object.
// Only synthetic scenes are produced at desk scale.
struct ExternalSceneLayout {
    fs::path images;
    fs::path poses;
    fs::path masks;
    fs::path depth;
};

inline std::vector<Frame> convert_external_scene(const ExternalSceneLayout& layout) {
    throw UsageError("importing " + layout.images.string() + " is not supported; generate a synthetic scene instead");
}

}  // namespace nova
