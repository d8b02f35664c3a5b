#pragma once

#include "nova/nova.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace nova::test {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("nova_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Camera simple_camera(int w, int h, double f, const SE3& pose = {}) {
    Camera c;
    c.fx = c.fy = f;
    c.cx = 0.5 * w;
    c.cy = 0.5 * h;
    c.width = w;
    c.height = h;
    c.pose = pose;
    return c;
}

// Small, fast configuration of the desk scene.
inline RunConfig tiny_config() {
    RunConfig c;
    c.scene.width = 16;
    c.scene.height = 16;
    c.scene.focal = 16.0;
    c.scene.frames = 4;
    c.scene.holdout = {2};
    c.model.depth = 2;
    c.model.width = 8;
    c.model.skip = 1;
    c.model.pos_levels = 2;
    c.model.dir_levels = 1;
    c.model.time_levels = 1;
    c.render.samples = 8;
    c.train.steps = 5;
    c.train.rays = 64;
    c.train.novel_rays = 64;
    c.train.log_every = 2;
    return c;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) { io::write_binary(p, text); }

}  // namespace nova::test
