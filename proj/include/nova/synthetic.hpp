#pragma once

// Analytically ray-traced desk-scale scenes: a textured background wall
// (plane z = -wall_depth) and moving solid spheres or boxes. Every frame has
// exact per-pixel z-depth and per-object masks from the nearest intersection.
// Colors are quantized to 8 bits and depths to float32 at generation time so
// that a dataset round trip through disk is exact.

#include "nova/config.hpp"
#include "nova/frame.hpp"

#include <limits>
#include <optional>
#include <numbers>
#include <random>
#include <algorithm>

namespace nova {

// Where an object is drawn: its own trajectory, moved by `transform` and re-timed.
struct ObjectPlacement {
    std::size_t object = 0;
    SE3 transform;
    TimeRemap time_remap;
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();  // ray parameter
    int label = -2;                                       // -2 miss, -1 background, >= 0 placement index
    Vec3 normal = Vec3::Zero();
};

class SyntheticScene {
public:
    SyntheticScene(SceneSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (double& p : phases_) p = phase(rng);
    }

    const SceneSpec& spec() const { return spec_; }
    std::size_t object_count() const { return spec_.objects.size(); }

    double frame_time(int frame) const { return static_cast<double>(frame) / static_cast<double>(spec_.frames - 1); }

    Camera frame_camera(int frame) const { return camera_at(frame_time(frame)); }

    // Camera on the trajectory at normalized time t.
    Camera camera_at(double t) const {
        Camera cam;
        cam.fx = cam.fy = spec_.focal;
        cam.width = spec_.width;
        cam.height = spec_.height;
        cam.cx = 0.5 * spec_.width;
        cam.cy = 0.5 * spec_.height;
        const Vec3 eye = spec_.camera_start + (spec_.camera_end - spec_.camera_start) * t;
        cam.pose = look_at(eye, spec_.look_at);
        return cam;
    }

    // The fixed viewpoint used for the fixed-view evaluation frames.
    Camera fixed_camera() const { return camera_at(0.5); }

    std::vector<ObjectPlacement> default_placements() const {
        std::vector<ObjectPlacement> p(object_count());
        for (std::size_t i = 0; i < p.size(); ++i) p[i].object = i;
        return p;
    }

    Vec3 wall_color(const Vec3& p) const {
        const double x = p.x();
        const double y = p.y();
        return {0.55 + 0.25 * std::sin(1.3 * x + phases_[0]) + 0.10 * std::cos(1.7 * y + phases_[1]),
                0.50 + 0.20 * std::sin(1.1 * y + phases_[2]) + 0.12 * std::cos(0.9 * x + 1.2 * y + phases_[3]),
                0.45 + 0.22 * std::cos(1.5 * x - 0.8 * y + phases_[4]) + 0.10 * std::sin(2.1 * y + phases_[5])};
    }

    Hit intersect(const Ray& ray, double time, std::span<const ObjectPlacement> placements) const {
        Hit best;
        if (ray.direction.z() < 0.0) {
            const double t = (-spec_.wall_depth - ray.origin.z()) / ray.direction.z();
            if (t > 0.0) {
                best = {t, -1, Vec3::UnitZ()};
            }
        }
        for (std::size_t i = 0; i < placements.size(); ++i) {
            const auto h = intersect_object(ray, time, placements[i]);
            if (h && h->t < best.t) {
                best = *h;
                best.label = static_cast<int>(i);
            }
        }
        return best;
    }

    Frame render(const Camera& camera, double time) const {
        const auto placements = default_placements();
        return render(camera, time, placements);
    }

    // Frame with one mask per placement.
    Frame render(const Camera& camera, double time, std::span<const ObjectPlacement> placements) const {
        Frame f;
        f.camera = camera;
        f.time = time;
        f.rgb = RgbImage(camera.width, camera.height, 3);
        f.depth = GrayImage(camera.width, camera.height);
        f.masks.assign(placements.size(), MaskImage(camera.width, camera.height));
        const Vec3 forward = -camera.pose.rotation.col(2);
        const Vec3 light = Vec3(0.4, 0.7, 0.6).normalized();
        for (int y = 0; y < camera.height; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                const Ray ray = pixel_ray(camera, {x, y}, {1e-6, 1e6});
                const Hit hit = intersect(ray, time, placements);
                if (hit.label == -2) {
                    continue;  // black, no depth
                }
                const Vec3 p = ray.at(hit.t);
                Vec3 c;
                if (hit.label == -1) {
                    c = wall_color(p);
                } else {
                    const auto& obj = spec_.objects[placements[static_cast<std::size_t>(hit.label)].object];
                    c = obj.color * (0.55 + 0.45 * std::max(0.0, hit.normal.dot(light)));
                    f.masks[static_cast<std::size_t>(hit.label)](x, y) = 1;
                }
                for (int ch = 0; ch < 3; ++ch) {
                    f.rgb(x, y, ch) = std::round(std::clamp(c[ch], 0.0, 1.0) * 255.0) / 255.0;
                }
                f.depth(x, y) = static_cast<double>(static_cast<float>(hit.t * ray.direction.dot(forward)));
            }
        }
        return f;
    }

    // Signed distance-like residual of a world point to an object's surface.
    double surface_residual(const Vec3& world, double time, const ObjectPlacement& placement) const {
        const auto& obj = spec_.objects.at(placement.object);
        const Vec3 local = placement.transform.inverse().apply(world) - obj.center(placement.time_remap(time));
        if (obj.shape == "sphere") return std::abs(local.norm() - obj.radius);
        const Vec3 q = local.cwiseAbs() - obj.half_size;
        return std::abs(std::max({q.x(), q.y(), q.z()}));
    }

    // Frame sequence: training/holdout frames along the camera path, then
    // optional fixed-view evaluation frames at every frame time.
    std::vector<Frame> generate() const {
        std::vector<Frame> frames;
        for (int i = 0; i < spec_.frames; ++i) {
            Frame f = render(frame_camera(i), frame_time(i));
            const bool held = std::find(spec_.holdout.begin(), spec_.holdout.end(), i) != spec_.holdout.end();
            f.split = held ? Split::Holdout : Split::Train;
            frames.push_back(std::move(f));
        }
        if (spec_.fixed_view_eval) {
            for (int i = 0; i < spec_.frames; ++i) {
                Frame f = render(fixed_camera(), frame_time(i));
                f.split = Split::Eval;
                frames.push_back(std::move(f));
            }
        }
        return frames;
    }

    // Objects that never cover a pixel of any frame.
    std::vector<std::string> frustum_warnings(const std::vector<Frame>& frames) const {
        std::vector<std::string> warnings;
        for (std::size_t o = 0; o < object_count(); ++o) {
            bool seen = false;
            for (const auto& f : frames) {
                for (auto v : f.masks.at(o).data()) seen = seen || v != 0;
                if (seen) break;
            }
            if (!seen) warnings.push_back("object " + std::to_string(o) + " is outside the camera frustum in every frame");
        }
        return warnings;
    }

private:
    std::optional<Hit> intersect_object(const Ray& ray, double time, const ObjectPlacement& placement) const {
        const auto& obj = spec_.objects.at(placement.object);
        const SE3 to_local = placement.transform.inverse();
        const Vec3 o = to_local.apply(ray.origin) - obj.center(placement.time_remap(time));
        const Vec3 d = to_local.rotate(ray.direction);
        if (obj.shape == "sphere") {
            const double b = o.dot(d);
            const double c = o.squaredNorm() - obj.radius * obj.radius;
            const double disc = b * b - c;
            if (disc < 0.0) return std::nullopt;
            const double sq = std::sqrt(disc);
            double t = -b - sq;
            if (t <= 0.0) t = -b + sq;
            if (t <= 0.0) return std::nullopt;
            const Vec3 n_local = (o + t * d) / obj.radius;
            return Hit{t, 0, placement.transform.rotate(n_local)};
        }
        // Axis-aligned box in the object's frame (slab method).
        double t_near = -std::numeric_limits<double>::infinity();
        double t_far = std::numeric_limits<double>::infinity();
        int axis = -1;
        for (int a = 0; a < 3; ++a) {
            if (d[a] == 0.0) {
                if (std::abs(o[a]) > obj.half_size[a]) return std::nullopt;
                continue;
            }
            double t0 = (-obj.half_size[a] - o[a]) / d[a];
            double t1 = (obj.half_size[a] - o[a]) / d[a];
            if (t0 > t1) std::swap(t0, t1);
            if (t0 > t_near) {
                t_near = t0;
                axis = a;
            }
            t_far = std::min(t_far, t1);
        }
        if (t_near > t_far || t_far <= 0.0 || t_near <= 0.0 || axis < 0) return std::nullopt;
        Vec3 n_local = Vec3::Zero();
        n_local[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
        return Hit{t_near, 0, placement.transform.rotate(n_local)};
    }

    SceneSpec spec_;
    double phases_[6] = {};
};

struct SyntheticDataset {
    std::vector<Frame> frames;
    std::vector<std::string> warnings;
};

inline SyntheticDataset generate_synthetic_scene(const RunConfig& config, std::uint64_t seed) {
    validate(config);
    const SyntheticScene scene(config.scene, seed);
    SyntheticDataset out;
    out.frames = scene.generate();
    out.warnings = scene.frustum_warnings(out.frames);
    return out;
}

}  // namespace nova
