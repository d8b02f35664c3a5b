#pragma once

// Pinhole camera model and rigid-body algebra.
//
// Convention: right-handed world, camera-to-world poses. In the camera frame
// the camera looks down -z, +x points right and +y points up; image rows grow
// downward. Pixel (x, y) covers [x, x+1) x [y, y+1) and its center is at
// continuous image coordinate (x + 0.5, y + 0.5). "Depth" of a point is its
// distance along the optical axis (z-depth), which is what project() returns
// and what Frame depth maps store.

#include "nova/common.hpp"

#include <algorithm>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace nova {

struct SE3 {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static SE3 identity() { return {}; }

    static SE3 from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& translation = Vec3::Zero()) {
        SE3 out;
        if (angle_rad != 0.0) {
            out.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
        }
        out.translation = translation;
        return out;
    }

    Vec3 apply(const Vec3& point) const { return rotation * point + translation; }
    Vec3 rotate(const Vec3& direction) const { return rotation * direction; }

    SE3 inverse() const {
        SE3 out;
        out.rotation = rotation.transpose();
        out.translation = -(out.rotation * translation);
        return out;
    }

    // Largest entry of |RᵀR - I|.
    double orthonormality_error() const {
        return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    }

    bool is_valid(double tolerance = 1e-6) const {
        return rotation.allFinite() && translation.allFinite() && orthonormality_error() < tolerance &&
               rotation.determinant() > 0.0;
    }

    // Rotation angle in radians.
    double angle() const {
        const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
        return std::acos(c);
    }
};

// a ∘ b: apply b first, then a.
inline SE3 compose(const SE3& a, const SE3& b) {
    SE3 out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

struct Pixel {
    int x = 0;  // column
    int y = 0;  // row
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = -Vec3::UnitZ();
    double near = 0.0;
    double far = 1.0;

    Vec3 at(double t) const { return origin + t * direction; }
};

struct RayBounds {
    double near = 1.0;
    double far = 6.0;
};

struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;
    SE3 pose;  // camera-to-world

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) {
            throw UsageError("camera focal lengths must be positive");
        }
        if (width < 1 || height < 1) {
            throw UsageError("camera image size must be at least 1x1");
        }
        if (!std::isfinite(cx) || !std::isfinite(cy)) {
            throw UsageError("camera principal point must be finite");
        }
        if (!pose.is_valid(1e-6)) {
            throw UsageError("camera pose rotation is not a proper orthonormal matrix");
        }
    }

    Vec3 center() const { return pose.translation; }

    // Unit direction, in the camera frame, through continuous image coordinate (u, v).
    Vec3 camera_direction(double u, double v) const {
        return Vec3((u - cx) / fx, -(v - cy) / fy, -1.0).normalized();
    }

    bool contains(const Pixel& p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

inline Ray pixel_ray(const Camera& camera, const Pixel& pixel, const RayBounds& bounds) {
    Ray ray;
    ray.origin = camera.pose.translation;
    ray.direction = camera.pose.rotate(camera.camera_direction(pixel.x + 0.5, pixel.y + 0.5)).normalized();
    ray.near = bounds.near;
    ray.far = bounds.far;
    return ray;
}

// One ray per requested pixel (row-major over the whole image when no subset is given).
inline std::vector<Ray> generate_rays(const Camera& camera, const RayBounds& bounds,
                                      std::optional<std::span<const Pixel>> pixels = std::nullopt) {
    camera.validate();
    if (!(bounds.near > 0.0) || !(bounds.near < bounds.far)) {
        throw UsageError("ray bounds must satisfy 0 < near < far");
    }
    std::vector<Ray> rays;
    if (pixels) {
        rays.reserve(pixels->size());
        for (const Pixel& p : *pixels) {
            if (!camera.contains(p)) {
                std::ostringstream msg;
                msg << "pixel (" << p.x << ", " << p.y << ") is outside the " << camera.width << "x"
                    << camera.height << " image";
                throw UsageError(msg.str());
            }
            rays.push_back(pixel_ray(camera, p, bounds));
        }
        return rays;
    }
    rays.reserve(camera.pixel_count());
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            rays.push_back(pixel_ray(camera, {x, y}, bounds));
        }
    }
    return rays;
}

struct Projection {
    Vec2 pixel;    // continuous (u, v)
    double depth;  // along the optical axis
};

inline Projection project(const Vec3& point, const Camera& camera) {
    const Vec3 local = camera.pose.rotation.transpose() * (point - camera.pose.translation);
    const double depth = -local.z();
    if (!(depth > 0.0)) {
        throw DataError("point is behind camera");
    }
    return {Vec2(camera.cx + camera.fx * local.x() / depth, camera.cy - camera.fy * local.y() / depth), depth};
}

// Inverse of project(): the world point seen at continuous (u, v) with the given z-depth.
inline Vec3 unproject(const Camera& camera, double u, double v, double depth) {
    const Vec3 local((u - camera.cx) / camera.fx * depth, -(v - camera.cy) / camera.fy * depth, -depth);
    return camera.pose.apply(local);
}

// Camera looking from `eye` toward `target` with `up` roughly vertical.
inline SE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY()) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 true_up = right.cross(forward);
    SE3 pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = true_up;
    pose.rotation.col(2) = -forward;
    pose.translation = eye;
    return pose;
}

// Uniform direction on the unit sphere.
template <class Rng>
Vec3 sample_unit_vector(Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double z = 2.0 * uniform(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * uniform(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

// Random rigid shift of a camera: translation uniform in the ball of radius
// max_translation (world frame) and a rotation about the camera center by an
// angle uniform in [0, max_rotation_deg] around a uniformly distributed axis.
// Intrinsics are untouched. Deterministic in rng_seed.
inline Camera perturb_camera(const Camera& camera, double max_translation, double max_rotation_deg,
                             std::uint64_t rng_seed) {
    if (!(max_translation >= 0.0)) {
        throw UsageError("max_translation must be non-negative");
    }
    if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 45.0)) {
        throw UsageError("max_rotation_deg must be in [0, 45]");
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const Vec3 shift_dir = sample_unit_vector(rng);
    const double shift = max_translation * std::cbrt(uniform(rng));
    const Vec3 axis = sample_unit_vector(rng);
    const double angle = max_rotation_deg * std::numbers::pi / 180.0 * uniform(rng);

    Camera out = camera;
    if (max_translation > 0.0) {
        out.pose.translation = camera.pose.translation + shift * shift_dir;
    }
    if (angle > 0.0) {
        out.pose.rotation = camera.pose.rotation * Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    }
    return out;
}

}  // namespace nova
