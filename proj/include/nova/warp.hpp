#pragma once

// Depth-based forward warping of frame supervision to a novel camera.
//
// Every source pixel that has a depth is lifted to 3D through its pixel
// center, projected into the novel camera and splatted onto the destination
// pixel containing the projection. Collisions are resolved with a z-buffer in
// the novel camera (nearest wins; on exact ties the first source pixel in
// row-major order wins). Destination pixels that receive no splat are holes
// and are marked invalid rather than filled.

#include "nova/frame.hpp"

#include <limits>
#include <optional>

namespace nova {

struct WarpResult {
    MaskImage mask;      // 1 where the selected object wins the z-test
    MaskImage validity;  // 1 where any splat landed
    std::optional<RgbImage> rgb;
};

// Whole-frame warp: validity plus one mask per object, carried RGB and novel-view depth.
struct FrameWarp {
    MaskImage validity;
    std::vector<MaskImage> masks;
    RgbImage rgb;
    GrayImage depth;

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : validity.data()) n += v != 0;
        return n;
    }
};

namespace detail {

struct SplatBuffer {
    Image<double> zbuffer;
    Image<std::int64_t> source;  // row-major source pixel index, -1 if empty
};

inline bool has_depth(double d) { return std::isfinite(d) && d > 0.0; }

inline SplatBuffer splat(const Frame& source, const Camera& novel) {
    novel.validate();
    SplatBuffer buf{Image<double>(novel.width, novel.height, 1, std::numeric_limits<double>::infinity()),
                    Image<std::int64_t>(novel.width, novel.height, 1, -1)};
    const Mat3 world_to_novel = novel.pose.rotation.transpose();
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const double d = source.depth(x, y);
            if (!has_depth(d)) {
                continue;
            }
            const Vec3 world = unproject(source.camera, x + 0.5, y + 0.5, d);
            const Vec3 local = world_to_novel * (world - novel.pose.translation);
            const double z = -local.z();
            if (!(z > 0.0)) {
                continue;
            }
            const double u = novel.cx + novel.fx * local.x() / z;
            const double v = novel.cy - novel.fy * local.y() / z;
            if (!(u >= 0.0 && v >= 0.0 && u < novel.width && v < novel.height)) {
                continue;
            }
            const int dx = static_cast<int>(std::floor(u));
            const int dy = static_cast<int>(std::floor(v));
            if (z < buf.zbuffer(dx, dy)) {
                buf.zbuffer(dx, dy) = z;
                buf.source(dx, dy) = static_cast<std::int64_t>(y) * source.width() + x;
            }
        }
    }
    return buf;
}

}  // namespace detail

inline FrameWarp warp_frame_to_novel_view(const Frame& source, const Camera& novel_camera) {
    const auto buf = detail::splat(source, novel_camera);
    FrameWarp out;
    out.validity = MaskImage(novel_camera.width, novel_camera.height);
    out.masks.assign(source.masks.size(), MaskImage(novel_camera.width, novel_camera.height));
    out.rgb = RgbImage(novel_camera.width, novel_camera.height, 3);
    out.depth = GrayImage(novel_camera.width, novel_camera.height);
    for (int y = 0; y < novel_camera.height; ++y) {
        for (int x = 0; x < novel_camera.width; ++x) {
            const std::int64_t s = buf.source(x, y);
            if (s < 0) {
                continue;
            }
            const int sx = static_cast<int>(s % source.width());
            const int sy = static_cast<int>(s / source.width());
            out.validity(x, y) = 1;
            out.depth(x, y) = buf.zbuffer(x, y);
            if (!source.rgb.empty()) {
                set_rgb(out.rgb, x, y, rgb_at(source.rgb, sx, sy));
            }
            const int label = source.label(sx, sy);
            if (label >= 0) {
                out.masks[static_cast<std::size_t>(label)](x, y) = 1;
            }
        }
    }
    return out;
}

inline WarpResult warp_to_novel_view(const Frame& source, std::size_t object_index, const Camera& novel_camera,
                                     bool include_rgb) {
    if (object_index >= source.masks.size()) {
        throw UsageError("object index " + std::to_string(object_index) + " out of range (frame has " +
                         std::to_string(source.masks.size()) + " object masks)");
    }
    const MaskImage& mask = source.masks[object_index];
    std::size_t missing = 0;
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            if (mask(x, y) != 0 && !detail::has_depth(source.depth(x, y))) {
                ++missing;
            }
        }
    }
    if (missing > 0) {
        throw DataError("missing depth under object mask at " + std::to_string(missing) + " pixel(s)");
    }

    FrameWarp full = warp_frame_to_novel_view(source, novel_camera);
    WarpResult out;
    out.mask = std::move(full.masks[object_index]);
    out.validity = std::move(full.validity);
    if (include_rgb) {
        out.rgb = std::move(full.rgb);
    }
    return out;
}

}  // namespace nova
