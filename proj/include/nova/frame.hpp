#pragma once

#include "nova/geometry.hpp"
#include "nova/image.hpp"

#include <string>

namespace nova {

enum class Split { Train, Holdout, Eval };

inline const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Holdout: return "holdout";
        case Split::Eval: return "eval";
    }
    return "train";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "holdout") return Split::Holdout;
    if (s == "eval") return Split::Eval;
    throw DataError("unknown frame split '" + s + "'");
}

// One observation: image, per-object masks, z-depth, camera and normalized time.
// Depth <= 0 marks pixels without a depth value.
struct Frame {
    RgbImage rgb;
    std::vector<MaskImage> masks;
    GrayImage depth;
    Camera camera;
    double time = 0.0;
    Split split = Split::Train;

    int width() const { return camera.width; }
    int height() const { return camera.height; }

    // Index of the object covering a pixel, or -1 for static background.
    int label(int x, int y) const {
        for (std::size_t n = 0; n < masks.size(); ++n) {
            if (masks[n](x, y) != 0) {
                return static_cast<int>(n);
            }
        }
        return -1;
    }
};

}  // namespace nova
