#pragma once

#include "nova/image.hpp"

namespace nova {

inline constexpr double kPsnrCap = 99.0;

// 10·log10(1/MSE) for images in [0, 1]. Zero error is reported as kPsnrCap,
// and so is anything above it.
inline double psnr_from_mse(double mse) {
    if (!(mse >= 0.0)) throw NumericalError("psnr: mean squared error is not a non-negative number");
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

inline double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw UsageError("mse: sizes differ");
    if (a.empty()) throw UsageError("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

inline double psnr(const RgbImage& pred, const RgbImage& gt) {
    if (!pred.same_shape(gt)) {
        throw UsageError("psnr: shape mismatch (" + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                         "x" + std::to_string(pred.channels()) + " vs " + std::to_string(gt.width()) + "x" +
                         std::to_string(gt.height()) + "x" + std::to_string(gt.channels()) + ")");
    }
    return psnr_from_mse(mse(pred.data(), gt.data()));
}

// IoU of (pred >= 0.5) against a binary mask; two empty masks give 1.
inline double mask_iou(const GrayImage& pred, const MaskImage& gt) {
    require_same_size(pred, gt, "mask_iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < gt.data().size(); ++i) {
        const bool p = pred.data()[i] >= 0.5;
        const bool g = gt.data()[i] != 0;
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mask_iou(const MaskImage& pred, const MaskImage& gt) {
    require_same_size(pred, gt, "mask_iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < gt.data().size(); ++i) {
        const bool p = pred.data()[i] != 0;
        const bool g = gt.data()[i] != 0;
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace nova
