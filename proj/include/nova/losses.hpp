#pragma once

// Training objectives. Every loss is a normalized sum so that weights are
// independent of batch size and resolution:
//
//   recon  reference-view color MSE over rays and channels
//   nvm    novel-view mask squared error, mean over (field, valid ray)
//   nvcn   per-field color error on pixels the field is responsible for,
//          mean over supervised (field, ray) pairs
//   nvcf   novel-view composed color MSE over valid rays and channels
//   nvb    mean over (ray, sample) of |Σ_n β - 1|
//   nva    Σ_k |α| on rays outside each field's mask, mean over such pairs
//
// The *_sum functions in `terms` return the unnormalized sum and accumulate
// scale * d(sum)/d(input) into an optional gradient view; the public loss
// functions divide by their own count. Batched training uses the sums directly
// with counts taken over the whole batch.

#include "nova/common.hpp"

#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

namespace nova {

struct LossValue {
    double value = 0.0;
    double count = 0.0;
};

namespace terms {

inline void require(bool ok, const char* message) {
    if (!ok) throw UsageError(message);
}

inline double valid_count(std::span<const std::uint8_t> validity) {
    double n = 0.0;
    for (auto v : validity) n += v != 0 ? 1.0 : 0.0;
    return n;
}

inline double sq_sum(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const std::uint8_t> validity,
                     std::span<Vec3> grad, double scale) {
    require(pred.size() == gt.size(), "color loss: prediction and ground truth differ in ray count");
    require(validity.empty() || validity.size() == pred.size(), "color loss: validity has wrong length");
    require(grad.empty() || grad.size() == pred.size(), "color loss: gradient has wrong length");
    double sum = 0.0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (!validity.empty() && validity[r] == 0) continue;
        const Vec3 diff = pred[r] - gt[r];
        sum += diff.squaredNorm();
        if (!grad.empty()) grad[r] += (2.0 * scale) * diff;
    }
    return sum;
}

inline double recon_sum(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<Vec3> grad = {},
                        double scale = 1.0) {
    return sq_sum(pred, gt, {}, grad, scale);
}

inline double nvcf_sum(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const std::uint8_t> validity,
                       std::span<Vec3> grad = {}, double scale = 1.0) {
    return sq_sum(pred, gt, validity, grad, scale);
}

inline double nvm_sum(FieldRayView<const double> pred, FieldRayView<const double> gt,
                      std::span<const std::uint8_t> validity, FieldRayView<double> grad = {}, double scale = 1.0) {
    require(pred.fields() == gt.fields() && pred.rays() == gt.rays(), "mask loss: shape mismatch");
    require(validity.size() == pred.rays(), "mask loss: validity has wrong length");
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.fields(); ++n) {
        for (std::size_t r = 0; r < pred.rays(); ++r) {
            if (validity[r] == 0) continue;
            const double diff = pred(n, r) - gt(n, r);
            sum += diff * diff;
            if (!grad.empty()) grad(n, r) += 2.0 * scale * diff;
        }
    }
    return sum;
}

inline double nvm_count(std::size_t fields, std::span<const std::uint8_t> validity) {
    return static_cast<double>(fields) * valid_count(validity);
}

inline double nvcn_sum(FieldRayView<const Vec3> pred, std::span<const Vec3> gt, FieldRayView<const double> mask,
                       std::span<const std::uint8_t> validity, FieldRayView<Vec3> grad = {}, double scale = 1.0) {
    require(pred.fields() == mask.fields() && pred.rays() == mask.rays(), "per-field color loss: shape mismatch");
    require(gt.size() == pred.rays() && validity.size() == pred.rays(), "per-field color loss: ray count mismatch");
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.fields(); ++n) {
        for (std::size_t r = 0; r < pred.rays(); ++r) {
            const double w = mask(n, r) * (validity[r] != 0 ? 1.0 : 0.0);
            if (w == 0.0) continue;
            const Vec3 diff = pred(n, r) - gt[r];
            sum += w * diff.squaredNorm();
            if (!grad.empty()) grad(n, r) += (2.0 * scale * w) * diff;
        }
    }
    return sum;
}

inline double nvcn_count(FieldRayView<const double> mask, std::span<const std::uint8_t> validity) {
    double count = 0.0;
    for (std::size_t n = 0; n < mask.fields(); ++n) {
        for (std::size_t r = 0; r < mask.rays(); ++r) {
            if (validity[r] != 0) count += mask(n, r);
        }
    }
    return count;
}

inline double nvb_sum(FieldSampleView<const double> beta, FieldSampleView<double> grad = {}, double scale = 1.0) {
    double sum = 0.0;
    for (std::size_t r = 0; r < beta.rays(); ++r) {
        for (std::size_t k = 0; k < beta.samples(); ++k) {
            double total = 0.0;
            for (std::size_t n = 0; n < beta.fields(); ++n) total += beta(n, r, k);
            const double dev = total - 1.0;
            sum += std::abs(dev);
            if (!grad.empty() && dev != 0.0) {
                const double s = dev > 0.0 ? scale : -scale;
                for (std::size_t n = 0; n < beta.fields(); ++n) grad(n, r, k) += s;
            }
        }
    }
    return sum;
}

inline double nva_sum(FieldSampleView<const double> alpha, FieldRayView<const double> mask,
                      std::span<const std::uint8_t> validity, FieldSampleView<double> grad = {}, double scale = 1.0) {
    require(alpha.fields() == mask.fields() && alpha.rays() == mask.rays(), "alpha loss: shape mismatch");
    require(validity.size() == alpha.rays(), "alpha loss: validity has wrong length");
    double sum = 0.0;
    for (std::size_t n = 0; n < alpha.fields(); ++n) {
        for (std::size_t r = 0; r < alpha.rays(); ++r) {
            const double w = (1.0 - mask(n, r)) * (validity[r] != 0 ? 1.0 : 0.0);
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < alpha.samples(); ++k) {
                const double a = alpha(n, r, k);
                sum += w * std::abs(a);
                if (!grad.empty() && a != 0.0) grad(n, r, k) += a > 0.0 ? w * scale : -w * scale;
            }
        }
    }
    return sum;
}

inline double nva_count(FieldRayView<const double> mask, std::span<const std::uint8_t> validity) {
    double count = 0.0;
    for (std::size_t n = 0; n < mask.fields(); ++n) {
        for (std::size_t r = 0; r < mask.rays(); ++r) {
            if (validity[r] != 0) count += 1.0 - mask(n, r);
        }
    }
    return count;
}

}  // namespace terms

inline LossValue loss_recon(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<Vec3> grad = {},
                            double grad_scale = 1.0) {
    const double count = 3.0 * static_cast<double>(pred.size());
    terms::require(pred.size() == gt.size(), "reconstruction loss: prediction and ground truth differ in ray count");
    if (count == 0.0) throw UsageError("reconstruction loss: no rays");
    return {terms::recon_sum(pred, gt, grad, grad_scale / count) / count, count};
}

inline LossValue loss_nvm(FieldRayView<const double> pred, FieldRayView<const double> gt,
                          std::span<const std::uint8_t> validity, FieldRayView<double> grad = {},
                          double grad_scale = 1.0) {
    terms::require(validity.size() == pred.rays(), "mask loss: validity has wrong length");
    const double count = terms::nvm_count(pred.fields(), validity);
    if (count == 0.0) throw DataError("mask loss: no supervision available (every ray is invalid)");
    return {terms::nvm_sum(pred, gt, validity, grad, grad_scale / count) / count, count};
}

inline LossValue loss_nvcn(FieldRayView<const Vec3> pred, std::span<const Vec3> gt, FieldRayView<const double> mask,
                           std::span<const std::uint8_t> validity, FieldRayView<Vec3> grad = {},
                           double grad_scale = 1.0) {
    terms::require(validity.size() == mask.rays(), "per-field color loss: validity has wrong length");
    const double count = terms::nvcn_count(mask, validity);
    if (count == 0.0) return {0.0, 0.0};
    return {terms::nvcn_sum(pred, gt, mask, validity, grad, grad_scale / count) / count, count};
}

inline LossValue loss_nvcf(std::span<const Vec3> pred, std::span<const Vec3> gt, std::span<const std::uint8_t> validity,
                           std::span<Vec3> grad = {}, double grad_scale = 1.0) {
    terms::require(validity.size() == pred.size(), "full color loss: validity has wrong length");
    const double count = 3.0 * terms::valid_count(validity);
    if (count == 0.0) throw DataError("full color loss: no supervision available (every ray is invalid)");
    return {terms::nvcf_sum(pred, gt, validity, grad, grad_scale / count) / count, count};
}

inline LossValue loss_nvb(FieldSampleView<const double> beta, FieldSampleView<double> grad = {},
                          double grad_scale = 1.0) {
    const double count = static_cast<double>(beta.rays() * beta.samples());
    if (count == 0.0) return {0.0, 0.0};
    return {terms::nvb_sum(beta, grad, grad_scale / count) / count, count};
}

inline LossValue loss_nva(FieldSampleView<const double> alpha, FieldRayView<const double> mask,
                          std::span<const std::uint8_t> validity, FieldSampleView<double> grad = {},
                          double grad_scale = 1.0) {
    terms::require(validity.size() == mask.rays(), "alpha loss: validity has wrong length");
    const double count = terms::nva_count(mask, validity);
    if (count == 0.0) return {0.0, 0.0};
    return {terms::nva_sum(alpha, mask, validity, grad, grad_scale / count) / count, count};
}

// ---------------------------------------------------------------------------

struct LossWeights {
    double recon = 1.0;
    double nvm = 0.1;
    double nvcn = 0.1;
    double nvcf = 0.1;
    double nvb = 0.01;
    double nva = 0.01;

    void validate() const {
        const double all[] = {recon, nvm, nvcn, nvcf, nvb, nva};
        bool any = false;
        for (double w : all) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw UsageError("loss weights must be finite and non-negative");
            any = any || w > 0.0;
        }
        if (!any) throw UsageError("at least one loss weight must be positive");
    }

    bool novel_view_enabled() const { return nvm > 0.0 || nvcn > 0.0 || nvcf > 0.0 || nvb > 0.0 || nva > 0.0; }

    // Weight applied to a named term. The reference-view mask term shares the mask weight.
    double for_term(const std::string& name) const {
        if (name == "recon") return recon;
        if (name == "nvm" || name == "ref_mask") return nvm;
        if (name == "nvcn") return nvcn;
        if (name == "nvcf") return nvcf;
        if (name == "nvb") return nvb;
        if (name == "nva") return nva;
        throw UsageError("unknown loss term '" + name + "'");
    }
};

struct LossTerm {
    std::string name;
    double value = 0.0;   // pre-weight
    double count = 0.0;   // supervised pixels / pairs / samples
    double weight = 0.0;
};

struct LossReport {
    std::vector<LossTerm> terms;
    double total = 0.0;

    const LossTerm* find(const std::string& name) const {
        for (const auto& t : terms) {
            if (t.name == name) return &t;
        }
        return nullptr;
    }

    double value(const std::string& name) const {
        const auto* t = find(name);
        return t != nullptr ? t->value : 0.0;
    }

    void add(const std::string& name, const LossValue& v) { terms.push_back({name, v.value, v.count, 0.0}); }

    // One JSON record per training step.
    std::string to_log_line(std::int64_t step) const {
        nlohmann::ordered_json j;
        j["step"] = step;
        for (const auto& t : terms) {
            j[t.name] = t.value;
            j[t.name + "_count"] = t.count;
        }
        j["total"] = total;
        return j.dump();
    }
};

// Merges the reference-pass and novel-pass terms and applies the weights.
inline LossReport total_loss(const LossReport& reference, const LossReport& novel, const LossWeights& weights) {
    LossReport out;
    for (const auto* part : {&reference, &novel}) {
        for (LossTerm t : part->terms) {
            t.weight = weights.for_term(t.name);
            out.total += t.weight * t.value;
            out.terms.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace nova
