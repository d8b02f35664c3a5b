#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nova {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Exception hierarchy. The CLI maps each category onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline double softplus(double x) {
    // log(1 + e^x) without overflow for large x.
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// splitmix64 finalizer, used to derive independent per-item seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// [field][ray] view over flat storage.
template <class T>
class FieldRayView {
public:
    FieldRayView() = default;
    FieldRayView(std::span<T> data, std::size_t fields, std::size_t rays)
        : data_(data), fields_(fields), rays_(rays) {
        if (data.size() != fields * rays) {
            throw std::invalid_argument("FieldRayView: storage size does not match shape");
        }
    }

    T& operator()(std::size_t field, std::size_t ray) const { return data_[field * rays_ + ray]; }
    std::size_t fields() const { return fields_; }
    std::size_t rays() const { return rays_; }
    bool empty() const { return data_.empty(); }
    std::span<T> data() const { return data_; }

    operator FieldRayView<const T>() const { return {data_, fields_, rays_}; }

private:
    std::span<T> data_;
    std::size_t fields_ = 0;
    std::size_t rays_ = 0;
};

// [field][ray][sample] view over flat storage.
template <class T>
class FieldSampleView {
public:
    FieldSampleView() = default;
    FieldSampleView(std::span<T> data, std::size_t fields, std::size_t rays, std::size_t samples)
        : data_(data), fields_(fields), rays_(rays), samples_(samples) {
        if (data.size() != fields * rays * samples) {
            throw std::invalid_argument("FieldSampleView: storage size does not match shape");
        }
    }

    T& operator()(std::size_t field, std::size_t ray, std::size_t sample) const {
        return data_[(field * rays_ + ray) * samples_ + sample];
    }
    std::size_t fields() const { return fields_; }
    std::size_t rays() const { return rays_; }
    std::size_t samples() const { return samples_; }
    bool empty() const { return data_.empty(); }
    std::span<T> data() const { return data_; }

    operator FieldSampleView<const T>() const { return {data_, fields_, rays_, samples_}; }

private:
    std::span<T> data_;
    std::size_t fields_ = 0;
    std::size_t rays_ = 0;
    std::size_t samples_ = 0;
};

}  // namespace nova
