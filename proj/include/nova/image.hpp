#pragma once

#include "nova/common.hpp"

#include <sstream>

namespace nova {

// Row-major interleaved image.
template <class T>
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels = 1, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels < 1) {
            throw std::invalid_argument("Image: invalid dimensions");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

using RgbImage = Image<double>;   // 3 channels in [0, 1]
using GrayImage = Image<double>;  // 1 channel
using MaskImage = Image<std::uint8_t>;

inline Vec3 rgb_at(const RgbImage& image, int x, int y) {
    return {image(x, y, 0), image(x, y, 1), image(x, y, 2)};
}

inline void set_rgb(RgbImage& image, int x, int y, const Vec3& c) {
    image(x, y, 0) = c.x();
    image(x, y, 1) = c.y();
    image(x, y, 2) = c.z();
}

template <class A, class B>
void require_same_size(const Image<A>& a, const Image<B>& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        std::ostringstream msg;
        msg << what << ": image sizes differ (" << a.width() << "x" << a.height() << " vs " << b.width() << "x"
            << b.height() << ")";
        throw UsageError(msg.str());
    }
}

}  // namespace nova
