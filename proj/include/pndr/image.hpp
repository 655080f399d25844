#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pndr/error.hpp"

namespace pndr {

/// Dense H x W x C grid, channels innermost.
template <class T>
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, T fill = T{})
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height < 0 || width < 0 || channels < 0) {
            throw InvalidArgument("image dimensions must be non-negative");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    const T& at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
    T* pixel(std::size_t p) { return data_.data() + p * channels_; }
    const T* pixel(std::size_t p) const { return data_.data() + p * channels_; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    bool same_shape(int h, int w) const { return h == height_ && w == width_; }
    template <class U>
    bool same_extent(const Image<U>& o) const { return o.height() == height_ && o.width() == width_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageI = Image<std::int32_t>;
using Mask = Image<std::uint8_t>;

}  // namespace pndr
