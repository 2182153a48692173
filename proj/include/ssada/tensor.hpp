#pragma once

#include <cstdint>
#include <vector>

#include "ssada/errors.hpp"

namespace ssada {

// Dense CHW tensor. Probability maps, images and feature planes all use this;
// training runs on float, tests instantiate double where precision matters.
template <typename T>
struct TensorT {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data; // CHW, row-major within a channel

    TensorT() = default;
    TensorT(int c, int h, int w) : channels(c), height(h), width(w), data(size_t(c) * h * w, T(0)) {}

    size_t plane() const { return size_t(height) * width; }
    size_t size() const { return data.size(); }

    T& at(int c, int y, int x) { return data[(size_t(c) * height + y) * width + x]; }
    const T& at(int c, int y, int x) const { return data[(size_t(c) * height + y) * width + x]; }

    T* chan(int c) { return data.data() + size_t(c) * plane(); }
    const T* chan(int c) const { return data.data() + size_t(c) * plane(); }

    bool same_shape(const TensorT& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

// Per-pixel class ids. 255 is the ignore sentinel shared with the label PNGs.
struct LabelMap {
    static constexpr uint8_t kIgnore = 255;

    int height = 0;
    int width = 0;
    std::vector<uint8_t> ids;

    LabelMap() = default;
    LabelMap(int h, int w, uint8_t fill = 0) : height(h), width(w), ids(size_t(h) * w, fill) {}

    size_t size() const { return ids.size(); }
    uint8_t& at(int y, int x) { return ids[size_t(y) * width + x]; }
    uint8_t at(int y, int x) const { return ids[size_t(y) * width + x]; }
};

// Interleaved 8-bit RGB, the on-disk image format.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb; // H*W*3

    ImageU8() = default;
    ImageU8(int h, int w) : height(h), width(w), rgb(size_t(h) * w * 3, 0) {}

    uint8_t* px(int y, int x) { return rgb.data() + (size_t(y) * width + x) * 3; }
    const uint8_t* px(int y, int x) const { return rgb.data() + (size_t(y) * width + x) * 3; }
};

template <typename T>
TensorT<T> to_tensor(const ImageU8& img) {
    TensorT<T> t(3, img.height, img.width);
    for (int c = 0; c < 3; ++c) {
        T* dst = t.chan(c);
        const uint8_t* src = img.rgb.data() + c;
        const size_t count = size_t(img.height) * img.width;
        for (size_t i = 0; i < count; ++i) dst[i] = T(src[i * 3]) / T(255);
    }
    return t;
}

template <typename T>
ImageU8 to_image_u8(const TensorT<T>& t) {
    if (t.channels != 3) throw contract_error("to_image_u8: expected 3 channels");
    ImageU8 img(t.height, t.width);
    const size_t count = t.plane();
    for (int c = 0; c < 3; ++c) {
        const T* src = t.chan(c);
        uint8_t* dst = img.rgb.data() + c;
        for (size_t i = 0; i < count; ++i) {
            T v = src[i];
            if (v < T(0)) v = T(0);
            if (v > T(1)) v = T(1);
            dst[i * 3] = uint8_t(v * T(255) + T(0.5));
        }
    }
    return img;
}

} // namespace ssada
