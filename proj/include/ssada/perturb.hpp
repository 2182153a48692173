#pragma once

#include <cmath>
#include <optional>
#include <random>

#include "ssada/color.hpp"
#include "ssada/rng.hpp"
#include "ssada/tensor.hpp"

namespace ssada::perturb {

// Weak view: random resize, crop back to the original size, horizontal flip.
struct WeakParams {
    double scale_min = 1.0;
    double scale_max = 1.5;
    double flip_prob = 0.5;
};

// Strong view: photometric only, geometry untouched.
struct StrongParams {
    double brightness = 0.5;  // factor drawn from [1-s, 1+s]
    double contrast = 0.5;
    double saturation = 0.5;
    double hue_degrees = 18.0;
    double grayscale_prob = 0.2;
    double blur_prob = 0.5;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 1.5;
    double cutmix_prob = 0.5;
    double cutmix_area_min = 0.1;
    double cutmix_area_max = 0.5;
    double cutmix_aspect_min = 0.5;
    double cutmix_aspect_max = 2.0;
};

// Enough to re-apply the same geometric transform to another tensor.
struct WeakGeometry {
    int in_h = 0, in_w = 0;
    int scaled_h = 0, scaled_w = 0;
    int crop_y = 0, crop_x = 0;
    int out_h = 0, out_w = 0;
    bool flip = false;
};

namespace detail {

// source coordinate of scaled pixel i under align-corners-free resize
inline double src_coord(int i, int out_dim, int in_dim) {
    return (double(i) + 0.5) * double(in_dim) / double(out_dim) - 0.5;
}

inline int nearest_index(int i, int out_dim, int in_dim) {
    int v = int(std::lround(src_coord(i, out_dim, in_dim)));
    return std::clamp(v, 0, in_dim - 1);
}

} // namespace detail

inline WeakGeometry sample_weak_geometry(int h, int w, const WeakParams& p,
                                         std::mt19937_64& rng) {
    WeakGeometry g;
    g.in_h = h;
    g.in_w = w;
    const double s = uniform(rng, p.scale_min, p.scale_max);
    g.scaled_h = std::max(h, int(std::lround(h * s)));
    g.scaled_w = std::max(w, int(std::lround(w * s)));
    g.out_h = h;
    g.out_w = w;
    g.crop_y = g.scaled_h > h ? int(uniform_index(rng, size_t(g.scaled_h - h + 1))) : 0;
    g.crop_x = g.scaled_w > w ? int(uniform_index(rng, size_t(g.scaled_w - w + 1))) : 0;
    g.flip = uniform01(rng) < p.flip_prob;
    return g;
}

// Bilinear resize, then crop, then flip.
template <typename T>
TensorT<T> apply_geometry_to_image(const TensorT<T>& img, const WeakGeometry& g) {
    if (img.height != g.in_h || img.width != g.in_w)
        throw contract_error("apply_geometry_to_image: shape mismatch");
    TensorT<T> out(img.channels, g.out_h, g.out_w);
    for (int c = 0; c < img.channels; ++c) {
        const T* src = img.chan(c);
        T* dst = out.chan(c);
        for (int y = 0; y < g.out_h; ++y) {
            const double sy = detail::src_coord(g.crop_y + y, g.scaled_h, g.in_h);
            const int y0 = std::clamp(int(std::floor(sy)), 0, g.in_h - 1);
            const int y1 = std::min(y0 + 1, g.in_h - 1);
            const double fy = std::clamp(sy - y0, 0.0, 1.0);
            for (int x = 0; x < g.out_w; ++x) {
                const int xx = g.flip ? g.out_w - 1 - x : x;
                const double sx = detail::src_coord(g.crop_x + xx, g.scaled_w, g.in_w);
                const int x0 = std::clamp(int(std::floor(sx)), 0, g.in_w - 1);
                const int x1 = std::min(x0 + 1, g.in_w - 1);
                const double fx = std::clamp(sx - x0, 0.0, 1.0);
                const double v00 = src[size_t(y0) * g.in_w + x0];
                const double v01 = src[size_t(y0) * g.in_w + x1];
                const double v10 = src[size_t(y1) * g.in_w + x0];
                const double v11 = src[size_t(y1) * g.in_w + x1];
                dst[size_t(y) * g.out_w + x] =
                    T((v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy);
            }
        }
    }
    return out;
}

// Same geometry, nearest-neighbor sampling; ignore ids pass through.
inline LabelMap apply_geometry_to_label(const LabelMap& lm, const WeakGeometry& g) {
    if (lm.height != g.in_h || lm.width != g.in_w)
        throw contract_error("apply_geometry_to_label: shape mismatch");
    LabelMap out(g.out_h, g.out_w);
    for (int y = 0; y < g.out_h; ++y) {
        const int sy = detail::nearest_index(g.crop_y + y, g.scaled_h, g.in_h);
        for (int x = 0; x < g.out_w; ++x) {
            const int xx = g.flip ? g.out_w - 1 - x : x;
            const int sx = detail::nearest_index(g.crop_x + xx, g.scaled_w, g.in_w);
            out.at(y, x) = lm.at(sy, sx);
        }
    }
    return out;
}

template <typename T>
struct WeakResult {
    TensorT<T> image;
    std::optional<LabelMap> label;
    WeakGeometry geometry;
};

template <typename T>
WeakResult<T> apply_weak(const TensorT<T>& img, const LabelMap* label, const WeakParams& p,
                         std::mt19937_64& rng) {
    WeakResult<T> r;
    r.geometry = sample_weak_geometry(img.height, img.width, p, rng);
    r.image = apply_geometry_to_image(img, r.geometry);
    if (label) r.label = apply_geometry_to_label(*label, r.geometry);
    return r;
}

namespace detail {

template <typename T>
void clamp01(TensorT<T>& img) {
    for (auto& v : img.data) v = std::clamp(v, T(0), T(1));
}

template <typename T>
void gaussian_blur_inplace(TensorT<T>& img, double sigma) {
    const int radius = std::max(1, int(std::ceil(2.5 * sigma)));
    std::vector<double> kern(size_t(radius) * 2 + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kern[size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kern[size_t(i + radius)];
    }
    for (auto& k : kern) k /= sum;
    const int h = img.height, w = img.width;
    std::vector<T> tmp(size_t(h) * w);
    for (int c = 0; c < img.channels; ++c) {
        T* p = img.chan(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[size_t(i + radius)] * p[size_t(y) * w + std::clamp(x + i, 0, w - 1)];
                tmp[size_t(y) * w + x] = T(acc);
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[size_t(i + radius)] * tmp[size_t(std::clamp(y + i, 0, h - 1)) * w + x];
                p[size_t(y) * w + x] = T(acc);
            }
    }
}

} // namespace detail

// Color jitter, optional grayscale, optional gaussian blur. Geometry and
// labels are untouched; output stays in [0, 1].
template <typename T>
TensorT<T> apply_strong(const TensorT<T>& img, const StrongParams& p, std::mt19937_64& rng) {
    if (img.channels != 3) throw contract_error("apply_strong: expected RGB input");
    TensorT<T> out = img;
    const size_t plane = out.plane();

    const double fb = 1.0 + uniform(rng, -p.brightness, p.brightness);
    const double fc = 1.0 + uniform(rng, -p.contrast, p.contrast);
    const double fs = 1.0 + uniform(rng, -p.saturation, p.saturation);
    const double hue = p.hue_degrees > 0 ? uniform(rng, -p.hue_degrees, p.hue_degrees) : 0.0;
    const bool gray = uniform01(rng) < p.grayscale_prob;
    const bool blur = uniform01(rng) < p.blur_prob;
    const double sigma = uniform(rng, p.blur_sigma_min, p.blur_sigma_max);

    if (fb != 1.0)
        for (auto& v : out.data) v = T(v * fb);

    if (fc != 1.0) {
        double mean = 0.0;
        for (const auto& v : out.data) mean += v;
        mean /= double(out.data.size());
        for (auto& v : out.data) v = T((v - mean) * fc + mean);
    }

    if (fs != 1.0 || hue != 0.0) {
        T* r = out.chan(0);
        T* g = out.chan(1);
        T* b = out.chan(2);
        for (size_t i = 0; i < plane; ++i) {
            double rr = r[i], gg = g[i], bb = b[i];
            if (hue != 0.0) color::hue_rotate(rr, gg, bb, hue);
            if (fs != 1.0) {
                const double l = 0.299 * rr + 0.587 * gg + 0.114 * bb;
                rr = l + (rr - l) * fs;
                gg = l + (gg - l) * fs;
                bb = l + (bb - l) * fs;
            }
            r[i] = T(rr);
            g[i] = T(gg);
            b[i] = T(bb);
        }
    }

    if (gray) {
        T* r = out.chan(0);
        T* g = out.chan(1);
        T* b = out.chan(2);
        for (size_t i = 0; i < plane; ++i) {
            const T l = T(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
            r[i] = g[i] = b[i] = l;
        }
    }

    detail::clamp01(out);
    if (blur && p.blur_prob > 0.0) detail::gaussian_blur_inplace(out, std::max(1e-3, sigma));
    detail::clamp01(out);
    return out;
}

struct CutmixBox {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0; // half-open

    bool empty() const { return y1 <= y0 || x1 <= x0; }
    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};

inline CutmixBox sample_cutmix_box(int h, int w, const StrongParams& p, std::mt19937_64& rng) {
    const double area = uniform(rng, p.cutmix_area_min, p.cutmix_area_max) * h * w;
    if (area < 1.0) return {};
    const double aspect = uniform(rng, p.cutmix_aspect_min, p.cutmix_aspect_max);
    int bw = std::clamp(int(std::lround(std::sqrt(area * aspect))), 1, w);
    int bh = std::clamp(int(std::lround(std::sqrt(area / aspect))), 1, h);
    CutmixBox box;
    box.y0 = int(uniform_index(rng, size_t(h - bh + 1)));
    box.x0 = int(uniform_index(rng, size_t(w - bw + 1)));
    box.y1 = box.y0 + bh;
    box.x1 = box.x0 + bw;
    return box;
}

template <typename T>
struct CutmixResult {
    TensorT<T> image;
    LabelMap label;
    CutmixBox box;
};

// Pastes the box region of b into a; labels (including ignore pixels) follow
// the same mask.
template <typename T>
CutmixResult<T> cutmix(const TensorT<T>& image_a, const TensorT<T>& image_b,
                       const LabelMap& label_a, const LabelMap& label_b, const CutmixBox& box) {
    if (!image_a.same_shape(image_b) || label_a.height != label_b.height ||
        label_a.width != label_b.width || image_a.height != label_a.height ||
        image_a.width != label_a.width)
        throw contract_error("cutmix: shape mismatch");
    CutmixResult<T> r{image_a, label_a, box};
    if (box.empty()) return r;
    for (int c = 0; c < image_a.channels; ++c) {
        const T* src = image_b.chan(c);
        T* dst = r.image.chan(c);
        for (int y = box.y0; y < box.y1; ++y)
            for (int x = box.x0; x < box.x1; ++x)
                dst[size_t(y) * image_a.width + x] = src[size_t(y) * image_a.width + x];
    }
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x) r.label.at(y, x) = label_b.at(y, x);
    return r;
}

} // namespace ssada::perturb
