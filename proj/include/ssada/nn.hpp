#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "ssada/errors.hpp"
#include "ssada/rng.hpp"
#include "ssada/tensor.hpp"

namespace ssada::nn {

// Scratch buffers reused across forward/backward calls. Each worker thread
// owns one, so layer calls stay re-entrant.
template <typename T>
struct Workspace {
    std::vector<T> col;
    std::vector<T> col2;
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// col[(ci*k*k + ky*k + kx), (oy*Wo + ox)] = x[ci, oy*s - p + ky, ox*s - p + kx]
template <typename T>
void im2col(const TensorT<T>& x, int k, int stride, int pad, std::vector<T>& col) {
    const int ho = conv_out_dim(x.height, k, stride, pad);
    const int wo = conv_out_dim(x.width, k, stride, pad);
    const size_t cols = size_t(ho) * wo;
    col.assign(size_t(x.channels) * k * k * cols, T(0));
    for (int ci = 0; ci < x.channels; ++ci) {
        const T* src = x.chan(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col.data() + ((size_t(ci) * k + ky) * k + kx) * cols;
                const int x0 = -pad + kx; // input x at ox = 0
                const int ox_begin = x0 < 0 ? (stride - 1 - x0) / stride : 0;
                const int ox_end = std::min(wo, (x.width - 1 - x0) / stride + 1);
                for (int oy = 0; oy < ho; ++oy) {
                    const int y = oy * stride - pad + ky;
                    if (y < 0 || y >= x.height) continue;
                    const T* srow = src + size_t(y) * x.width + x0;
                    T* drow = dst + size_t(oy) * wo;
                    for (int ox = ox_begin; ox < ox_end; ++ox) drow[ox] = srow[ox * stride];
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const std::vector<T>& col, int channels, int h, int w, int k, int stride, int pad,
            TensorT<T>& out) {
    const int ho = conv_out_dim(h, k, stride, pad);
    const int wo = conv_out_dim(w, k, stride, pad);
    const size_t cols = size_t(ho) * wo;
    out = TensorT<T>(channels, h, w);
    for (int ci = 0; ci < channels; ++ci) {
        T* dst = out.chan(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col.data() + ((size_t(ci) * k + ky) * k + kx) * cols;
                const int x0 = -pad + kx;
                int ox_begin = x0 < 0 ? (stride - 1 - x0) / stride : 0;
                int ox_end = wo;
                while (ox_end > ox_begin && (ox_end - 1) * stride + x0 >= w) --ox_end;
                for (int oy = 0; oy < ho; ++oy) {
                    const int y = oy * stride - pad + ky;
                    if (y < 0 || y >= h) continue;
                    T* drow = dst + size_t(y) * w + x0;
                    const T* srow = src + size_t(oy) * wo;
                    for (int ox = ox_begin; ox < ox_end; ++ox)
                        drow[ox * stride] += srow[ox];
                }
            }
        }
    }
}

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
struct ConvGrad {
    std::vector<T> dw;
    std::vector<T> db;
};

// Standard convolution, square kernel. Weights laid out (Cout, Cin*k*k).
template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
    std::vector<T> w;
    std::vector<T> b;

    Conv2d() = default;
    Conv2d(int cin, int cout, int kk, int s, int p)
        : in_ch(cin), out_ch(cout), k(kk), stride(s), pad(p),
          w(size_t(cout) * cin * kk * kk, T(0)), b(cout, T(0)) {}

    void init_kaiming(std::mt19937_64& rng) {
        const double fan_in = double(in_ch) * k * k;
        const double sigma = std::sqrt(2.0 / fan_in);
        for (auto& v : w) v = T(gaussian(rng, 0.0, sigma));
        for (auto& v : b) v = T(0);
    }

    TensorT<T> forward(const TensorT<T>& x, Workspace<T>& ws) const {
        if (x.channels != in_ch) throw contract_error("Conv2d: channel mismatch");
        const int ho = conv_out_dim(x.height, k, stride, pad);
        const int wo = conv_out_dim(x.width, k, stride, pad);
        im2col(x, k, stride, pad, ws.col);
        TensorT<T> y(out_ch, ho, wo);
        const long cols = long(ho) * wo;
        const long kk = long(in_ch) * k * k;
        ConstMatMap<T> W(w.data(), out_ch, kk);
        ConstMatMap<T> C(ws.col.data(), kk, cols);
        MatMap<T> Y(y.data.data(), out_ch, cols);
        Y.noalias() = W * C;
        for (int co = 0; co < out_ch; ++co) {
            T* p = y.chan(co);
            const T bias = b[co];
            for (long i = 0; i < cols; ++i) p[i] += bias;
        }
        return y;
    }

    // x is the saved forward input; returns dx and accumulates into grad.
    TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy, ConvGrad<T>& grad,
                        Workspace<T>& ws) const {
        const long cols = long(dy.height) * dy.width;
        const long kk = long(in_ch) * k * k;
        im2col(x, k, stride, pad, ws.col);
        grad.dw.resize(w.size());
        grad.db.resize(b.size());
        ConstMatMap<T> dY(dy.data.data(), out_ch, cols);
        ConstMatMap<T> C(ws.col.data(), kk, cols);
        MatMap<T> dW(grad.dw.data(), out_ch, kk);
        dW.noalias() += dY * C.transpose();
        for (int co = 0; co < out_ch; ++co) {
            const T* p = dy.chan(co);
            T s = T(0);
            for (long i = 0; i < cols; ++i) s += p[i];
            grad.db[co] += s;
        }
        ws.col2.assign(size_t(kk) * cols, T(0));
        MatMap<T> dC(ws.col2.data(), kk, cols);
        ConstMatMap<T> W(w.data(), out_ch, kk);
        dC.noalias() = W.transpose() * dY;
        TensorT<T> dx;
        col2im(ws.col2, in_ch, x.height, x.width, k, stride, pad, dx);
        return dx;
    }
};

// Transposed convolution realized as the data-gradient of a Conv2d with the
// same kernel/stride/pad. Weights laid out (Cin, Cout*k*k).
template <typename T>
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0, out_pad = 0;
    std::vector<T> w;
    std::vector<T> b;

    ConvTranspose2d() = default;
    ConvTranspose2d(int cin, int cout, int kk, int s, int p, int op)
        : in_ch(cin), out_ch(cout), k(kk), stride(s), pad(p), out_pad(op),
          w(size_t(cin) * cout * kk * kk, T(0)), b(cout, T(0)) {}

    int out_dim(int in) const { return (in - 1) * stride - 2 * pad + k + out_pad; }

    void init_kaiming(std::mt19937_64& rng) {
        const double fan_in = double(in_ch) * k * k / double(stride * stride);
        const double sigma = std::sqrt(2.0 / fan_in);
        for (auto& v : w) v = T(gaussian(rng, 0.0, sigma));
        for (auto& v : b) v = T(0);
    }

    TensorT<T> forward(const TensorT<T>& x, Workspace<T>& ws) const {
        if (x.channels != in_ch) throw contract_error("ConvTranspose2d: channel mismatch");
        const int H = out_dim(x.height);
        const int W_ = out_dim(x.width);
        const long cols = long(x.height) * x.width;
        const long kk = long(out_ch) * k * k;
        ws.col.assign(size_t(kk) * cols, T(0));
        ConstMatMap<T> Wm(w.data(), in_ch, kk);
        ConstMatMap<T> X(x.data.data(), in_ch, cols);
        MatMap<T> C(ws.col.data(), kk, cols);
        C.noalias() = Wm.transpose() * X;
        TensorT<T> y;
        col2im(ws.col, out_ch, H, W_, k, stride, pad, y);
        const size_t plane = y.plane();
        for (int co = 0; co < out_ch; ++co) {
            T* p = y.chan(co);
            const T bias = b[co];
            for (size_t i = 0; i < plane; ++i) p[i] += bias;
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy, ConvGrad<T>& grad,
                        Workspace<T>& ws) const {
        const long cols = long(x.height) * x.width;
        const long kk = long(out_ch) * k * k;
        im2col(dy, k, stride, pad, ws.col); // geometry of the paired Conv2d
        grad.dw.resize(w.size());
        grad.db.resize(b.size());
        ConstMatMap<T> C(ws.col.data(), kk, cols);
        ConstMatMap<T> X(x.data.data(), in_ch, cols);
        MatMap<T> dW(grad.dw.data(), in_ch, kk);
        dW.noalias() += X * C.transpose();
        const size_t plane = dy.plane();
        for (int co = 0; co < out_ch; ++co) {
            const T* p = dy.chan(co);
            T s = T(0);
            for (size_t i = 0; i < plane; ++i) s += p[i];
            grad.db[co] += s;
        }
        TensorT<T> dx(in_ch, x.height, x.width);
        ConstMatMap<T> Wm(w.data(), in_ch, kk);
        MatMap<T> dX(dx.data.data(), in_ch, cols);
        dX.noalias() = Wm * C;
        return dx;
    }
};

template <typename T>
void relu_inplace(TensorT<T>& x) {
    for (auto& v : x.data)
        if (v < T(0)) v = T(0);
}

// a is the post-activation output of the forward pass.
template <typename T>
void relu_backward_inplace(const TensorT<T>& a, TensorT<T>& dy) {
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] <= T(0)) dy.data[i] = T(0);
}

// Channel dropout with inverted scaling; rate 0 is the identity.
template <typename T>
std::vector<char> channel_dropout_inplace(TensorT<T>& x, double rate, std::mt19937_64& rng) {
    std::vector<char> keep(x.channels, 1);
    if (rate <= 0.0) return keep;
    const T scale = T(1.0 / (1.0 - rate));
    const size_t plane = x.plane();
    for (int c = 0; c < x.channels; ++c) {
        if (uniform01(rng) < rate) {
            keep[c] = 0;
            T* p = x.chan(c);
            for (size_t i = 0; i < plane; ++i) p[i] = T(0);
        } else {
            T* p = x.chan(c);
            for (size_t i = 0; i < plane; ++i) p[i] *= scale;
        }
    }
    return keep;
}

template <typename T>
void channel_dropout_backward_inplace(const std::vector<char>& keep, double rate, TensorT<T>& dy) {
    if (rate <= 0.0) return;
    const T scale = T(1.0 / (1.0 - rate));
    const size_t plane = dy.plane();
    for (int c = 0; c < dy.channels; ++c) {
        T* p = dy.chan(c);
        if (keep[c]) {
            for (size_t i = 0; i < plane; ++i) p[i] *= scale;
        } else {
            for (size_t i = 0; i < plane; ++i) p[i] = T(0);
        }
    }
}

// Per-pixel softmax over channels.
template <typename T>
TensorT<T> softmax_channels(const TensorT<T>& logits) {
    TensorT<T> p(logits.channels, logits.height, logits.width);
    const size_t plane = logits.plane();
    for (size_t i = 0; i < plane; ++i) {
        T mx = logits.data[i];
        for (int c = 1; c < logits.channels; ++c)
            mx = std::max(mx, logits.data[size_t(c) * plane + i]);
        T sum = T(0);
        for (int c = 0; c < logits.channels; ++c) {
            T e = std::exp(logits.data[size_t(c) * plane + i] - mx);
            p.data[size_t(c) * plane + i] = e;
            sum += e;
        }
        const T inv = T(1) / sum;
        for (int c = 0; c < logits.channels; ++c) p.data[size_t(c) * plane + i] *= inv;
    }
    return p;
}

} // namespace ssada::nn
