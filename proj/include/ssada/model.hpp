#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ssada/nn.hpp"

namespace ssada::seg {

struct SegModelConfig {
    int num_classes = 6;
    int base_channels = 16;
    int depth = 3;
    double feature_dropout_rate = 0.5;

    bool operator==(const SegModelConfig&) const = default;
};

inline void validate(const SegModelConfig& cfg) {
    if (cfg.num_classes < 2) throw validation_error("model: num_classes must be >= 2");
    if (cfg.depth < 1) throw validation_error("model: depth must be >= 1");
    if (cfg.base_channels < 1) throw validation_error("model: base_channels must be >= 1");
    if (cfg.feature_dropout_rate < 0.0 || cfg.feature_dropout_rate >= 1.0)
        throw validation_error("model: feature_dropout_rate must be in [0, 1)");
}

template <typename T>
struct ModelGrad {
    std::vector<nn::ConvGrad<T>> enc;
    std::vector<nn::ConvGrad<T>> dec;
    nn::ConvGrad<T> head;

    void add(const ModelGrad& o) {
        auto axpy = [](std::vector<T>& a, const std::vector<T>& b) {
            if (a.size() != b.size()) a.assign(b.size(), T(0));
            for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
        };
        enc.resize(o.enc.size());
        dec.resize(o.dec.size());
        for (size_t i = 0; i < o.enc.size(); ++i) {
            axpy(enc[i].dw, o.enc[i].dw);
            axpy(enc[i].db, o.enc[i].db);
        }
        for (size_t i = 0; i < o.dec.size(); ++i) {
            axpy(dec[i].dw, o.dec[i].dw);
            axpy(dec[i].db, o.dec[i].db);
        }
        axpy(head.dw, o.head.dw);
        axpy(head.db, o.head.db);
    }
};

// Stride-2 conv encoder, mirrored transposed-conv decoder, 1x1 classifier
// head, per-pixel softmax. Channel dropout at the encoder/decoder boundary
// provides the feature-perturbed branch.
template <typename T>
struct SegModelT {
    SegModelConfig cfg;
    std::vector<nn::Conv2d<T>> enc;
    std::vector<nn::ConvTranspose2d<T>> dec;
    nn::Conv2d<T> head;

    SegModelT() = default;

    explicit SegModelT(const SegModelConfig& c, uint64_t init_seed = 0) : cfg(c) {
        validate(cfg);
        int in_ch = 3;
        for (int i = 0; i < cfg.depth; ++i) {
            const int out_ch = cfg.base_channels << i;
            enc.emplace_back(in_ch, out_ch, 3, 2, 1);
            in_ch = out_ch;
        }
        for (int i = cfg.depth - 1; i >= 0; --i) {
            const int out_ch = i > 0 ? (cfg.base_channels << (i - 1)) : cfg.base_channels;
            dec.emplace_back(cfg.base_channels << i, out_ch, 3, 2, 1, 1);
        }
        head = nn::Conv2d<T>(cfg.base_channels, cfg.num_classes, 1, 1, 0);
        auto rng = rng_for(init_seed, "model_init");
        for (auto& l : enc) l.init_kaiming(rng);
        for (auto& l : dec) l.init_kaiming(rng);
        head.init_kaiming(rng);
    }

    struct Trace {
        TensorT<T> input;
        std::vector<TensorT<T>> enc_out;  // post-relu
        TensorT<T> bottleneck;            // after optional channel dropout
        std::vector<char> keep;           // dropout mask
        bool perturbed = false;
        std::vector<TensorT<T>> dec_out;  // post-relu
        TensorT<T> prob;
    };

    void check_input(const TensorT<T>& x) const {
        if (x.channels != 3) throw contract_error("model: input must have 3 channels");
        const int div = 1 << cfg.depth;
        if (x.height % div != 0 || x.width % div != 0)
            throw contract_error("model: input dims must be divisible by 2^depth");
    }

    // feature_perturb requires an rng; trace may be null for inference.
    TensorT<T> forward(const TensorT<T>& x, bool feature_perturb, std::mt19937_64* rng,
                       Trace* trace, nn::Workspace<T>& ws) const {
        check_input(x);
        if (trace) {
            trace->input = x;
            trace->enc_out.clear();
            trace->dec_out.clear();
            trace->perturbed = false;
        }
        TensorT<T> h = x;
        for (const auto& l : enc) {
            h = l.forward(h, ws);
            nn::relu_inplace(h);
            if (trace) trace->enc_out.push_back(h);
        }
        if (feature_perturb) {
            if (!rng) throw contract_error("model: feature_perturb needs an rng");
            auto keep = nn::channel_dropout_inplace(h, cfg.feature_dropout_rate, *rng);
            if (trace) {
                trace->keep = std::move(keep);
                trace->perturbed = true;
            }
        }
        if (trace) trace->bottleneck = h;
        for (const auto& l : dec) {
            h = l.forward(h, ws);
            nn::relu_inplace(h);
            if (trace) trace->dec_out.push_back(h);
        }
        TensorT<T> logits = head.forward(h, ws);
        TensorT<T> prob = nn::softmax_channels(logits);
        if (trace) trace->prob = prob;
        return prob;
    }

    TensorT<T> infer(const TensorT<T>& x, nn::Workspace<T>& ws) const {
        return forward(x, false, nullptr, nullptr, ws);
    }

    // dlogits is dL/d(pre-softmax logits) from the fused cross-entropy grad.
    void backward(const Trace& trace, const TensorT<T>& dlogits, ModelGrad<T>& grad,
                  nn::Workspace<T>& ws) const {
        grad.enc.resize(enc.size());
        grad.dec.resize(dec.size());
        const TensorT<T>& head_in = trace.dec_out.back();
        TensorT<T> d = head.backward(head_in, dlogits, grad.head, ws);
        for (int i = int(dec.size()) - 1; i >= 0; --i) {
            nn::relu_backward_inplace(trace.dec_out[i], d);
            const TensorT<T>& in = i > 0 ? trace.dec_out[i - 1] : trace.bottleneck;
            d = dec[i].backward(in, d, grad.dec[i], ws);
        }
        if (trace.perturbed)
            nn::channel_dropout_backward_inplace(trace.keep, cfg.feature_dropout_rate, d);
        for (int i = int(enc.size()) - 1; i >= 0; --i) {
            nn::relu_backward_inplace(trace.enc_out[i], d);
            const TensorT<T>& in = i > 0 ? trace.enc_out[i - 1] : trace.input;
            d = enc[i].backward(in, d, grad.enc[i], ws);
        }
    }

    std::vector<std::span<T>> param_views() {
        std::vector<std::span<T>> v;
        for (auto& l : enc) {
            v.emplace_back(l.w);
            v.emplace_back(l.b);
        }
        for (auto& l : dec) {
            v.emplace_back(l.w);
            v.emplace_back(l.b);
        }
        v.emplace_back(head.w);
        v.emplace_back(head.b);
        return v;
    }

    std::vector<std::span<const T>> grad_views(const ModelGrad<T>& g) const {
        std::vector<std::span<const T>> v;
        for (auto& l : g.enc) {
            v.emplace_back(l.dw);
            v.emplace_back(l.db);
        }
        for (auto& l : g.dec) {
            v.emplace_back(l.dw);
            v.emplace_back(l.db);
        }
        v.emplace_back(g.head.dw);
        v.emplace_back(g.head.db);
        return v;
    }
};

// SGD with momentum and coupled weight decay; linear learning-rate warm-up
// over the first warmup_iters iterations.
template <typename T>
struct Sgd {
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int warmup_iters = 100;
    long iteration = 0;
    std::vector<std::vector<T>> velocity;

    double current_lr() const {
        if (warmup_iters <= 0 || iteration >= warmup_iters) return lr;
        return lr * double(iteration + 1) / double(warmup_iters);
    }

    void step(SegModelT<T>& model, const ModelGrad<T>& grad) {
        auto params = model.param_views();
        auto grads = model.grad_views(grad);
        if (velocity.empty()) {
            velocity.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) velocity[i].assign(params[i].size(), T(0));
        }
        const T step_lr = T(current_lr());
        const T mu = T(momentum);
        const T wd = T(weight_decay);
        for (size_t i = 0; i < params.size(); ++i) {
            auto p = params[i];
            auto g = grads[i];
            auto& v = velocity[i];
            for (size_t j = 0; j < p.size(); ++j) {
                const T gj = (j < g.size() ? g[j] : T(0)) + wd * p[j];
                v[j] = mu * v[j] + gj;
                p[j] -= step_lr * v[j];
            }
        }
        ++iteration;
    }
};

using SegModel = SegModelT<float>;

// ---- checkpoint container ---------------------------------------------
// Layout: magic, little-endian u32 header length, JSON header, raw scalar
// blobs for parameters then velocity. Reloading reproduces forward outputs
// bit for bit.

namespace detail {
inline void write_blob(std::ofstream& out, const void* p, size_t bytes) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(bytes));
}
inline void read_blob(std::ifstream& in, void* p, size_t bytes) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(bytes));
    if (!in) throw io_error("checkpoint: truncated file");
}
} // namespace detail

struct CheckpointMeta {
    SegModelConfig config;
    long iteration = 0;
    int epoch = 0; // last completed epoch
};

void save_checkpoint(const std::filesystem::path& path, const SegModel& model,
                     const Sgd<float>& opt, int epoch);
CheckpointMeta load_checkpoint(const std::filesystem::path& path, SegModel& model,
                               Sgd<float>* opt);

} // namespace ssada::seg
