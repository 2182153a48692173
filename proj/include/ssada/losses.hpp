#pragma once

#include <cmath>

#include "ssada/tensor.hpp"
#include "ssada/weighting.hpp"

namespace ssada::losses {

// Probabilities are clamped here before the log so a confidently-wrong
// prediction yields a large finite loss instead of NaN.
inline constexpr double kLogEps = 1e-12;

struct PseudoLabelConfig {
    double confidence_threshold = 0.0; // c_t in [0, 1]
};

inline void validate(const PseudoLabelConfig& cfg) {
    if (cfg.confidence_threshold < 0.0 || cfg.confidence_threshold > 1.0)
        throw validation_error("confidence_threshold must be in [0, 1]");
}

// -(1/N) sum over non-ignored pixels of w[y] * log p[y], N = count of those
// pixels. All-ignored input contributes 0.
template <typename T>
double weighted_cross_entropy(const TensorT<T>& p, const LabelMap& y,
                              const weighting::ClassWeightVector& w) {
    if (p.height != y.height || p.width != y.width)
        throw contract_error("weighted_cross_entropy: shape mismatch");
    const size_t plane = p.plane();
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < plane; ++i) {
        const uint8_t cls = y.ids[i];
        if (cls == LabelMap::kIgnore) continue;
        if (cls >= p.channels) throw contract_error("weighted_cross_entropy: label out of range");
        const double pv = std::max(double(p.data[size_t(cls) * plane + i]), kLogEps);
        sum += w[cls] * std::log(pv);
        ++n;
    }
    return n == 0 ? 0.0 : -sum / double(n);
}

// Fused gradient through softmax: dL/dlogit[j] = scale * w[y]/N * (p[j] - [j==y]).
// Returns the loss value (scaled). Ignored pixels produce exactly zero grad.
template <typename T>
double weighted_ce_softmax_backward(const TensorT<T>& prob, const LabelMap& y,
                                    const weighting::ClassWeightVector& w, double scale,
                                    TensorT<T>& dlogits) {
    if (prob.height != y.height || prob.width != y.width)
        throw contract_error("weighted_ce_softmax_backward: shape mismatch");
    const size_t plane = prob.plane();
    size_t n = 0;
    for (size_t i = 0; i < plane; ++i)
        if (y.ids[i] != LabelMap::kIgnore) ++n;
    dlogits = TensorT<T>(prob.channels, prob.height, prob.width);
    if (n == 0) return 0.0;
    const double inv_n = scale / double(n);
    double sum = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        const uint8_t cls = y.ids[i];
        if (cls == LabelMap::kIgnore) continue;
        const double wy = w[cls];
        for (int c = 0; c < prob.channels; ++c) {
            const double pc = prob.data[size_t(c) * plane + i];
            double g = pc;
            if (c == cls) g -= 1.0;
            dlogits.data[size_t(c) * plane + i] = T(wy * inv_n * g);
        }
        sum += wy * std::log(std::max(double(prob.data[size_t(cls) * plane + i]), kLogEps));
    }
    return -sum * inv_n;
}

// Argmax where the max-channel probability strictly exceeds c_t, else ignore.
// c_t = 0 labels every pixel; c_t = 1 labels none.
template <typename T>
LabelMap make_pseudo_label(const TensorT<T>& p_w, const PseudoLabelConfig& cfg) {
    validate(cfg);
    LabelMap out(p_w.height, p_w.width, LabelMap::kIgnore);
    const size_t plane = p_w.plane();
    for (size_t i = 0; i < plane; ++i) {
        int best = 0;
        T best_p = p_w.data[i];
        for (int c = 1; c < p_w.channels; ++c) {
            const T v = p_w.data[size_t(c) * plane + i];
            if (v > best_p) {
                best_p = v;
                best = c;
            }
        }
        if (double(best_p) > cfg.confidence_threshold) out.ids[i] = uint8_t(best);
    }
    return out;
}

struct LossBundle {
    double source_labeled = 0.0;   // L_s^l
    double target_labeled = 0.0;   // L_t^l
    double feature_perturb = 0.0;  // L_t^fp
    double strong1 = 0.0;          // L_t^s1
    double strong2 = 0.0;          // L_t^s2
    double lambda = 1.0 / 3.0;
};

inline double total_loss(const LossBundle& b) {
    if (b.lambda < 0.0) throw validation_error("lambda must be >= 0");
    return b.source_labeled + b.target_labeled +
           b.lambda * (b.feature_perturb + b.strong1 + b.strong2);
}

} // namespace ssada::losses
