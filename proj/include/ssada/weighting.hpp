#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ssada/errors.hpp"
#include "ssada/tensor.hpp"

namespace ssada::weighting {

// Per-class loss weights, all in [1, u].
struct ClassWeightVector {
    std::vector<double> weights;
    double upper_bound = 1.0;

    static ClassWeightVector ones(int num_classes) {
        return {std::vector<double>(size_t(num_classes), 1.0), 1.0};
    }
    double operator[](size_t i) const { return weights[i]; }
    size_t size() const { return weights.size(); }
};

// IoU per class; entries are empty when the class is absent from both the
// predictions and the ground truth.
struct ClassIoUVector {
    std::vector<std::optional<double>> iou;
    size_t size() const { return iou.size(); }
};

struct ClassCounts {
    std::vector<uint64_t> tp, fp, fn;
};

// Confusion counts aggregated over paired maps. Pixels whose ground truth is
// the ignore id contribute nothing, in any role.
inline ClassCounts confusion_counts(std::span<const LabelMap> pred, std::span<const LabelMap> gt,
                                    int num_classes) {
    if (pred.size() != gt.size())
        throw contract_error("confusion_counts: pred/gt list size mismatch");
    ClassCounts c;
    c.tp.assign(size_t(num_classes), 0);
    c.fp.assign(size_t(num_classes), 0);
    c.fn.assign(size_t(num_classes), 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        const LabelMap& p = pred[i];
        const LabelMap& g = gt[i];
        if (p.height != g.height || p.width != g.width)
            throw contract_error("confusion_counts: shape mismatch at pair " + std::to_string(i));
        for (size_t j = 0; j < g.ids.size(); ++j) {
            const uint8_t t = g.ids[j];
            if (t == LabelMap::kIgnore) continue;
            const uint8_t y = p.ids[j];
            if (t == y) {
                ++c.tp[t];
            } else {
                ++c.fn[t];
                if (y < num_classes) ++c.fp[y];
            }
        }
    }
    return c;
}

inline ClassIoUVector per_class_iou(std::span<const LabelMap> pred, std::span<const LabelMap> gt,
                                    int num_classes) {
    const ClassCounts c = confusion_counts(pred, gt, num_classes);
    ClassIoUVector out;
    out.iou.resize(size_t(num_classes));
    for (int i = 0; i < num_classes; ++i) {
        const uint64_t denom = c.tp[i] + c.fp[i] + c.fn[i];
        if (denom > 0) out.iou[i] = double(c.tp[i]) / double(denom);
    }
    return out;
}

// w_i = (1 - IoU_i) * (u - 1) + 1; classes never seen get the full weight u,
// so the classes the pool has not discovered are not suppressed.
inline ClassWeightVector iou_weights(const ClassIoUVector& iou, double u) {
    if (u < 1.0) throw validation_error("class weight upper bound u must be >= 1");
    ClassWeightVector w;
    w.upper_bound = u;
    w.weights.reserve(iou.size());
    for (const auto& v : iou.iou)
        w.weights.push_back(v ? (1.0 - *v) * (u - 1.0) + 1.0 : u);
    return w;
}

// Frequency baseline: w_i = 1 + (u - 1) * (1 - F_i / max_j F_j).
inline ClassWeightVector frequency_weights(std::span<const LabelMap> labels, int num_classes,
                                           double u) {
    if (u < 1.0) throw validation_error("class weight upper bound u must be >= 1");
    std::vector<uint64_t> counts(size_t(num_classes), 0);
    uint64_t total = 0;
    for (const LabelMap& lm : labels) {
        for (uint8_t id : lm.ids) {
            if (id == LabelMap::kIgnore) continue;
            if (id < num_classes) {
                ++counts[id];
                ++total;
            }
        }
    }
    if (total == 0) throw validation_error("frequency_weights: no labeled pixels");
    const uint64_t fmax = *std::max_element(counts.begin(), counts.end());
    ClassWeightVector w;
    w.upper_bound = u;
    w.weights.reserve(size_t(num_classes));
    for (int i = 0; i < num_classes; ++i) {
        const double rel = double(counts[i]) / double(fmax);
        w.weights.push_back(1.0 + (u - 1.0) * (1.0 - rel));
    }
    return w;
}

} // namespace ssada::weighting
