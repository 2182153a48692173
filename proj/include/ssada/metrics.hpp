#pragma once

#include <span>
#include <vector>

#include "ssada/weighting.hpp"

namespace ssada::metrics {

struct MiouResult {
    weighting::ClassIoUVector per_class;
    double miou = 0.0;
};

// Mean of the defined per-class IoUs; classes absent from both prediction and
// ground truth across the whole set are excluded from the mean.
inline MiouResult miou(std::span<const LabelMap> pred, std::span<const LabelMap> gt,
                       int num_classes) {
    MiouResult r;
    r.per_class = weighting::per_class_iou(pred, gt, num_classes);
    double sum = 0.0;
    int defined = 0;
    for (const auto& v : r.per_class.iou) {
        if (v) {
            sum += *v;
            ++defined;
        }
    }
    if (defined == 0) throw validation_error("miou: no class is present in the evaluation set");
    r.miou = sum / double(defined);
    return r;
}

// F_i = N_i / sum_j N_j over non-ignored pixels.
inline std::vector<double> class_frequency(std::span<const LabelMap> labels, int num_classes) {
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
    if (total == 0) throw validation_error("class_frequency: no labeled pixels");
    std::vector<double> f(counts.size(), 0.0);
    for (int i = 0; i < num_classes; ++i) f[size_t(i)] = double(counts[i]) / double(total);
    return f;
}

struct SelectionFrequencyRow {
    int class_id = 0;
    double freq_selected = 0.0;
    double freq_pool = 0.0;
    std::optional<double> ratio; // empty when the class is absent from the pool
};

// Per-class frequency among the selected images, in the whole pool, and their
// ratio. Mirrors the selected-vs-all class frequency comparison.
inline std::vector<SelectionFrequencyRow> selection_frequency_report(
    std::span<const LabelMap> selected, std::span<const LabelMap> pool, int num_classes) {
    if (selected.empty() || pool.empty())
        throw contract_error("selection_frequency_report: empty input set");
    const auto fs = class_frequency(selected, num_classes);
    const auto fp = class_frequency(pool, num_classes);
    std::vector<SelectionFrequencyRow> rows;
    rows.reserve(size_t(num_classes));
    for (int i = 0; i < num_classes; ++i) {
        SelectionFrequencyRow r;
        r.class_id = i;
        r.freq_selected = fs[i];
        r.freq_pool = fp[i];
        if (fp[i] > 0.0) r.ratio = fs[i] / fp[i];
        rows.push_back(r);
    }
    return rows;
}

} // namespace ssada::metrics
