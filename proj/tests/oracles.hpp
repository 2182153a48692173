// Independent brute-force oracles used by the unit and acceptance tests.
// Everything here recomputes results from first principles, without touching
// the implementation paths under test.
#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "ssada/tensor.hpp"

namespace oracles {

using ssada::LabelMap;
using ssada::TensorT;

// direct per-pixel, per-class summation of -(1/N) sum p log p
template <typename T>
double entropy_bruteforce(const TensorT<T>& p) {
    double total = 0.0;
    size_t n = 0;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double pixel = 0.0;
            for (int c = 0; c < p.channels; ++c) {
                const double v = double(p.at(c, y, x));
                if (v > 0.0) pixel += v * std::log(v);
            }
            total -= pixel;
            ++n;
        }
    }
    return total / double(n);
}

template <typename T>
double confidence_bruteforce(const TensorT<T>& p) {
    double total = 0.0;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double mx = 0.0;
            for (int c = 0; c < p.channels; ++c) mx = std::max(mx, double(p.at(c, y, x)));
            total += mx;
        }
    }
    return total / double(size_t(p.height) * p.width);
}

// per-pixel weighted cross-entropy by direct summation
template <typename T>
double wce_bruteforce(const TensorT<T>& p, const LabelMap& y, const std::vector<double>& w) {
    double total = 0.0;
    size_t n = 0;
    for (int yy = 0; yy < p.height; ++yy) {
        for (int xx = 0; xx < p.width; ++xx) {
            const uint8_t cls = y.at(yy, xx);
            if (cls == LabelMap::kIgnore) continue;
            total += w[cls] * std::log(std::max(double(p.at(cls, yy, xx)), 1e-12));
            ++n;
        }
    }
    return n == 0 ? 0.0 : -total / double(n);
}

// full confusion matrix, then IoU from its entries
struct ConfusionOracle {
    int num_classes;
    std::vector<uint64_t> m; // m[gt * C + pred]

    explicit ConfusionOracle(int c) : num_classes(c), m(size_t(c) * c, 0) {}

    void add(const LabelMap& pred, const LabelMap& gt) {
        for (size_t i = 0; i < gt.ids.size(); ++i) {
            if (gt.ids[i] == LabelMap::kIgnore) continue;
            m[size_t(gt.ids[i]) * num_classes + pred.ids[i]]++;
        }
    }

    // IoU_i = m[i][i] / (row_i + col_i - m[i][i]); {defined?, value}
    std::pair<bool, double> iou(int i) const {
        uint64_t row = 0, col = 0;
        for (int j = 0; j < num_classes; ++j) {
            row += m[size_t(i) * num_classes + j];
            col += m[size_t(j) * num_classes + i];
        }
        const uint64_t denom = row + col - m[size_t(i) * num_classes + i];
        if (denom == 0) return {false, 0.0};
        return {true, double(m[size_t(i) * num_classes + i]) / double(denom)};
    }

    double miou() const {
        double sum = 0.0;
        int defined = 0;
        for (int i = 0; i < num_classes; ++i) {
            auto [ok, v] = iou(i);
            if (ok) {
                sum += v;
                ++defined;
            }
        }
        return sum / double(defined);
    }
};

// random normalized probability map
template <typename T>
TensorT<T> random_prob_map(int channels, int h, int w, std::mt19937_64& rng) {
    TensorT<T> p(channels, h, w);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int c = 0; c < channels; ++c) {
                const double v = u(rng);
                p.at(c, y, x) = T(v);
                sum += v;
            }
            for (int c = 0; c < channels; ++c) p.at(c, y, x) = T(double(p.at(c, y, x)) / sum);
        }
    }
    return p;
}

inline LabelMap random_label_map(int h, int w, int num_classes, double ignore_prob,
                                 std::mt19937_64& rng) {
    LabelMap lm(h, w);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, num_classes - 1);
    for (auto& id : lm.ids) id = u(rng) < ignore_prob ? LabelMap::kIgnore : uint8_t(cls(rng));
    return lm;
}

} // namespace oracles
