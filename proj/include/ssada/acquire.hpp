#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ssada/rng.hpp"
#include "ssada/tensor.hpp"

namespace ssada::acquire {

enum class Strategy { entropy, confidence, random };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::entropy: return "entropy";
        case Strategy::confidence: return "confidence";
        default: return "random";
    }
}

inline Strategy strategy_from(const std::string& s) {
    if (s == "entropy") return Strategy::entropy;
    if (s == "confidence") return Strategy::confidence;
    if (s == "random") return Strategy::random;
    throw validation_error("unknown acquisition strategy '" + s + "'");
}

// Image-level entropy: -(1/N) sum over pixels and classes of p log p, natural
// log, with 0 log 0 taken as 0.
template <typename T>
double entropy_score(const TensorT<T>& p) {
    double acc = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double v = double(p.data[i]);
        if (v > 0.0) acc -= v * std::log(v);
    }
    return acc / double(p.plane());
}

// Image-level confidence: mean over pixels of the max-channel probability.
template <typename T>
double confidence_score(const TensorT<T>& p) {
    const size_t plane = p.plane();
    double acc = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        T mx = p.data[i];
        for (int c = 1; c < p.channels; ++c) mx = std::max(mx, p.data[size_t(c) * plane + i]);
        acc += double(mx);
    }
    return acc / double(plane);
}

struct AcquisitionScore {
    std::string sample_id;
    Strategy strategy = Strategy::entropy;
    double score = 0.0;
    int rank = 0; // 1-based, permutation over the scored set
};

// Ranks the scored samples in selection order: entropy descending, confidence
// ascending, random ascending by the drawn key. Ties break by sample_id.
inline std::vector<AcquisitionScore> rank_scores(std::vector<AcquisitionScore> scores) {
    auto better = [](const AcquisitionScore& a, const AcquisitionScore& b) {
        if (a.score != b.score) {
            if (a.strategy == Strategy::entropy) return a.score > b.score;
            return a.score < b.score; // confidence: lowest first; random: key order
        }
        return a.sample_id < b.sample_id;
    };
    std::sort(scores.begin(), scores.end(), better);
    for (size_t i = 0; i < scores.size(); ++i) scores[i].rank = int(i) + 1;
    return scores;
}

// Uniform keys for the random baseline; ids are scored in sorted order so the
// draw depends only on the seed and the pool contents.
inline std::vector<AcquisitionScore> random_scores(std::vector<std::string> ids,
                                                   std::mt19937_64& rng) {
    std::sort(ids.begin(), ids.end());
    std::vector<AcquisitionScore> scores;
    scores.reserve(ids.size());
    for (auto& id : ids)
        scores.push_back({std::move(id), Strategy::random, uniform01(rng), 0});
    return scores;
}

// Top-k in rank order.
inline std::vector<std::string> select(const std::vector<AcquisitionScore>& ranked, size_t k) {
    if (k > ranked.size())
        throw contract_error("select: k=" + std::to_string(k) + " exceeds pool size " +
                             std::to_string(ranked.size()));
    std::vector<const AcquisitionScore*> order;
    order.reserve(ranked.size());
    for (const auto& s : ranked) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const AcquisitionScore* a, const AcquisitionScore* b) { return a->rank < b->rank; });
    std::vector<std::string> ids;
    ids.reserve(k);
    for (size_t i = 0; i < k; ++i) ids.push_back(order[i]->sample_id);
    return ids;
}

struct BudgetSchedule {
    std::vector<int> trigger_epochs;    // T_ac, strictly increasing
    std::vector<int> per_trigger_quota; // sums to total
    int total = 0;                      // N_s
};

// Quotas are floor/ceil balanced with the remainder assigned to the earliest
// triggers; every trigger must fall within the first half of training.
inline BudgetSchedule make_schedule(int total_epochs, const std::vector<int>& triggers, int n_s) {
    if (triggers.empty()) throw validation_error("schedule: trigger list is empty");
    if (n_s < 0) throw validation_error("schedule: sampling total must be >= 0");
    for (size_t i = 0; i < triggers.size(); ++i) {
        if (triggers[i] < 1)
            throw validation_error("schedule: trigger epochs must be >= 1");
        if (i > 0 && triggers[i] <= triggers[i - 1])
            throw validation_error("schedule: trigger epochs must be strictly increasing");
        if (2 * triggers[i] > total_epochs)
            throw validation_error(
                "schedule: trigger epoch " + std::to_string(triggers[i]) +
                " is beyond the first half of training (" + std::to_string(total_epochs) +
                " epochs); triggers must lie within the first half");
    }
    BudgetSchedule s;
    s.trigger_epochs = triggers;
    s.total = n_s;
    const int n = int(triggers.size());
    const int base = n_s / n;
    const int rem = n_s % n;
    for (int i = 0; i < n; ++i) s.per_trigger_quota.push_back(base + (i < rem ? 1 : 0));
    return s;
}

} // namespace ssada::acquire
