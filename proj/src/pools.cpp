#include "ssada/pools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ssada/errors.hpp"
#include "ssada/png_io.hpp"
#include "ssada/rng.hpp"

namespace ssada::pools {

using nlohmann::json;

PoolState init_pool(std::span<const std::string> target_ids, double init_fraction, uint64_t seed) {
    if (init_fraction < 0.0 || init_fraction > 1.0)
        throw validation_error("init_fraction must be in [0, 1]");
    std::vector<std::string> ids(target_ids.begin(), target_ids.end());
    std::sort(ids.begin(), ids.end());
    auto rng = rng_for(seed, "init_pool");
    std::shuffle(ids.begin(), ids.end(), rng);
    const size_t k = size_t(std::ceil(init_fraction * double(ids.size())));

    PoolState pool;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i < k)
            pool.labeled.insert(ids[i]);
        else
            pool.unlabeled.insert(ids[i]);
    }
    if (k > 0) {
        PoolState::Event ev;
        ev.epoch = 0;
        ev.added.assign(ids.begin(), ids.begin() + long(k));
        std::sort(ev.added.begin(), ev.added.end());
        pool.history.push_back(std::move(ev));
    }
    return pool;
}

void annotate(PoolState& pool, std::span<const std::string> sample_ids, int epoch) {
    for (const auto& id : sample_ids) {
        if (pool.labeled.count(id))
            throw contract_error("annotate: sample '" + id + "' is already labeled");
        if (!pool.unlabeled.count(id))
            throw contract_error("annotate: unknown sample '" + id + "'");
    }
    PoolState::Event ev;
    ev.epoch = epoch;
    for (const auto& id : sample_ids) {
        pool.unlabeled.erase(id);
        pool.labeled.insert(id);
        ev.added.push_back(id);
    }
    pool.history.push_back(std::move(ev));
}

void save_pool_snapshot(const PoolState& pool, int epoch, const std::filesystem::path& path) {
    json j{{"epoch", epoch},
           {"labeled", std::vector<std::string>(pool.labeled.begin(), pool.labeled.end())},
           {"unlabeled_count", pool.unlabeled.size()}};
    std::ofstream out(path);
    if (!out) throw io_error("cannot write pool snapshot " + path.string());
    out << j.dump(2) << "\n";
}

LabelOracle::LabelOracle(const std::filesystem::path& manifest_path,
                         std::span<const SampleRecord> records) {
    for (const auto& r : records) {
        if (r.domain == Domain::target && r.split == Split::train)
            label_paths_[r.sample_id] = resolve(manifest_path, r.label_path);
    }
}

const LabelMap& LabelOracle::fetch(const std::string& id, const PoolState& pool) {
    if (!pool.is_labeled(id))
        throw contract_error("oracle: label requested for sample '" + id +
                             "' outside the labeled pool");
    auto it = label_paths_.find(id);
    if (it == label_paths_.end())
        throw contract_error("oracle: unknown target-train sample '" + id + "'");
    access_log_.emplace_back(epoch_, id);
    auto cached = cache_.find(id);
    if (cached == cache_.end())
        cached = cache_.emplace(id, pngio::read_gray8(it->second)).first;
    return cached->second;
}

void LabelOracle::write_access_log(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write oracle access log " + path.string());
    out << "epoch,sample_id\n";
    for (const auto& [epoch, id] : access_log_) out << epoch << "," << id << "\n";
}

} // namespace ssada::pools
