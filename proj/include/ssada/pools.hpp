#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ssada/manifest.hpp"
#include "ssada/tensor.hpp"

namespace ssada::pools {

// Disjoint partition of the target-train samples by annotation status. The
// labeled side only ever grows.
struct PoolState {
    std::set<std::string> labeled;   // D_t^l
    std::set<std::string> unlabeled; // D_t^u
    struct Event {
        int epoch = 0;
        std::vector<std::string> added;
    };
    std::vector<Event> history;

    size_t total() const { return labeled.size() + unlabeled.size(); }
    bool is_labeled(const std::string& id) const { return labeled.count(id) != 0; }
};

// ceil(init_fraction * M) ids drawn uniformly without replacement.
PoolState init_pool(std::span<const std::string> target_ids, double init_fraction, uint64_t seed);

// Moves ids from unlabeled to labeled; unknown or already-labeled ids raise a
// contract error naming the offending id.
void annotate(PoolState& pool, std::span<const std::string> sample_ids, int epoch);

void save_pool_snapshot(const PoolState& pool, int epoch, const std::filesystem::path& path);

// Sole accessor of target-train ground truth. Labels leave this class only
// for samples in the labeled pool; every access is logged.
class LabelOracle {
  public:
    LabelOracle(const std::filesystem::path& manifest_path,
                std::span<const SampleRecord> records);

    // Throws contract_error when id is outside pool.labeled.
    const LabelMap& fetch(const std::string& id, const PoolState& pool);

    size_t access_count() const { return access_log_.size(); }
    const std::vector<std::pair<int, std::string>>& access_log() const { return access_log_; }
    void set_epoch(int epoch) { epoch_ = epoch; }
    void write_access_log(const std::filesystem::path& path) const;

  private:
    std::map<std::string, std::filesystem::path> label_paths_;
    std::map<std::string, LabelMap> cache_;
    std::vector<std::pair<int, std::string>> access_log_;
    int epoch_ = 0;
};

} // namespace ssada::pools
