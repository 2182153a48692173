#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssada/acquire.hpp"
#include "ssada/model.hpp"

namespace ssada::trainer {

enum class Mode { source_only, supervised_target, joint, semi_random, ss_ada };

std::string to_string(Mode m);
Mode mode_from(const std::string& s);

struct Toggles {
    bool use_semi = false;
    bool use_active = false;
    bool use_weighting = false;
};

Toggles mode_presets(Mode m);

enum class WeightingScheme { iou, frequency };

std::string to_string(WeightingScheme s);
WeightingScheme weighting_scheme_from(const std::string& s);

struct OptimizerConfig {
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int warmup_iters = 100;
    int batch_size = 4;
};

struct ExperimentConfig {
    Mode mode = Mode::ss_ada;
    std::filesystem::path dataset_dir;
    seg::SegModelConfig model; // num_classes filled from the dataset spec
    double confidence_threshold = 0.0;
    acquire::Strategy strategy = acquire::Strategy::entropy;
    std::vector<int> triggers = {20, 40, 60};
    double budget_fraction = 0.25;
    double init_fraction = 0.01;
    double upper_bound_u = 2.0;
    double lambda = 1.0 / 3.0;
    WeightingScheme weighting_scheme = WeightingScheme::iou;
    std::optional<Toggles> toggles; // defaults to the mode presets
    int epochs = 120;
    uint64_t seed = 0;
    OptimizerConfig optimizer;

    Toggles resolved_toggles() const { return toggles ? *toggles : mode_presets(mode); }
};

// JSON round-trip used for config files, run dirs and the config hash.
std::string to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// FNV-1a over the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

// Throws validation_error on inconsistent settings (bad fractions, toggles
// that contradict the mode, triggers outside the first half of training).
void validate(const ExperimentConfig& cfg);

struct RunResult {
    std::filesystem::path run_dir;
    double final_miou = 0.0;
    std::vector<double> final_per_class_iou; // NaN where undefined
    int epochs_run = 0;
};

// Executes the configured experiment into run_dir (created if needed).
// An existing run dir resumes from its latest checkpoint after the stored
// config hash is verified; a mismatch is refused with a field-level diff.
RunResult run(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

// Artifact names inside a run directory.
namespace files {
inline constexpr const char* config = "config.json";
inline constexpr const char* selection_log = "selection_log.csv";
inline constexpr const char* weights_log = "weights_log.csv";
inline constexpr const char* metrics = "metrics.csv";
inline constexpr const char* oracle_log = "oracle_access.csv";
inline constexpr const char* checkpoints = "checkpoints";
inline std::string pool_snapshot(int epoch) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "pool_epoch_%04d.json", epoch);
    return buf;
}
inline std::string checkpoint(int epoch) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "epoch_%04d.ckpt", epoch);
    return buf;
}
} // namespace files

// Deterministic batch stream: reshuffles per pass, cycles when exhausted.
class SampleStream {
  public:
    SampleStream() = default;
    SampleStream(std::vector<std::string> ids, uint64_t seed, std::string tag, int epoch);

    std::string next();
    size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

  private:
    void reshuffle();

    std::vector<std::string> ids_;
    uint64_t seed_ = 0;
    std::string tag_;
    int epoch_ = 0;
    size_t pos_ = 0;
    uint64_t pass_ = 0;
};

} // namespace ssada::trainer
