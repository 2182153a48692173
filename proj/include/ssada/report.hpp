#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssada/trainer.hpp"

namespace ssada::report {

struct RunSummary {
    std::filesystem::path dir;
    trainer::ExperimentConfig config;
    std::vector<std::pair<int, double>> miou_by_epoch;
    double final_miou = 0.0;
    std::vector<std::optional<double>> final_per_class_iou;
};

RunSummary load_run(const std::filesystem::path& run_dir);

// Reads every run dir, then writes comparison artifacts into out_dir:
//   budget_curve.csv   one row per (mode, budget, seed) with the final mIoU
//   budget_curve.png   mIoU vs labeled fraction, one series per mode
//   ablation_grid.csv  per-mode mean mIoU over seeds with the toggle pattern
//   miou_vs_epoch.png  validation curves of all runs
//   selection_frequency.csv  per-class selected-vs-pool frequency ratios
// The selection table needs the dataset labels referenced by each run.
void write_report(const std::vector<std::filesystem::path>& run_dirs,
                  const std::filesystem::path& out_dir);

// Per-class frequency ratio rows for one run's actively selected images.
struct SelectionRatios {
    std::vector<int> class_ids;
    std::vector<double> freq_selected;
    std::vector<double> freq_pool;
    std::vector<std::optional<double>> ratio;
};
SelectionRatios selection_ratios(const std::filesystem::path& run_dir);

} // namespace ssada::report
