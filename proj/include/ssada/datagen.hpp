#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "ssada/manifest.hpp"
#include "ssada/tensor.hpp"

namespace ssada::datagen {

struct ShiftSpec {
    double hue_offset = 60.0;  // degrees of hue rotation
    double noise_sigma = 10.0; // additive gaussian noise, 8-bit intensity units
    int blur_radius = 1;       // box blur radius in pixels, 0 disables

    bool operator==(const ShiftSpec&) const = default;
};

struct DatasetSpec {
    int image_height = 64;
    int image_width = 64;
    int num_classes = 6;
    int source_count = 200;
    int target_count = 200;
    int target_val_count = 50;
    std::vector<int> rare_class_ids = {4, 5};
    double rare_fraction = 0.1;
    ShiftSpec shift;
    uint64_t seed = 0;

    bool operator==(const DatasetSpec&) const = default;
};

DatasetSpec default_spec();

// Throws validation_error describing the first violated invariant.
void validate(const DatasetSpec& spec);

// Renders the full dataset under out_dir (images/, labels/, manifest.json,
// spec.json) and returns the manifest records. Identical spec+seed gives a
// byte-identical tree.
std::vector<SampleRecord> generate(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// Photometric target-domain shift: hue rotation, box blur, then additive
// gaussian noise. Labels are untouched by construction.
ImageU8 apply_domain_shift(const ImageU8& img, const ShiftSpec& shift, std::mt19937_64& rng);

void save_spec(const DatasetSpec& spec, const std::filesystem::path& path);
DatasetSpec load_spec(const std::filesystem::path& path);

// Dataset directory helpers used by the trainer and CLI.
inline std::filesystem::path manifest_path(const std::filesystem::path& dataset_dir) {
    return dataset_dir / "manifest.json";
}
inline std::filesystem::path spec_path(const std::filesystem::path& dataset_dir) {
    return dataset_dir / "spec.json";
}

} // namespace ssada::datagen
