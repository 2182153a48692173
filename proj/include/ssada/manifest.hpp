#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ssada {

enum class Domain { source, target };
enum class Split { train, val };

std::string to_string(Domain d);
std::string to_string(Split s);

struct SampleRecord {
    std::string sample_id;
    std::filesystem::path image_path; // relative to the manifest directory
    std::filesystem::path label_path;
    Domain domain = Domain::source;
    Split split = Split::train;

    bool operator==(const SampleRecord&) const = default;
};

// UTF-8 JSON array of SampleRecord fields; paths are stored relative so a
// dataset directory can be moved wholesale.
void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

// Throws io_error with a line number on malformed JSON, and io_error naming
// the sample_id when a referenced image/label file is missing.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);

// Resolve a record path against the manifest's directory.
std::filesystem::path resolve(const std::filesystem::path& manifest_path,
                              const std::filesystem::path& rel);

} // namespace ssada
