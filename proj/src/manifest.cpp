#include "ssada/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ssada/errors.hpp"

namespace ssada {

using nlohmann::json;

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

namespace {

Domain domain_from(const std::string& s) {
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    throw io_error("manifest: unknown domain '" + s + "'");
}

Split split_from(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    throw io_error("manifest: unknown split '" + s + "'");
}

int line_of_offset(const std::string& text, size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + int(std::count(text.begin(), text.begin() + long(byte), '\n'));
}

} // namespace

void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) {
        arr.push_back({{"sample_id", r.sample_id},
                       {"image_path", r.image_path.generic_string()},
                       {"label_path", r.label_path.generic_string()},
                       {"domain", to_string(r.domain)},
                       {"split", to_string(r.split)}});
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot write manifest " + path.string());
    out << arr.dump(2) << "\n";
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};

    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::parse_error& e) {
        throw io_error("manifest parse error at line " +
                       std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }
    if (!arr.is_array()) throw io_error("manifest is not a JSON array: " + path.string());

    const auto base = path.parent_path();
    std::vector<SampleRecord> records;
    std::set<std::string> seen;
    for (const auto& item : arr) {
        SampleRecord r;
        r.sample_id = item.at("sample_id").get<std::string>();
        r.image_path = item.at("image_path").get<std::string>();
        r.label_path = item.at("label_path").get<std::string>();
        r.domain = domain_from(item.at("domain").get<std::string>());
        r.split = split_from(item.at("split").get<std::string>());
        if (!seen.insert(r.sample_id).second)
            throw io_error("manifest: duplicate sample_id '" + r.sample_id + "'");
        if (!std::filesystem::exists(base / r.image_path))
            throw io_error("manifest: sample '" + r.sample_id + "' references missing image file " +
                           (base / r.image_path).string());
        if (!std::filesystem::exists(base / r.label_path))
            throw io_error("manifest: sample '" + r.sample_id + "' references missing label file " +
                           (base / r.label_path).string());
        records.push_back(std::move(r));
    }
    return records;
}

std::filesystem::path resolve(const std::filesystem::path& manifest_path,
                              const std::filesystem::path& rel) {
    return manifest_path.parent_path() / rel;
}

} // namespace ssada
