#include <fstream>

#include <json.hpp>

#include "ssada/model.hpp"

namespace ssada::seg {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'S', 'A', 'D', 'A', 'C', 'K', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const SegModel& model,
                     const Sgd<float>& opt, int epoch) {
    json header{{"config",
                 {{"num_classes", model.cfg.num_classes},
                  {"base_channels", model.cfg.base_channels},
                  {"depth", model.cfg.depth},
                  {"feature_dropout_rate", model.cfg.feature_dropout_rate}}},
                {"iteration", opt.iteration},
                {"epoch", epoch},
                {"has_velocity", !opt.velocity.empty()},
                {"scalar", "f32"}};
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const uint32_t len = uint32_t(head.size());
    detail::write_blob(out, &len, sizeof(len));
    out.write(head.data(), std::streamsize(head.size()));

    auto params = const_cast<SegModel&>(model).param_views();
    for (auto p : params) detail::write_blob(out, p.data(), p.size_bytes());
    if (!opt.velocity.empty()) {
        for (const auto& v : opt.velocity)
            detail::write_blob(out, v.data(), v.size() * sizeof(float));
    }
    if (!out) throw io_error("checkpoint write failed: " + path.string());
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, SegModel& model,
                               Sgd<float>* opt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint " + path.string());
    char magic[8];
    detail::read_blob(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw io_error("not a checkpoint file: " + path.string());
    uint32_t len = 0;
    detail::read_blob(in, &len, sizeof(len));
    std::string head(len, '\0');
    detail::read_blob(in, head.data(), len);

    json header;
    try {
        header = json::parse(head);
    } catch (const json::parse_error& e) {
        throw io_error("checkpoint header parse error: " + std::string(e.what()));
    }

    CheckpointMeta meta;
    const auto& jc = header.at("config");
    meta.config.num_classes = jc.at("num_classes").get<int>();
    meta.config.base_channels = jc.at("base_channels").get<int>();
    meta.config.depth = jc.at("depth").get<int>();
    meta.config.feature_dropout_rate = jc.at("feature_dropout_rate").get<double>();
    meta.iteration = header.at("iteration").get<long>();
    meta.epoch = header.at("epoch").get<int>();

    model = SegModel(meta.config);
    auto params = model.param_views();
    for (auto p : params) detail::read_blob(in, p.data(), p.size_bytes());

    if (opt) {
        opt->iteration = meta.iteration;
        opt->velocity.clear();
        if (header.at("has_velocity").get<bool>()) {
            for (auto p : params) {
                std::vector<float> v(p.size());
                detail::read_blob(in, v.data(), v.size() * sizeof(float));
                opt->velocity.push_back(std::move(v));
            }
        }
    }
    return meta;
}

} // namespace ssada::seg
