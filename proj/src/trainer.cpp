#include "ssada/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ssada/datagen.hpp"
#include "ssada/losses.hpp"
#include "ssada/metrics.hpp"
#include "ssada/parallel.hpp"
#include "ssada/perturb.hpp"
#include "ssada/png_io.hpp"
#include "ssada/pools.hpp"
#include "ssada/strfmt.hpp"

namespace ssada::trainer {

using nlohmann::json;

// ---- enum maps -----------------------------------------------------------

std::string to_string(Mode m) {
    switch (m) {
        case Mode::source_only: return "source_only";
        case Mode::supervised_target: return "supervised_target";
        case Mode::joint: return "joint";
        case Mode::semi_random: return "semi_random";
        default: return "ss_ada";
    }
}

Mode mode_from(const std::string& s) {
    if (s == "source_only") return Mode::source_only;
    if (s == "supervised_target") return Mode::supervised_target;
    if (s == "joint") return Mode::joint;
    if (s == "semi_random") return Mode::semi_random;
    if (s == "ss_ada") return Mode::ss_ada;
    throw validation_error("unknown mode '" + s + "'");
}

Toggles mode_presets(Mode m) {
    switch (m) {
        case Mode::semi_random: return {true, false, false};
        case Mode::ss_ada: return {true, true, true};
        default: return {false, false, false};
    }
}

std::string to_string(WeightingScheme s) {
    return s == WeightingScheme::iou ? "iou" : "frequency";
}

WeightingScheme weighting_scheme_from(const std::string& s) {
    if (s == "iou") return WeightingScheme::iou;
    if (s == "frequency") return WeightingScheme::frequency;
    throw validation_error("unknown weighting scheme '" + s + "'");
}

// ---- config --------------------------------------------------------------

std::string to_json(const ExperimentConfig& cfg) {
    const Toggles t = cfg.resolved_toggles();
    json j{{"mode", to_string(cfg.mode)},
           {"dataset_dir", cfg.dataset_dir.generic_string()},
           {"model",
            {{"num_classes", cfg.model.num_classes},
             {"base_channels", cfg.model.base_channels},
             {"depth", cfg.model.depth},
             {"feature_dropout_rate", cfg.model.feature_dropout_rate}}},
           {"confidence_threshold", cfg.confidence_threshold},
           {"strategy", acquire::to_string(cfg.strategy)},
           {"triggers", cfg.triggers},
           {"budget_fraction", cfg.budget_fraction},
           {"init_fraction", cfg.init_fraction},
           {"upper_bound_u", cfg.upper_bound_u},
           {"lambda", cfg.lambda},
           {"weighting_scheme", to_string(cfg.weighting_scheme)},
           {"toggles",
            {{"use_semi", t.use_semi},
             {"use_active", t.use_active},
             {"use_weighting", t.use_weighting}}},
           {"epochs", cfg.epochs},
           {"seed", cfg.seed},
           {"optimizer",
            {{"lr", cfg.optimizer.lr},
             {"momentum", cfg.optimizer.momentum},
             {"weight_decay", cfg.optimizer.weight_decay},
             {"warmup_iters", cfg.optimizer.warmup_iters},
             {"batch_size", cfg.optimizer.batch_size}}}};
    return j.dump(2);
}

static ExperimentConfig config_from(const json& j) {
    ExperimentConfig cfg;
    cfg.mode = mode_from(j.at("mode").get<std::string>());
    cfg.dataset_dir = j.value("dataset_dir", std::string());
    if (j.contains("model")) {
        const auto& m = j.at("model");
        cfg.model.num_classes = m.value("num_classes", cfg.model.num_classes);
        cfg.model.base_channels = m.value("base_channels", cfg.model.base_channels);
        cfg.model.depth = m.value("depth", cfg.model.depth);
        cfg.model.feature_dropout_rate =
            m.value("feature_dropout_rate", cfg.model.feature_dropout_rate);
    }
    cfg.confidence_threshold = j.value("confidence_threshold", cfg.confidence_threshold);
    if (j.contains("strategy"))
        cfg.strategy = acquire::strategy_from(j.at("strategy").get<std::string>());
    if (j.contains("triggers")) cfg.triggers = j.at("triggers").get<std::vector<int>>();
    cfg.budget_fraction = j.value("budget_fraction", cfg.budget_fraction);
    cfg.init_fraction = j.value("init_fraction", cfg.init_fraction);
    cfg.upper_bound_u = j.value("upper_bound_u", cfg.upper_bound_u);
    cfg.lambda = j.value("lambda", cfg.lambda);
    if (j.contains("weighting_scheme"))
        cfg.weighting_scheme = weighting_scheme_from(j.at("weighting_scheme").get<std::string>());
    if (j.contains("toggles")) {
        const auto& t = j.at("toggles");
        cfg.toggles = Toggles{t.value("use_semi", false), t.value("use_active", false),
                              t.value("use_weighting", false)};
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        cfg.optimizer.lr = o.value("lr", cfg.optimizer.lr);
        cfg.optimizer.momentum = o.value("momentum", cfg.optimizer.momentum);
        cfg.optimizer.weight_decay = o.value("weight_decay", cfg.optimizer.weight_decay);
        cfg.optimizer.warmup_iters = o.value("warmup_iters", cfg.optimizer.warmup_iters);
        cfg.optimizer.batch_size = o.value("batch_size", cfg.optimizer.batch_size);
    }
    return cfg;
}

ExperimentConfig config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw validation_error("config parse error: " + std::string(e.what()));
    }
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json(cfg))));
    return buf;
}

static bool is_pool_growing(Mode m) {
    return m == Mode::supervised_target || m == Mode::semi_random || m == Mode::ss_ada;
}

void validate(const ExperimentConfig& cfg) {
    seg::validate(cfg.model);
    if (cfg.budget_fraction < 0.0 || cfg.budget_fraction > 1.0)
        throw validation_error("budget_fraction must be in [0, 1]");
    if (cfg.init_fraction < 0.0 || cfg.init_fraction > 1.0)
        throw validation_error("init_fraction must be in [0, 1]");
    if (cfg.confidence_threshold < 0.0 || cfg.confidence_threshold > 1.0)
        throw validation_error("confidence_threshold must be in [0, 1]");
    if (cfg.upper_bound_u < 1.0) throw validation_error("upper_bound_u must be >= 1");
    if (cfg.lambda < 0.0) throw validation_error("lambda must be >= 0");
    if (cfg.epochs < 1) throw validation_error("epochs must be >= 1");
    if (cfg.optimizer.lr <= 0.0) throw validation_error("lr must be > 0");
    if (cfg.optimizer.batch_size < 1) throw validation_error("batch_size must be >= 1");
    if (cfg.optimizer.warmup_iters < 0) throw validation_error("warmup_iters must be >= 0");
    if (cfg.toggles && cfg.mode != Mode::ss_ada) {
        const Toggles p = mode_presets(cfg.mode);
        const Toggles t = *cfg.toggles;
        if (t.use_semi != p.use_semi || t.use_active != p.use_active ||
            t.use_weighting != p.use_weighting)
            throw validation_error("toggles for mode '" + to_string(cfg.mode) +
                                   "' must match the mode presets");
    }
    if (is_pool_growing(cfg.mode))
        acquire::make_schedule(cfg.epochs, cfg.triggers, 0); // placement check
}

// ---- sample stream ---------------------------------------------------------

SampleStream::SampleStream(std::vector<std::string> ids, uint64_t seed, std::string tag, int epoch)
    : ids_(std::move(ids)), seed_(seed), tag_(std::move(tag)), epoch_(epoch) {
    std::sort(ids_.begin(), ids_.end());
    reshuffle();
}

void SampleStream::reshuffle() {
    auto rng = rng_for(seed_, tag_, uint64_t(epoch_), pass_);
    std::shuffle(ids_.begin(), ids_.end(), rng);
    pos_ = 0;
}

std::string SampleStream::next() {
    if (ids_.empty()) throw contract_error("SampleStream: empty stream");
    if (pos_ >= ids_.size()) {
        ++pass_;
        reshuffle();
    }
    return ids_[pos_++];
}

// ---- dataset in memory -----------------------------------------------------

namespace {

struct LoadedDataset {
    datagen::DatasetSpec spec;
    std::vector<SampleRecord> records;
    std::unordered_map<std::string, size_t> index;
    std::vector<TensorF> images;          // all samples
    std::vector<LabelMap> direct_labels;  // source + target-val only
    std::vector<std::string> source_ids, target_train_ids, target_val_ids;

    const TensorF& image(const std::string& id) const { return images[index.at(id)]; }
    const LabelMap& direct_label(const std::string& id) const {
        return direct_labels[index.at(id)];
    }
};

LoadedDataset load_dataset(const std::filesystem::path& dir) {
    LoadedDataset ds;
    ds.spec = datagen::load_spec(datagen::spec_path(dir));
    const auto mpath = datagen::manifest_path(dir);
    ds.records = load_manifest(mpath);
    ds.images.resize(ds.records.size());
    ds.direct_labels.resize(ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        ds.index[r.sample_id] = i;
        ds.images[i] = to_tensor<float>(pngio::read_rgb8(resolve(mpath, r.image_path)));
        const bool target_train = r.domain == Domain::target && r.split == Split::train;
        if (!target_train)
            ds.direct_labels[i] = pngio::read_gray8(resolve(mpath, r.label_path));
        if (r.domain == Domain::source)
            ds.source_ids.push_back(r.sample_id);
        else if (r.split == Split::train)
            ds.target_train_ids.push_back(r.sample_id);
        else
            ds.target_val_ids.push_back(r.sample_id);
    }
    std::sort(ds.source_ids.begin(), ds.source_ids.end());
    std::sort(ds.target_train_ids.begin(), ds.target_train_ids.end());
    std::sort(ds.target_val_ids.begin(), ds.target_val_ids.end());
    return ds;
}

LabelMap argmax_map(const TensorF& prob) {
    LabelMap out(prob.height, prob.width);
    const size_t plane = prob.plane();
    for (size_t i = 0; i < plane; ++i) {
        int best = 0;
        float bv = prob.data[i];
        for (int c = 1; c < prob.channels; ++c) {
            const float v = prob.data[size_t(c) * plane + i];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out.ids[i] = uint8_t(best);
    }
    return out;
}

std::string iou_cell(const std::optional<double>& v) {
    return v ? fmt_g17(*v) : std::string("undef");
}

// Drops rows with epoch > last_epoch; used when resuming a run directory.
void truncate_csv_after_epoch(const std::filesystem::path& path, int last_epoch) {
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    std::vector<std::string> keep;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            keep.push_back(line);
            first = false;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        int epoch = std::atoi(line.substr(0, comma).c_str());
        if (epoch <= last_epoch) keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << "\n";
}

struct CsvLog {
    std::ofstream out;

    void open(const std::filesystem::path& path, const std::string& header) {
        const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
        out.open(path, std::ios::app);
        if (!out) throw io_error("cannot open log " + path.string());
        if (fresh) out << header << "\n";
    }

    void row(const std::string& line) {
        out << line << "\n";
        out.flush();
    }
};

} // namespace

// ---- run -------------------------------------------------------------------

namespace {

struct Runtime {
    ExperimentConfig cfg;
    Toggles toggles;
    std::filesystem::path run_dir;
    LoadedDataset ds;
    pools::PoolState pool;
    std::unique_ptr<pools::LabelOracle> oracle;
    acquire::BudgetSchedule schedule;
    seg::SegModel model;
    seg::Sgd<float> opt;
    weighting::ClassWeightVector weights;
    std::vector<nn::Workspace<float>> workspaces;
    CsvLog selection_log, weights_log, metrics_log;
    int start_epoch = 0; // last completed epoch (0 = fresh)

    bool source_active() const { return cfg.mode != Mode::supervised_target; }
    bool labeled_active() const { return cfg.mode != Mode::source_only; }
    bool unlabeled_active() const { return toggles.use_semi && cfg.lambda > 0.0; }
};

acquire::Strategy effective_strategy(const Runtime& rt) {
    if (rt.cfg.mode == Mode::ss_ada && rt.toggles.use_active) return rt.cfg.strategy;
    return acquire::Strategy::random;
}

// Scores the unlabeled pool with the current model and appends the chosen
// rows to the selection log.
std::vector<std::string> run_selection(Runtime& rt, int epoch, int quota) {
    std::vector<std::string> ids(rt.pool.unlabeled.begin(), rt.pool.unlabeled.end());
    std::sort(ids.begin(), ids.end());
    const acquire::Strategy strategy = effective_strategy(rt);

    std::vector<acquire::AcquisitionScore> scores;
    if (strategy == acquire::Strategy::random) {
        auto rng = rng_for(rt.cfg.seed, "select", uint64_t(epoch));
        scores = acquire::random_scores(ids, rng);
    } else {
        scores.resize(ids.size());
        parallel_for(int(ids.size()), [&](int i, int tid) {
            const TensorF prob = rt.model.infer(rt.ds.image(ids[size_t(i)]), rt.workspaces[tid]);
            double s = strategy == acquire::Strategy::entropy ? acquire::entropy_score(prob)
                                                              : acquire::confidence_score(prob);
            scores[size_t(i)] = {ids[size_t(i)], strategy, s, 0};
        });
    }
    auto ranked = acquire::rank_scores(std::move(scores));
    auto chosen = acquire::select(ranked, size_t(quota));

    std::map<std::string, const acquire::AcquisitionScore*> by_id;
    for (const auto& s : ranked) by_id[s.sample_id] = &s;
    for (const auto& id : chosen) {
        const auto* s = by_id.at(id);
        rt.selection_log.row(std::to_string(epoch) + "," + id + "," + acquire::to_string(strategy) +
                             "," + fmt_g17(s->score) + "," + std::to_string(s->rank));
    }
    return chosen;
}

// Predict on the labeled pool, refresh the class weights, log the table.
void refresh_weights(Runtime& rt, int epoch) {
    std::vector<std::string> ids(rt.pool.labeled.begin(), rt.pool.labeled.end());
    std::vector<LabelMap> gts;
    gts.reserve(ids.size());
    for (const auto& id : ids) gts.push_back(rt.oracle->fetch(id, rt.pool));

    weighting::ClassIoUVector iou;
    if (rt.cfg.weighting_scheme == WeightingScheme::iou) {
        std::vector<LabelMap> preds(ids.size());
        parallel_for(int(ids.size()), [&](int i, int tid) {
            preds[size_t(i)] =
                argmax_map(rt.model.infer(rt.ds.image(ids[size_t(i)]), rt.workspaces[tid]));
        });
        iou = weighting::per_class_iou(preds, gts, rt.cfg.model.num_classes);
        rt.weights = weighting::iou_weights(iou, rt.cfg.upper_bound_u);
    } else {
        iou.iou.resize(size_t(rt.cfg.model.num_classes));
        rt.weights =
            weighting::frequency_weights(gts, rt.cfg.model.num_classes, rt.cfg.upper_bound_u);
    }
    for (int c = 0; c < rt.cfg.model.num_classes; ++c) {
        rt.weights_log.row(std::to_string(epoch) + "," + std::to_string(c) + "," +
                           iou_cell(iou.iou[size_t(c)]) + "," + fmt_g17(rt.weights[size_t(c)]));
    }
}

metrics::MiouResult evaluate(Runtime& rt) {
    const auto& ids = rt.ds.target_val_ids;
    std::vector<LabelMap> preds(ids.size());
    std::vector<LabelMap> gts(ids.size());
    parallel_for(int(ids.size()), [&](int i, int tid) {
        preds[size_t(i)] = argmax_map(rt.model.infer(rt.ds.image(ids[size_t(i)]), rt.workspaces[tid]));
    });
    for (size_t i = 0; i < ids.size(); ++i) gts[i] = rt.ds.direct_label(ids[i]);
    return metrics::miou(preds, gts, rt.cfg.model.num_classes);
}

// One gradient-bearing pass in a training step.
struct GradTask {
    enum Kind { src, tgt_l, fp, s1, s2 } kind = src;
    const TensorF* image = nullptr;
    const LabelMap* label = nullptr;
    double scale = 1.0; // d(total)/d(this pass's mean CE)
    uint64_t drop_key = 0;
};

const char* loss_name(GradTask::Kind k) {
    switch (k) {
        case GradTask::src: return "L_s_l";
        case GradTask::tgt_l: return "L_t_l";
        case GradTask::fp: return "L_t_fp";
        case GradTask::s1: return "L_t_s1";
        default: return "L_t_s2";
    }
}

void train_epoch(Runtime& rt, int epoch) {
    const int B = rt.cfg.optimizer.batch_size;
    const uint64_t seed = rt.cfg.seed;

    std::vector<std::string> src_ids = rt.ds.source_ids;
    std::vector<std::string> lab_ids(rt.pool.labeled.begin(), rt.pool.labeled.end());
    std::vector<std::string> unl_ids(rt.pool.unlabeled.begin(), rt.pool.unlabeled.end());
    if (rt.cfg.mode == Mode::source_only) {
        lab_ids.clear();
        unl_ids.clear();
    }

    const bool use_src = rt.source_active() && !src_ids.empty();
    const bool use_lab = rt.labeled_active() && !lab_ids.empty();
    const bool use_unl = rt.unlabeled_active() && !unl_ids.empty();

    // the unlabeled stream paces the epoch; without one, the labeled target
    // stream (supervised / drained-pool semi modes) or the source stream
    size_t pacing = 0;
    if (use_unl)
        pacing = unl_ids.size();
    else if (rt.cfg.mode == Mode::supervised_target || (rt.toggles.use_semi && use_lab))
        pacing = lab_ids.size();
    else if (use_src)
        pacing = src_ids.size();
    else if (use_lab)
        pacing = lab_ids.size();
    const int steps = int((pacing + size_t(B) - 1) / size_t(B));

    SampleStream src_stream, lab_stream, unl_stream;
    if (use_src) src_stream = SampleStream(src_ids, seed, "stream_src", epoch);
    if (use_lab) lab_stream = SampleStream(lab_ids, seed, "stream_lab", epoch);
    if (use_unl) unl_stream = SampleStream(unl_ids, seed, "stream_unl", epoch);

    const perturb::WeakParams weak_params;
    const perturb::StrongParams strong_params;
    const losses::PseudoLabelConfig pseudo_cfg{rt.cfg.confidence_threshold};

    for (int step = 0; step < steps; ++step) {
        const uint64_t sbase = uint64_t(epoch) * 1000003ull + uint64_t(step);

        auto draw = [&](SampleStream& s) {
            std::vector<std::string> out;
            out.reserve(size_t(B));
            for (int i = 0; i < B; ++i) out.push_back(s.next());
            return out;
        };
        std::vector<std::string> src_batch, lab_batch, unl_batch;
        if (use_src) src_batch = draw(src_stream);
        if (use_lab) lab_batch = draw(lab_stream);
        if (use_unl) unl_batch = draw(unl_stream);

        // oracle access stays on the orchestration thread
        std::map<std::string, const LabelMap*> lab_gt;
        for (const auto& id : lab_batch)
            if (!lab_gt.count(id)) lab_gt[id] = &rt.oracle->fetch(id, rt.pool);

        struct Supervised {
            TensorF image;
            LabelMap label;
        };
        std::vector<Supervised> src_views(src_batch.size()), lab_views(lab_batch.size());
        struct Unlabeled {
            TensorF weak, strong1, strong2;
            LabelMap pseudo, pseudo1, pseudo2;
        };
        std::vector<Unlabeled> unl_views(unl_batch.size());

        const int prep_n = int(src_batch.size() + lab_batch.size() + unl_batch.size());
        parallel_for(prep_n, [&](int i, int tid) {
            nn::Workspace<float>& ws = rt.workspaces[tid];
            if (i < int(src_batch.size())) {
                const auto& id = src_batch[size_t(i)];
                auto rng = rng_for(seed, "aug_src", sbase, uint64_t(i));
                auto r = perturb::apply_weak(rt.ds.image(id), &rt.ds.direct_label(id), weak_params,
                                             rng);
                src_views[size_t(i)] = {std::move(r.image), std::move(*r.label)};
            } else if (i < int(src_batch.size() + lab_batch.size())) {
                const int k = i - int(src_batch.size());
                const auto& id = lab_batch[size_t(k)];
                auto rng = rng_for(seed, "aug_lab", sbase, uint64_t(k));
                auto r = perturb::apply_weak(rt.ds.image(id), lab_gt.at(id), weak_params, rng);
                lab_views[size_t(k)] = {std::move(r.image), std::move(*r.label)};
            } else {
                const int k = i - int(src_batch.size() + lab_batch.size());
                const auto& id = unl_batch[size_t(k)];
                auto rng = rng_for(seed, "aug_unl", sbase, uint64_t(k));
                auto r = perturb::apply_weak(rt.ds.image(id), nullptr, weak_params, rng);
                Unlabeled u;
                u.weak = std::move(r.image);
                const TensorF p_w = rt.model.infer(u.weak, ws);
                u.pseudo = losses::make_pseudo_label(p_w, pseudo_cfg);
                auto rng1 = rng_for(seed, "aug_s1", sbase, uint64_t(k));
                auto rng2 = rng_for(seed, "aug_s2", sbase, uint64_t(k));
                u.strong1 = perturb::apply_strong(u.weak, strong_params, rng1);
                u.strong2 = perturb::apply_strong(u.weak, strong_params, rng2);
                u.pseudo1 = u.pseudo;
                u.pseudo2 = u.pseudo;
                unl_views[size_t(k)] = std::move(u);
            }
        });

        // CutMix between strong views of different batch members
        if (use_unl && unl_views.size() > 1) {
            for (int view = 0; view < 2; ++view) {
                auto rng = rng_for(seed, view == 0 ? "cutmix_s1" : "cutmix_s2", sbase);
                for (size_t i = 0; i < unl_views.size(); ++i) {
                    if (uniform01(rng) >= strong_params.cutmix_prob) continue;
                    size_t j = uniform_index(rng, unl_views.size() - 1);
                    if (j >= i) ++j;
                    auto box = perturb::sample_cutmix_box(unl_views[i].weak.height,
                                                          unl_views[i].weak.width, strong_params,
                                                          rng);
                    if (view == 0) {
                        auto mixed =
                            perturb::cutmix(unl_views[i].strong1, unl_views[j].strong1,
                                            unl_views[i].pseudo, unl_views[j].pseudo, box);
                        unl_views[i].strong1 = std::move(mixed.image);
                        unl_views[i].pseudo1 = std::move(mixed.label);
                    } else {
                        auto mixed =
                            perturb::cutmix(unl_views[i].strong2, unl_views[j].strong2,
                                            unl_views[i].pseudo, unl_views[j].pseudo, box);
                        unl_views[i].strong2 = std::move(mixed.image);
                        unl_views[i].pseudo2 = std::move(mixed.label);
                    }
                }
            }
        }

        std::vector<GradTask> tasks;
        for (size_t i = 0; i < src_views.size(); ++i)
            tasks.push_back({GradTask::src, &src_views[i].image, &src_views[i].label,
                             1.0 / double(src_views.size()), 0});
        for (size_t i = 0; i < lab_views.size(); ++i)
            tasks.push_back({GradTask::tgt_l, &lab_views[i].image, &lab_views[i].label,
                             1.0 / double(lab_views.size()), 0});
        if (use_unl) {
            const double lam = rt.cfg.lambda / double(unl_views.size());
            for (size_t i = 0; i < unl_views.size(); ++i) {
                tasks.push_back({GradTask::fp, &unl_views[i].weak, &unl_views[i].pseudo, lam,
                                 sbase * 8ull + uint64_t(i)});
                tasks.push_back({GradTask::s1, &unl_views[i].strong1, &unl_views[i].pseudo1, lam, 0});
                tasks.push_back({GradTask::s2, &unl_views[i].strong2, &unl_views[i].pseudo2, lam, 0});
            }
        }

        std::vector<seg::ModelGrad<float>> grads(tasks.size());
        std::vector<double> scaled_losses(tasks.size(), 0.0);
        parallel_for(int(tasks.size()), [&](int i, int tid) {
            const GradTask& t = tasks[size_t(i)];
            nn::Workspace<float>& ws = rt.workspaces[tid];
            seg::SegModel::Trace trace;
            TensorF prob;
            if (t.kind == GradTask::fp) {
                auto rng = rng_for(seed, "feature_drop", t.drop_key);
                prob = rt.model.forward(*t.image, true, &rng, &trace, ws);
            } else {
                prob = rt.model.forward(*t.image, false, nullptr, &trace, ws);
            }
            TensorF dlogits;
            scaled_losses[size_t(i)] =
                losses::weighted_ce_softmax_backward(prob, *t.label, rt.weights, t.scale, dlogits);
            rt.model.backward(trace, dlogits, grads[size_t(i)], ws);
        });

        losses::LossBundle bundle;
        bundle.lambda = rt.cfg.lambda;
        for (size_t i = 0; i < tasks.size(); ++i) {
            const double v = scaled_losses[i];
            switch (tasks[i].kind) {
                case GradTask::src: bundle.source_labeled += v; break;
                case GradTask::tgt_l: bundle.target_labeled += v; break;
                case GradTask::fp: bundle.feature_perturb += v; break;
                case GradTask::s1: bundle.strong1 += v; break;
                case GradTask::s2: bundle.strong2 += v; break;
            }
        }
        if (rt.cfg.lambda > 0.0) {
            bundle.feature_perturb /= rt.cfg.lambda;
            bundle.strong1 /= rt.cfg.lambda;
            bundle.strong2 /= rt.cfg.lambda;
        }
        const double terms[5] = {bundle.source_labeled, bundle.target_labeled,
                                 bundle.feature_perturb, bundle.strong1, bundle.strong2};
        const GradTask::Kind kinds[5] = {GradTask::src, GradTask::tgt_l, GradTask::fp,
                                         GradTask::s1, GradTask::s2};
        for (int i = 0; i < 5; ++i) {
            if (!std::isfinite(terms[i]))
                throw std::runtime_error(std::string("non-finite loss term ") +
                                         loss_name(kinds[i]) + " at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
        }

        seg::ModelGrad<float> total;
        for (const auto& g : grads) total.add(g);
        rt.opt.step(rt.model, total);
    }
}

void write_metrics_row(Runtime& rt, int epoch, const metrics::MiouResult& r) {
    std::string row = std::to_string(epoch) + ",target_val," + fmt_g17(r.miou);
    for (const auto& v : r.per_class.iou) row += "," + iou_cell(v);
    rt.metrics_log.row(row);
}

std::string config_diff(const ExperimentConfig& stored, const ExperimentConfig& requested) {
    const json a = json::parse(to_json(stored));
    const json b = json::parse(to_json(requested));
    const json flat_a = a.flatten();
    const json flat_b = b.flatten();
    std::string diff;
    for (auto& [key, value] : flat_a.items()) {
        if (!flat_b.contains(key) || flat_b.at(key) != value)
            diff += "  " + key + ": " + value.dump() + " -> " +
                    (flat_b.contains(key) ? flat_b.at(key).dump() : "<missing>") + "\n";
    }
    for (auto& [key, value] : flat_b.items())
        if (!flat_a.contains(key)) diff += "  " + key + ": <missing> -> " + value.dump() + "\n";
    return diff;
}

} // namespace

RunResult run(const ExperimentConfig& user_cfg, const std::filesystem::path& run_dir) {
    ExperimentConfig cfg = user_cfg;

    // dataset first: the model's class count comes from the dataset spec
    if (cfg.dataset_dir.empty()) throw validation_error("dataset_dir is required");
    if (!std::filesystem::exists(datagen::spec_path(cfg.dataset_dir)))
        throw io_error("dataset not found at " + cfg.dataset_dir.string());

    Runtime rt;
    rt.ds = load_dataset(cfg.dataset_dir);
    cfg.model.num_classes = rt.ds.spec.num_classes;
    validate(cfg);
    rt.cfg = cfg;
    rt.toggles = cfg.resolved_toggles();
    rt.run_dir = run_dir;

    std::filesystem::create_directories(run_dir / files::checkpoints);

    const auto config_path = run_dir / files::config;
    bool resuming = false;
    if (std::filesystem::exists(config_path)) {
        json stored_json;
        try {
            std::ifstream in(config_path);
            in >> stored_json;
        } catch (const json::exception& e) {
            throw io_error("corrupt config in run dir: " + std::string(e.what()));
        }
        const ExperimentConfig stored = config_from(stored_json);
        if (config_hash(stored) != config_hash(cfg)) {
            throw validation_error("run dir " + run_dir.string() +
                                   " holds a different config; refusing to resume. Diff:\n" +
                                   config_diff(stored, cfg));
        }
        resuming = true;
    } else {
        json j = json::parse(to_json(cfg));
        j["config_hash"] = config_hash(cfg);
        std::ofstream out(config_path);
        if (!out) throw io_error("cannot write " + config_path.string());
        out << j.dump(2) << "\n";
    }

    const size_t M = rt.ds.target_train_ids.size();
    const bool growing = is_pool_growing(cfg.mode);
    if (growing) {
        const int n_s = int(std::llround(cfg.budget_fraction * double(M)));
        const size_t init_k = size_t(std::ceil(cfg.init_fraction * double(M)));
        if (size_t(n_s) + init_k > M)
            throw validation_error("budget_fraction + init_fraction exceed the target pool");
        rt.schedule = acquire::make_schedule(cfg.epochs, cfg.triggers, n_s);
    }

    rt.oracle = std::make_unique<pools::LabelOracle>(datagen::manifest_path(cfg.dataset_dir),
                                                     rt.ds.records);
    rt.weights = weighting::ClassWeightVector::ones(cfg.model.num_classes);
    rt.workspaces.resize(size_t(max_threads()));

    // find a checkpoint to resume from
    int resume_epoch = 0;
    std::filesystem::path resume_ckpt;
    if (resuming) {
        for (const auto& e : std::filesystem::directory_iterator(run_dir / files::checkpoints)) {
            const std::string name = e.path().filename().string();
            int ep = 0;
            if (std::sscanf(name.c_str(), "epoch_%d.ckpt", &ep) == 1 && ep > resume_epoch) {
                resume_epoch = ep;
                resume_ckpt = e.path();
            }
        }
    }

    if (!resume_ckpt.empty()) {
        seg::load_checkpoint(resume_ckpt, rt.model, &rt.opt);
        rt.start_epoch = resume_epoch;
    } else {
        rt.model = seg::SegModel(cfg.model, cfg.seed);
        rt.start_epoch = 0;
    }
    if (resuming) {
        truncate_csv_after_epoch(run_dir / files::metrics, rt.start_epoch);
        truncate_csv_after_epoch(run_dir / files::selection_log, rt.start_epoch);
        truncate_csv_after_epoch(run_dir / files::weights_log, rt.start_epoch);
    }
    rt.opt.lr = cfg.optimizer.lr;
    rt.opt.momentum = cfg.optimizer.momentum;
    rt.opt.weight_decay = cfg.optimizer.weight_decay;
    rt.opt.warmup_iters = cfg.optimizer.warmup_iters;

    // pool reconstruction: replay init + everything recorded by snapshots
    if (growing) {
        rt.pool = pools::init_pool(rt.ds.target_train_ids, cfg.init_fraction, cfg.seed);
    } else if (cfg.mode == Mode::joint) {
        rt.pool = pools::init_pool(rt.ds.target_train_ids, 1.0, cfg.seed);
    }
    if (rt.start_epoch > 0 && growing) {
        // restore labeled set from the latest snapshot at or before start_epoch
        int best = -1;
        for (int e = 0; e <= rt.start_epoch; ++e) {
            if (std::filesystem::exists(run_dir / files::pool_snapshot(e))) best = e;
        }
        if (best >= 0) {
            std::ifstream in(run_dir / files::pool_snapshot(best));
            json j;
            in >> j;
            std::vector<std::string> labeled = j.at("labeled").get<std::vector<std::string>>();
            std::vector<std::string> to_add;
            for (const auto& id : labeled)
                if (!rt.pool.is_labeled(id)) to_add.push_back(id);
            if (!to_add.empty()) pools::annotate(rt.pool, to_add, best);
        }
        // weights from the last logged table
        if (rt.toggles.use_weighting &&
            std::filesystem::exists(run_dir / files::weights_log)) {
            std::ifstream in(run_dir / files::weights_log);
            std::string line;
            std::getline(in, line); // header
            while (std::getline(in, line)) {
                int epoch = 0, cls = 0;
                char ioubuf[64];
                double w = 0;
                if (std::sscanf(line.c_str(), "%d,%d,%63[^,],%lf", &epoch, &cls, ioubuf, &w) == 4 &&
                    cls < cfg.model.num_classes)
                    rt.weights.weights[size_t(cls)] = w;
            }
            rt.weights.upper_bound = cfg.upper_bound_u;
        }
    }

    rt.selection_log.open(run_dir / files::selection_log, "epoch,sample_id,strategy,score,rank");
    rt.weights_log.open(run_dir / files::weights_log, "epoch,class_id,iou,weight");
    {
        std::string header = "epoch,split,miou";
        for (int c = 0; c < cfg.model.num_classes; ++c) header += ",iou_" + std::to_string(c);
        rt.metrics_log.open(run_dir / files::metrics, header);
    }

    if ((growing || cfg.mode == Mode::joint) && rt.start_epoch == 0)
        pools::save_pool_snapshot(rt.pool, 0, run_dir / files::pool_snapshot(0));

    metrics::MiouResult last_eval;
    size_t trigger_index = 0;
    if (growing) {
        // skip triggers already handled before the resume point
        while (trigger_index < rt.schedule.trigger_epochs.size() &&
               rt.schedule.trigger_epochs[trigger_index] <= rt.start_epoch)
            ++trigger_index;
    }

    for (int epoch = rt.start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        rt.oracle->set_epoch(epoch);

        if (growing && trigger_index < rt.schedule.trigger_epochs.size() &&
            rt.schedule.trigger_epochs[trigger_index] == epoch) {
            const int quota = rt.schedule.per_trigger_quota[trigger_index];
            auto chosen = run_selection(rt, epoch, quota);
            pools::annotate(rt.pool, chosen, epoch);
            pools::save_pool_snapshot(rt.pool, epoch, rt.run_dir / files::pool_snapshot(epoch));
            if (rt.toggles.use_weighting) refresh_weights(rt, epoch);
            ++trigger_index;
        }

        train_epoch(rt, epoch);
        last_eval = evaluate(rt);
        write_metrics_row(rt, epoch, last_eval);

        const bool at_trigger = growing && std::find(rt.schedule.trigger_epochs.begin(),
                                                     rt.schedule.trigger_epochs.end(),
                                                     epoch) != rt.schedule.trigger_epochs.end();
        if (at_trigger || epoch == cfg.epochs)
            seg::save_checkpoint(rt.run_dir / files::checkpoints / files::checkpoint(epoch),
                                 rt.model, rt.opt, epoch);
    }

    if (rt.start_epoch >= cfg.epochs) last_eval = evaluate(rt); // already-finished resume

    rt.oracle->write_access_log(run_dir / files::oracle_log);

    RunResult result;
    result.run_dir = run_dir;
    result.epochs_run = cfg.epochs - rt.start_epoch;
    result.final_miou = last_eval.miou;
    for (const auto& v : last_eval.per_class.iou)
        result.final_per_class_iou.push_back(v ? *v : std::nan(""));
    return result;
}

} // namespace ssada::trainer
