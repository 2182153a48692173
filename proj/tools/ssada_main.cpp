#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssada/acquire.hpp"
#include "ssada/datagen.hpp"
#include "ssada/metrics.hpp"
#include "ssada/model.hpp"
#include "ssada/parallel.hpp"
#include "ssada/png_io.hpp"
#include "ssada/report.hpp"
#include "ssada/strfmt.hpp"
#include "ssada/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssada;

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kIoError = 2;

void refuse_existing(const fs::path& path, bool force) {
    if (force) return;
    if (fs::exists(path) && !fs::is_empty(path))
        throw validation_error("output " + path.string() +
                               " already exists; pass --force to overwrite");
}

struct GenArgs {
    std::string out;
    std::string spec_file;
    bool force = false;
    std::optional<uint64_t> seed;
    std::optional<int> height, width, classes, source_count, target_count, val_count, blur;
    std::optional<double> rare_fraction, hue, noise;
    std::vector<int> rare_classes;
};

int cmd_gen(const GenArgs& a) {
    datagen::DatasetSpec spec =
        a.spec_file.empty() ? datagen::default_spec() : datagen::load_spec(a.spec_file);
    if (a.seed) spec.seed = *a.seed;
    if (a.height) spec.image_height = *a.height;
    if (a.width) spec.image_width = *a.width;
    if (a.classes) spec.num_classes = *a.classes;
    if (a.source_count) spec.source_count = *a.source_count;
    if (a.target_count) spec.target_count = *a.target_count;
    if (a.val_count) spec.target_val_count = *a.val_count;
    if (a.rare_fraction) spec.rare_fraction = *a.rare_fraction;
    if (!a.rare_classes.empty()) spec.rare_class_ids = a.rare_classes;
    if (a.hue) spec.shift.hue_offset = *a.hue;
    if (a.noise) spec.shift.noise_sigma = *a.noise;
    if (a.blur) spec.shift.blur_radius = *a.blur;

    refuse_existing(a.out, a.force);
    const auto records = datagen::generate(spec, a.out);
    std::cout << "wrote " << records.size() << " samples to " << a.out << "\n";
    return kOk;
}

struct TrainArgs {
    std::string config_file;
    std::string out;
    bool force = false;
    bool resume = false;
    std::optional<std::string> mode, strategy, weighting_scheme, dataset;
    std::optional<uint64_t> seed;
    std::optional<int> epochs, batch_size, warmup;
    std::optional<double> budget, init_fraction, u, lambda, lr, conf_threshold;
    std::vector<int> triggers;
};

int cmd_train(const TrainArgs& a) {
    trainer::ExperimentConfig cfg;
    if (!a.config_file.empty()) cfg = trainer::load_config_file(a.config_file);
    if (a.mode) cfg.mode = trainer::mode_from(*a.mode);
    if (a.dataset) cfg.dataset_dir = *a.dataset;
    if (a.strategy) cfg.strategy = acquire::strategy_from(*a.strategy);
    if (a.weighting_scheme) cfg.weighting_scheme = trainer::weighting_scheme_from(*a.weighting_scheme);
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.batch_size) cfg.optimizer.batch_size = *a.batch_size;
    if (a.warmup) cfg.optimizer.warmup_iters = *a.warmup;
    if (a.budget) cfg.budget_fraction = *a.budget;
    if (a.init_fraction) cfg.init_fraction = *a.init_fraction;
    if (a.u) cfg.upper_bound_u = *a.u;
    if (a.lambda) cfg.lambda = *a.lambda;
    if (a.lr) cfg.optimizer.lr = *a.lr;
    if (a.conf_threshold) cfg.confidence_threshold = *a.conf_threshold;
    if (!a.triggers.empty()) cfg.triggers = a.triggers;

    if (!a.resume) refuse_existing(a.out, a.force);
    const auto result = trainer::run(cfg, a.out);
    std::cout << "run complete: final target-val miou " << fmt_g(result.final_miou, 6) << " ("
              << result.run_dir.string() << ")\n";
    return kOk;
}

struct ScoreArgs {
    std::string checkpoint, dataset, out, strategy = "entropy";
    uint64_t seed = 0;
    bool force = false;
};

int cmd_score(const ScoreArgs& a) {
    seg::SegModel model;
    seg::load_checkpoint(a.checkpoint, model, nullptr);
    const auto records = load_manifest(datagen::manifest_path(a.dataset));
    const auto strategy = acquire::strategy_from(a.strategy);

    std::vector<std::string> ids;
    std::vector<TensorF> images;
    for (const auto& r : records) {
        if (r.domain == Domain::target && r.split == Split::train) {
            ids.push_back(r.sample_id);
            images.push_back(to_tensor<float>(
                pngio::read_rgb8(resolve(datagen::manifest_path(a.dataset), r.image_path))));
        }
    }

    std::vector<acquire::AcquisitionScore> scores;
    if (strategy == acquire::Strategy::random) {
        auto rng = rng_for(a.seed, "select", 0);
        scores = acquire::random_scores(ids, rng);
    } else {
        scores.resize(ids.size());
        std::vector<nn::Workspace<float>> ws{size_t(max_threads())};
        parallel_for(int(ids.size()), [&](int i, int tid) {
            const TensorF prob = model.infer(images[size_t(i)], ws[size_t(tid)]);
            const double s = strategy == acquire::Strategy::entropy
                                 ? acquire::entropy_score(prob)
                                 : acquire::confidence_score(prob);
            scores[size_t(i)] = {ids[size_t(i)], strategy, s, 0};
        });
    }
    const auto ranked = acquire::rank_scores(std::move(scores));

    refuse_existing(a.out, a.force);
    std::ofstream out(a.out);
    if (!out) throw io_error("cannot write " + a.out);
    out << "sample_id,strategy,score,rank\n";
    for (const auto& s : ranked)
        out << s.sample_id << "," << acquire::to_string(s.strategy) << "," << fmt_g17(s.score)
            << "," << s.rank << "\n";
    std::cout << "scored " << ranked.size() << " samples -> " << a.out << "\n";
    return kOk;
}

struct WeightsArgs {
    std::string pred_dir, gt_dir, out, scheme = "iou";
    int num_classes = 6;
    double u = 2.0;
    bool force = false;
};

int cmd_weights(const WeightsArgs& a) {
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(a.gt_dir))
        if (e.path().extension() == ".png") names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw validation_error("no label PNGs in " + a.gt_dir);

    std::vector<LabelMap> preds, gts;
    for (const auto& n : names) {
        const fs::path p = fs::path(a.pred_dir) / n;
        if (!fs::exists(p)) throw io_error("missing prediction for " + n.string());
        preds.push_back(pngio::read_gray8(p));
        gts.push_back(pngio::read_gray8(fs::path(a.gt_dir) / n));
    }

    weighting::ClassIoUVector iou = weighting::per_class_iou(preds, gts, a.num_classes);
    weighting::ClassWeightVector w =
        a.scheme == "iou" ? weighting::iou_weights(iou, a.u)
                          : weighting::frequency_weights(gts, a.num_classes, a.u);

    refuse_existing(a.out, a.force);
    std::ofstream out(a.out);
    if (!out) throw io_error("cannot write " + a.out);
    out << "class_id,iou,weight\n";
    for (int c = 0; c < a.num_classes; ++c)
        out << c << ","
            << (a.scheme == "iou" && iou.iou[size_t(c)] ? fmt_g17(*iou.iou[size_t(c)])
                                                        : std::string("undef"))
            << "," << fmt_g17(w[size_t(c)]) << "\n";
    std::cout << "wrote weight table -> " << a.out << "\n";
    return kOk;
}

struct EvalArgs {
    std::string checkpoint, dataset, out, split = "val";
    bool force = false;
};

int cmd_eval(const EvalArgs& a) {
    seg::SegModel model;
    seg::load_checkpoint(a.checkpoint, model, nullptr);
    const auto spec = datagen::load_spec(datagen::spec_path(a.dataset));
    const auto records = load_manifest(datagen::manifest_path(a.dataset));
    const Split want = a.split == "train" ? Split::train : Split::val;

    std::vector<LabelMap> preds, gts;
    std::vector<TensorF> images;
    for (const auto& r : records) {
        if (r.domain != Domain::target || r.split != want) continue;
        images.push_back(to_tensor<float>(
            pngio::read_rgb8(resolve(datagen::manifest_path(a.dataset), r.image_path))));
        gts.push_back(pngio::read_gray8(resolve(datagen::manifest_path(a.dataset), r.label_path)));
    }
    if (images.empty()) throw validation_error("no target samples in split '" + a.split + "'");

    preds.resize(images.size());
    std::vector<nn::Workspace<float>> ws{size_t(max_threads())};
    parallel_for(int(images.size()), [&](int i, int tid) {
        const TensorF prob = model.infer(images[size_t(i)], ws[size_t(tid)]);
        LabelMap lm(prob.height, prob.width);
        const size_t plane = prob.plane();
        for (size_t px = 0; px < plane; ++px) {
            int best = 0;
            float bv = prob.data[px];
            for (int c = 1; c < prob.channels; ++c)
                if (prob.data[size_t(c) * plane + px] > bv) {
                    bv = prob.data[size_t(c) * plane + px];
                    best = c;
                }
            lm.ids[px] = uint8_t(best);
        }
        preds[size_t(i)] = std::move(lm);
    });

    const auto r = metrics::miou(preds, gts, spec.num_classes);
    refuse_existing(a.out, a.force);
    std::ofstream out(a.out);
    if (!out) throw io_error("cannot write " + a.out);
    out << "split,miou";
    for (int c = 0; c < spec.num_classes; ++c) out << ",iou_" << c;
    out << "\n" << a.split << "," << fmt_g17(r.miou);
    for (const auto& v : r.per_class.iou)
        out << "," << (v ? fmt_g17(*v) : std::string("undef"));
    out << "\n";
    std::cout << "miou(" << a.split << ") = " << fmt_g(r.miou, 6) << " -> " << a.out << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SS-ADA desk-scale semantic segmentation experiments"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic source/target dataset");
    g->add_option("--out", gen.out)->required();
    g->add_option("--spec", gen.spec_file);
    g->add_option("--seed", gen.seed);
    g->add_option("--height", gen.height);
    g->add_option("--width", gen.width);
    g->add_option("--classes", gen.classes);
    g->add_option("--source-count", gen.source_count);
    g->add_option("--target-count", gen.target_count);
    g->add_option("--val-count", gen.val_count);
    g->add_option("--rare-fraction", gen.rare_fraction);
    g->add_option("--rare-classes", gen.rare_classes);
    g->add_option("--hue", gen.hue);
    g->add_option("--noise", gen.noise);
    g->add_option("--blur", gen.blur);
    g->add_flag("--force", gen.force);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "run a training experiment");
    t->add_option("--config", train.config_file);
    t->add_option("--out", train.out)->required();
    t->add_option("--mode", train.mode);
    t->add_option("--dataset", train.dataset);
    t->add_option("--strategy", train.strategy);
    t->add_option("--weighting-scheme", train.weighting_scheme);
    t->add_option("--seed", train.seed);
    t->add_option("--epochs", train.epochs);
    t->add_option("--batch-size", train.batch_size);
    t->add_option("--warmup", train.warmup);
    t->add_option("--budget", train.budget);
    t->add_option("--init-fraction", train.init_fraction);
    t->add_option("--u", train.u);
    t->add_option("--lambda", train.lambda);
    t->add_option("--lr", train.lr);
    t->add_option("--confidence-threshold", train.conf_threshold);
    t->add_option("--triggers", train.triggers);
    t->add_flag("--force", train.force);
    t->add_flag("--resume", train.resume);

    ScoreArgs score;
    auto* s = app.add_subcommand("score", "score target-train samples with a checkpoint");
    s->add_option("--checkpoint", score.checkpoint)->required();
    s->add_option("--dataset", score.dataset)->required();
    s->add_option("--out", score.out)->required();
    s->add_option("--strategy", score.strategy);
    s->add_option("--seed", score.seed);
    s->add_flag("--force", score.force);

    WeightsArgs weights;
    auto* w = app.add_subcommand("weights", "compute class weights from prediction/label dirs");
    w->add_option("--pred", weights.pred_dir)->required();
    w->add_option("--gt", weights.gt_dir)->required();
    w->add_option("--out", weights.out)->required();
    w->add_option("--classes", weights.num_classes);
    w->add_option("--u", weights.u);
    w->add_option("--scheme", weights.scheme)->check(CLI::IsMember({"iou", "frequency"}));
    w->add_flag("--force", weights.force);

    EvalArgs eval_args;
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    e->add_option("--checkpoint", eval_args.checkpoint)->required();
    e->add_option("--dataset", eval_args.dataset)->required();
    e->add_option("--out", eval_args.out)->required();
    e->add_option("--split", eval_args.split)->check(CLI::IsMember({"train", "val"}));
    e->add_flag("--force", eval_args.force);

    std::vector<std::string> report_runs;
    std::string report_out;
    auto* r = app.add_subcommand("report", "aggregate run directories into tables and plots");
    r->add_option("--runs", report_runs)->required()->expected(-1);
    r->add_option("--out", report_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? kOk : kValidationError;
    }

    try {
        if (g->parsed()) return cmd_gen(gen);
        if (t->parsed()) return cmd_train(train);
        if (s->parsed()) return cmd_score(score);
        if (w->parsed()) return cmd_weights(weights);
        if (e->parsed()) return cmd_eval(eval_args);
        if (r->parsed()) {
            std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
            report::write_report(dirs, report_out);
            std::cout << "report written to " << report_out << "\n";
            return kOk;
        }
    } catch (const io_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kIoError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kValidationError;
    }
    return kValidationError;
}
