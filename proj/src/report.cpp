#include "ssada/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ssada/datagen.hpp"
#include "ssada/metrics.hpp"
#include "ssada/plot.hpp"
#include "ssada/png_io.hpp"
#include "ssada/strfmt.hpp"

namespace ssada::report {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

// Label of the ablation row: which modules participate.
std::string mode_label(const trainer::ExperimentConfig& cfg) {
    const trainer::Toggles t = cfg.resolved_toggles();
    if (cfg.mode == trainer::Mode::ss_ada) {
        std::string label = "semi";
        label += t.use_active ? "+active" : "+random";
        if (t.use_weighting) label += "+weighting";
        return label;
    }
    return trainer::to_string(cfg.mode);
}

} // namespace

RunSummary load_run(const std::filesystem::path& run_dir) {
    RunSummary s;
    s.dir = run_dir;
    {
        std::ifstream in(run_dir / trainer::files::config);
        if (!in) throw io_error("not a run dir (missing config.json): " + run_dir.string());
        std::stringstream ss;
        ss << in.rdbuf();
        s.config = trainer::config_from_json(ss.str());
    }
    std::ifstream in(run_dir / trainer::files::metrics);
    if (!in) throw io_error("missing metrics.csv in " + run_dir.string());
    std::string line;
    std::getline(in, line); // header
    std::vector<std::string> last_cells;
    while (std::getline(in, line)) {
        auto cells = split_csv(line);
        if (cells.size() < 3) continue;
        s.miou_by_epoch.emplace_back(std::atoi(cells[0].c_str()), std::atof(cells[2].c_str()));
        last_cells = cells;
    }
    if (!s.miou_by_epoch.empty()) {
        s.final_miou = s.miou_by_epoch.back().second;
        for (size_t i = 3; i < last_cells.size(); ++i) {
            if (last_cells[i] == "undef")
                s.final_per_class_iou.push_back(std::nullopt);
            else
                s.final_per_class_iou.push_back(std::atof(last_cells[i].c_str()));
        }
    }
    return s;
}

SelectionRatios selection_ratios(const std::filesystem::path& run_dir) {
    RunSummary s = load_run(run_dir);
    const auto dataset_dir = s.config.dataset_dir;
    const auto spec = datagen::load_spec(datagen::spec_path(dataset_dir));
    const auto records = load_manifest(datagen::manifest_path(dataset_dir));

    std::set<std::string> selected_ids;
    {
        std::ifstream in(run_dir / trainer::files::selection_log);
        if (in) {
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                auto cells = split_csv(line);
                if (cells.size() >= 2) selected_ids.insert(cells[1]);
            }
        }
    }
    if (selected_ids.empty())
        throw validation_error("run has an empty selection log: " + run_dir.string());

    std::vector<LabelMap> selected, pool;
    for (const auto& r : records) {
        if (r.domain != Domain::target || r.split != Split::train) continue;
        LabelMap lm =
            pngio::read_gray8(resolve(datagen::manifest_path(dataset_dir), r.label_path));
        if (selected_ids.count(r.sample_id)) selected.push_back(lm);
        pool.push_back(std::move(lm));
    }
    const auto rows = metrics::selection_frequency_report(selected, pool, spec.num_classes);

    SelectionRatios out;
    for (const auto& r : rows) {
        out.class_ids.push_back(r.class_id);
        out.freq_selected.push_back(r.freq_selected);
        out.freq_pool.push_back(r.freq_pool);
        out.ratio.push_back(r.ratio);
    }
    return out;
}

void write_report(const std::vector<std::filesystem::path>& run_dirs,
                  const std::filesystem::path& out_dir) {
    if (run_dirs.empty()) throw validation_error("report: no run directories given");
    std::filesystem::create_directories(out_dir);

    std::vector<RunSummary> runs;
    for (const auto& d : run_dirs) runs.push_back(load_run(d));

    {
        std::ofstream out(out_dir / "budget_curve.csv");
        out << "mode,budget,seed,final_miou\n";
        std::vector<const RunSummary*> order;
        for (const auto& r : runs) order.push_back(&r);
        std::sort(order.begin(), order.end(), [](const RunSummary* a, const RunSummary* b) {
            const auto ka = std::tuple(mode_label(a->config), a->config.budget_fraction,
                                       a->config.seed);
            const auto kb = std::tuple(mode_label(b->config), b->config.budget_fraction,
                                       b->config.seed);
            return ka < kb;
        });
        for (const auto* r : order)
            out << mode_label(r->config) << "," << fmt_g17(r->config.budget_fraction) << ","
                << r->config.seed << "," << fmt_g17(r->final_miou) << "\n";
    }

    {
        // mean final mIoU per (mode, budget); one curve per mode
        std::map<std::string, std::map<double, std::pair<double, int>>> agg;
        for (const auto& r : runs) {
            auto& cell = agg[mode_label(r.config)][r.config.budget_fraction];
            cell.first += r.final_miou;
            cell.second += 1;
        }
        plot::LinePlot p;
        p.title = "final miou vs labeled fraction";
        p.x_label = "labeled fraction of target train";
        p.y_label = "miou";
        size_t i = 0;
        for (const auto& [label, by_budget] : agg) {
            plot::Series s;
            s.name = label;
            plot::series_color(i++, s.r, s.g, s.b);
            for (const auto& [budget, cell] : by_budget)
                s.points.emplace_back(budget, cell.first / cell.second);
            p.add(std::move(s));
        }
        p.save(out_dir / "budget_curve.png");
    }

    {
        std::map<std::string, std::vector<double>> by_mode;
        std::map<std::string, trainer::Toggles> toggles;
        for (const auto& r : runs) {
            by_mode[mode_label(r.config)].push_back(r.final_miou);
            toggles[mode_label(r.config)] = r.config.resolved_toggles();
        }
        std::ofstream out(out_dir / "ablation_grid.csv");
        out << "mode,use_semi,use_active,use_weighting,seeds,mean_final_miou\n";
        for (const auto& [label, vals] : by_mode) {
            double mean = 0;
            for (double v : vals) mean += v;
            mean /= double(vals.size());
            const auto& t = toggles[label];
            out << label << "," << (t.use_semi ? 1 : 0) << "," << (t.use_active ? 1 : 0) << ","
                << (t.use_weighting ? 1 : 0) << "," << vals.size() << "," << fmt_g17(mean) << "\n";
        }
    }

    {
        plot::LinePlot p;
        p.title = "validation miou by epoch";
        p.x_label = "epoch";
        p.y_label = "miou";
        for (size_t i = 0; i < runs.size(); ++i) {
            plot::Series s;
            s.name = mode_label(runs[i].config) + " s" + std::to_string(runs[i].config.seed);
            plot::series_color(i, s.r, s.g, s.b);
            for (const auto& [e, m] : runs[i].miou_by_epoch) s.points.emplace_back(e, m);
            p.add(std::move(s));
        }
        p.save(out_dir / "miou_vs_epoch.png");
    }

    {
        std::ofstream out(out_dir / "selection_frequency.csv");
        out << "run,class_id,freq_selected,freq_pool,ratio\n";
        for (const auto& r : runs) {
            if (!std::filesystem::exists(r.dir / trainer::files::selection_log)) continue;
            SelectionRatios ratios;
            try {
                ratios = selection_ratios(r.dir);
            } catch (const validation_error&) {
                continue; // modes without selections
            }
            for (size_t i = 0; i < ratios.class_ids.size(); ++i) {
                out << r.dir.filename().string() << "," << ratios.class_ids[i] << ","
                    << fmt_g17(ratios.freq_selected[i]) << "," << fmt_g17(ratios.freq_pool[i])
                    << ","
                    << (ratios.ratio[i] ? fmt_g17(*ratios.ratio[i]) : std::string("undef"))
                    << "\n";
            }
        }
    }
}

} // namespace ssada::report
