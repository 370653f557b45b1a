// Command-line front end for the specrange shared library.
//
// Verbs:
//   run           execute one pipeline (or --all) from a config or preset
//   fetch-tecator download/cache the Tecator benchmark and print its shape
//   plot-data     export plot-source CSV from a stored run report
//   compare       tabulate {method, latent variables, test NMSE} across runs

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specrange/specrange.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(sr_status rc, const std::string& context) {
    std::cerr << "error: " << context << ": " << sr_last_error() << "\n";
    return static_cast<int>(rc);
}

std::string take_string(char* owned) {
    std::string out = owned ? owned : "";
    sr_string_free(owned);
    return out;
}

struct RunOptions {
    std::string config_path;
    std::string preset;
    std::string pipeline = "cluster_mi_lssvm";
    std::string dataset_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> target_column;
    std::optional<int> folds;
    std::optional<int> p_forward;
    std::optional<int> k_neighbors;
    bool all = false;
};

json build_config(const RunOptions& opt, const std::string& pipeline) {
    json cfg;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in.good()) throw std::runtime_error("cannot open config " + opt.config_path);
        in >> cfg;
    } else if (!opt.preset.empty()) {
        char* raw = nullptr;
        if (sr_preset_config(opt.preset.c_str(), pipeline.c_str(), &raw) != SR_OK)
            throw std::runtime_error(sr_last_error());
        cfg = json::parse(take_string(raw));
    } else {
        throw std::runtime_error("run needs --config or --preset");
    }

    cfg["pipeline"] = pipeline;
    if (!opt.dataset_path.empty()) {
        cfg["dataset"]["path"] = opt.dataset_path;
        cfg["dataset"]["tecator_fetch"] = false;
    }
    if (opt.target_column) cfg["dataset"]["target_column"] = *opt.target_column;
    if (opt.seed) cfg["seed"] = *opt.seed;
    if (!opt.output_dir.empty()) cfg["output_dir"] = opt.output_dir;
    if (opt.folds) cfg["parameters"]["folds"] = *opt.folds;
    if (opt.p_forward) cfg["parameters"]["P"] = *opt.p_forward;
    if (opt.k_neighbors) cfg["parameters"]["k_neighbors"] = *opt.k_neighbors;
    return cfg;
}

int do_run(const RunOptions& opt) {
    std::vector<std::string> pipelines;
    if (opt.all) {
        pipelines = {"cluster_mi_lssvm", "ica_mi_lssvm", "lssvm_full", "plsr_baseline"};
    } else {
        pipelines = {opt.pipeline};
    }

    std::vector<std::string> report_paths;
    for (const std::string& pipeline : pipelines) {
        json cfg;
        try {
            cfg = build_config(opt, pipeline);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        if (opt.all) {
            const std::string base = cfg.value("output_dir", "specrange-out");
            cfg["output_dir"] = (fs::path(base) / pipeline).string();
        }

        char* report_raw = nullptr;
        const sr_status rc = sr_run_pipeline(cfg.dump().c_str(), &report_raw);
        if (rc != SR_OK) return fail(rc, "run " + pipeline);
        const json report = json::parse(take_string(report_raw));

        const std::string out_dir = cfg["output_dir"].get<std::string>();
        report_paths.push_back((fs::path(out_dir) / "report.json").string());
        std::cout << pipeline << ": test NMSE "
                  << report["stages"]["fit"]["test_nmse"].get<double>() << " with "
                  << report["n_latent_variables"].get<int>()
                  << " (latent) variables; report in " << out_dir << "\n";
        for (const auto& w : report["warnings"])
            std::cout << "  warning: " << w.get<std::string>() << "\n";
    }

    if (opt.all && report_paths.size() > 1) {
        std::vector<const char*> paths;
        for (const auto& p : report_paths) paths.push_back(p.c_str());
        char* text = nullptr;
        const sr_status rc = sr_compare_runs(paths.data(), static_cast<int>(paths.size()),
                                             nullptr, &text);
        if (rc != SR_OK) return fail(rc, "compare");
        std::cout << "\n" << take_string(text);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"specrange: data-driven wavelength-range selection for smooth spectra"};
    app.require_subcommand(1);

    // ---- run
    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "Execute a selection/regression pipeline");
    run->add_option("--config", run_opt.config_path, "Pipeline configuration JSON file");
    run->add_option("--preset", run_opt.preset,
                    "Named preset: tecator-table1 or wine-table2");
    run->add_option("--pipeline", run_opt.pipeline,
                    "cluster_mi_lssvm | ica_mi_lssvm | lssvm_full | plsr_baseline");
    run->add_flag("--all", run_opt.all, "Run all four pipelines and print a comparison");
    run->add_option("--dataset", run_opt.dataset_path, "CSV dataset path (overrides preset)");
    run->add_option("--target-column", run_opt.target_column,
                    "0-based target column, -1 for last");
    run->add_option("--seed", run_opt.seed, "Global RNG seed (mandatory unless in config)");
    run->add_option("--output", run_opt.output_dir, "Output directory for artifacts");
    run->add_option("--folds", run_opt.folds, "Cross-validation fold count");
    run->add_option("--forward-steps", run_opt.p_forward, "Forward-selection length P");
    run->add_option("--mi-neighbors", run_opt.k_neighbors, "k-NN count for the MI estimator");

    // ---- fetch-tecator
    std::string fetch_url;
    std::string fetch_cache = ".specrange-cache";
    auto* fetch = app.add_subcommand("fetch-tecator", "Download and cache the Tecator dataset");
    fetch->add_option("--url", fetch_url, "Source URL, local path or file:// reference");
    fetch->add_option("--cache-dir", fetch_cache, "Cache directory");

    // ---- plot-data
    std::string plot_report, plot_what, plot_out;
    auto* plot = app.add_subcommand("plot-data", "Export plot-source CSV from a report");
    plot->add_option("--report", plot_report, "report.json produced by run")->required();
    plot->add_option("--what", plot_what,
                     "ranges_over_mean_spectrum | ica_components | mi_trajectory | "
                     "cluster_cv_curve")
        ->required();
    plot->add_option("--out", plot_out, "Output CSV path")->required();

    // ---- compare
    std::vector<std::string> cmp_reports;
    std::string cmp_csv, cmp_text;
    auto* cmp = app.add_subcommand("compare", "Compare reports from one dataset/split");
    cmp->add_option("reports", cmp_reports, "report.json files")->required()->expected(-1);
    cmp->add_option("--out-csv", cmp_csv, "Write the table as CSV here");
    cmp->add_option("--out-text", cmp_text, "Write the pretty table here");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return do_run(run_opt);

    if (fetch->parsed()) {
        sr_spectra* s = nullptr;
        const sr_status rc = sr_spectra_fetch_tecator(
            fetch_url.empty() ? nullptr : fetch_url.c_str(), fetch_cache.c_str(), &s);
        if (rc != SR_OK) return fail(rc, "fetch-tecator");
        int64_t n = 0, p = 0;
        sr_spectra_dims(s, &n, &p);
        std::cout << "tecator: " << n << " samples x " << p
                  << " spectral variables cached under " << fetch_cache << "\n";
        sr_spectra_free(s);
        return 0;
    }

    if (plot->parsed()) {
        const sr_status rc =
            sr_emit_plot_data(plot_report.c_str(), plot_what.c_str(), plot_out.c_str());
        if (rc != SR_OK) return fail(rc, "plot-data");
        std::cout << "wrote " << plot_out << "\n";
        return 0;
    }

    if (cmp->parsed()) {
        std::vector<const char*> paths;
        for (const auto& p : cmp_reports) paths.push_back(p.c_str());
        char* csv = nullptr;
        char* text = nullptr;
        const sr_status rc = sr_compare_runs(paths.data(), static_cast<int>(paths.size()),
                                             &csv, &text);
        if (rc != SR_OK) return fail(rc, "compare");
        const std::string csv_str = take_string(csv);
        const std::string text_str = take_string(text);
        std::cout << text_str;
        if (!cmp_csv.empty()) {
            std::ofstream out(cmp_csv);
            out << csv_str;
        }
        if (!cmp_text.empty()) {
            std::ofstream out(cmp_text);
            out << text_str;
        }
        return 0;
    }
    return 0;
}
