#include "pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <fstream>
#include <filesystem>

#include "support/oracles.hpp"

using namespace specrange;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        dir_ = fs::temp_directory_path() /
               ("specrange_pipe_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter_++));
        fs::create_directories(dir_);
    }
    ~TempDir() { fs::remove_all(dir_); }
    fs::path path(const std::string& name = "") const {
        return name.empty() ? dir_ : dir_ / name;
    }

private:
    static inline int counter_ = 0;
    fs::path dir_;
};

void write_band_csv(const fs::path& path, const oracles::BandData& data) {
    std::ofstream out(path);
    for (Index j = 0; j < data.spectra.n_vars(); ++j)
        out << data.spectra.wavelengths(j) << ',';
    out << "target\n";
    for (Index i = 0; i < data.spectra.n_samples(); ++i) {
        for (Index j = 0; j < data.spectra.n_vars(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", data.spectra.absorbance(i, j));
            out << buf << ',';
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", data.spectra.target(i));
        out << buf << "\n";
    }
}

// Compact configuration for fast synthetic runs: small grid, 3 folds.
PipelineConfig small_config(const fs::path& csv, const fs::path& out_dir,
                            PipelineKind kind, int n_train, int n_test) {
    PipelineConfig c;
    c.dataset.path = csv.string();
    c.preprocessing = {Preprocess::snv};
    c.split.train_count = n_train;
    c.split.test_count = n_test;
    c.pipeline = kind;
    c.params.P = 3;
    c.params.k_neighbors = 6;
    c.params.folds = 3;
    c.params.ica.k_max = 5;
    c.params.ica.threshold = 0.05;
    LsSvmGrid grid;
    grid.gammas = {1.0, 100.0, 10000.0};
    grid.sigmas = {0.5, 2.0, 8.0};
    c.params.lssvm_grid = grid;
    c.seed = 20240601;
    c.output_dir = out_dir.string();
    return c;
}

json strip_timings(json report) {
    report.erase("timings");
    return report;
}

}  // namespace

TEST(Pipeline, ClusterRunCoversInformativeBandAndPredicts) {
    TempDir tmp;
    const auto data = oracles::band_dataset(90, 36, 3, 1, true, 0.002, 404);
    write_band_csv(tmp.path("bands.csv"), data);
    PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                      PipelineKind::cluster_mi_lssvm, 60, 30);
    // The target depends on an absolute band amplitude, which per-row SNV
    // scaling would erase; run the projection on the raw spectra.
    cfg.preprocessing.clear();
    const json report = run_pipeline(cfg);

    EXPECT_EQ(report["method"], "cluster_mi_lssvm");
    const double test_nmse = report["stages"]["fit"]["test_nmse"].get<double>();
    EXPECT_LT(test_nmse, 0.05);

    // One of the selected ranges must intersect the informative band.
    const auto [lo, hi] = data.informative_range;
    bool covered = false;
    for (const auto& r : report["selected_wavelength_ranges"]) {
        const double a = r[0].get<double>();
        const double b = r[1].get<double>();
        if (b >= lo && a <= hi) covered = true;
    }
    EXPECT_TRUE(covered);

    // Artifacts persisted.
    EXPECT_TRUE(fs::exists(tmp.path("out") / "report.json"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "clustering.json"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "selection.json"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "fit.json"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "features_train.csv"));
}

TEST(Pipeline, DeterministicReportsModuloTimings) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 24, 3, 0, true, 0.002, 405);
    write_band_csv(tmp.path("bands.csv"), data);
    PipelineConfig a = small_config(tmp.path("bands.csv"), tmp.path("out_a"),
                                    PipelineKind::cluster_mi_lssvm, 40, 20);
    PipelineConfig b = small_config(tmp.path("bands.csv"), tmp.path("out_b"),
                                    PipelineKind::cluster_mi_lssvm, 40, 20);
    b.output_dir = tmp.path("out_b").string();
    json ra = run_pipeline(a);
    json rb = run_pipeline(b);
    ra.erase("timings");
    rb.erase("timings");
    // output_dir differs by construction; normalize it out of the echo.
    ra["config"].erase("output_dir");
    rb["config"].erase("output_dir");
    EXPECT_EQ(ra.dump(), rb.dump());
}

TEST(Pipeline, ReportRoundTripsThroughSerialization) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 24, 2, 0, false, 0.002, 406);
    write_band_csv(tmp.path("bands.csv"), data);
    const PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                            PipelineKind::lssvm_full, 40, 20);
    const json report = run_pipeline(cfg);
    const json reread = load_json_file((tmp.path("out") / "report.json").string());
    EXPECT_EQ(report.dump(), reread.dump());
}

TEST(Pipeline, RangeIndexConsistency) {
    TempDir tmp;
    const auto data = oracles::band_dataset(80, 30, 3, 2, true, 0.002, 407);
    write_band_csv(tmp.path("bands.csv"), data);
    const PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                            PipelineKind::cluster_mi_lssvm, 55, 25);
    const json report = run_pipeline(cfg);

    // Each selected range must reproduce the boundaries of its feature index.
    const json clustering = load_json_file((tmp.path("out") / "clustering.json").string());
    const auto& boundaries = clustering["boundaries"];
    const auto& selected = report["selected_feature_indices"];
    const auto& ranges = report["selected_wavelength_ranges"];
    const auto& wl = report["plot_data"]["wavelengths"];
    ASSERT_EQ(selected.size(), ranges.size());
    for (std::size_t s = 0; s < selected.size(); ++s) {
        const int cluster_idx = selected[s].get<int>();
        const int lo_var = boundaries[static_cast<std::size_t>(cluster_idx)].get<int>();
        const int hi_var = boundaries[static_cast<std::size_t>(cluster_idx) + 1].get<int>() - 1;
        EXPECT_DOUBLE_EQ(ranges[s][0].get<double>(), wl[static_cast<std::size_t>(lo_var)].get<double>());
        EXPECT_DOUBLE_EQ(ranges[s][1].get<double>(), wl[static_cast<std::size_t>(hi_var)].get<double>());
    }
}

TEST(Pipeline, StageIsolationRefitMatches) {
    TempDir tmp;
    const auto data = oracles::band_dataset(70, 28, 3, 1, true, 0.002, 408);
    write_band_csv(tmp.path("bands.csv"), data);
    const PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                            PipelineKind::cluster_mi_lssvm, 48, 22);
    const json report = run_pipeline(cfg);
    const json refit = refit_final_stage(tmp.path("out").string());
    EXPECT_EQ(refit.dump(), report["stages"]["fit"].dump());
}

TEST(Pipeline, IcaRunProducesComponentArtifacts) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 40, 4, 1, true, 0.005, 409);
    write_band_csv(tmp.path("bands.csv"), data);
    PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                      PipelineKind::ica_mi_lssvm, 40, 20);
    cfg.params.ica.k_max = 6;
    cfg.params.ica.threshold = 0.02;
    const json report = run_pipeline(cfg);

    EXPECT_TRUE(fs::exists(tmp.path("out") / "ica.json"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "ica_sources.csv"));
    EXPECT_TRUE(fs::exists(tmp.path("out") / "ica_mixing.csv"));
    EXPECT_GE(report["stages"]["projection"]["k"].get<int>(), 1);
    EXPECT_FALSE(report["selected_wavelength_ranges"].empty());
    // Every selected range maps back to a component index.
    EXPECT_EQ(report["selected_feature_indices"].size(),
              report["selected_wavelength_ranges"].size());
}

TEST(Pipeline, BaselinesReportExpectedFeatureCounts) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 24, 3, 0, false, 0.002, 410);
    write_band_csv(tmp.path("bands.csv"), data);

    PipelineConfig full = small_config(tmp.path("bands.csv"), tmp.path("out_full"),
                                       PipelineKind::lssvm_full, 40, 20);
    const json rf = run_pipeline(full);
    EXPECT_EQ(rf["stages"]["fit"]["n_features"].get<int>(), 24);
    EXPECT_EQ(rf["n_latent_variables"].get<int>(), 24);

    PipelineConfig plsr = small_config(tmp.path("bands.csv"), tmp.path("out_plsr"),
                                       PipelineKind::plsr_baseline, 40, 20);
    const json rp = run_pipeline(plsr);
    EXPECT_EQ(rp["stages"]["fit"]["model_kind"], "plsr");
    EXPECT_GE(rp["stages"]["fit"]["hyperparameters"]["n_components"].get<int>(), 1);
    EXPECT_EQ(rp["n_latent_variables"].get<int>(),
              rp["stages"]["fit"]["hyperparameters"]["n_components"].get<int>());
    EXPECT_TRUE(std::isfinite(rp["stages"]["fit"]["test_nmse"].get<double>()));
}

TEST(Pipeline, EmitPlotDataShapes) {
    TempDir tmp;
    const auto data = oracles::band_dataset(70, 30, 3, 1, true, 0.002, 411);
    write_band_csv(tmp.path("bands.csv"), data);
    const PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                            PipelineKind::cluster_mi_lssvm, 48, 22);
    const json report = run_pipeline(cfg);

    emit_plot_data(report, "ranges_over_mean_spectrum", tmp.path("ranges.csv").string());
    std::ifstream in(tmp.path("ranges.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "wavelength,mean_absorbance,selected,boundary");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 30);

    emit_plot_data(report, "mi_trajectory", tmp.path("mi.csv").string());
    std::ifstream in2(tmp.path("mi.csv"));
    std::getline(in2, line);
    EXPECT_EQ(line, "step,joint_mi");
    rows = 0;
    while (std::getline(in2, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 3);  // P = 3

    emit_plot_data(report, "cluster_cv_curve", tmp.path("cv.csv").string());
    EXPECT_TRUE(fs::exists(tmp.path("cv.csv")));

    // ICA components are not available for a clustering run.
    try {
        emit_plot_data(report, "ica_components", tmp.path("nope.csv").string());
        FAIL() << "expected NotAvailableError";
    } catch (const NotAvailableError& e) {
        EXPECT_NE(std::string(e.what()).find("ica_mi_lssvm"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, CompareRunsTableAndMismatchRefusal) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 24, 3, 0, false, 0.002, 412);
    write_band_csv(tmp.path("bands.csv"), data);

    const PipelineConfig full = small_config(tmp.path("bands.csv"), tmp.path("out1"),
                                             PipelineKind::lssvm_full, 40, 20);
    const PipelineConfig plsr = small_config(tmp.path("bands.csv"), tmp.path("out2"),
                                             PipelineKind::plsr_baseline, 40, 20);
    const json r1 = run_pipeline(full);
    const json r2 = run_pipeline(plsr);

    const Comparison single = compare_runs({r1});
    EXPECT_EQ(single.table.size(), 1u);
    const Comparison both = compare_runs({r1, r2});
    EXPECT_EQ(both.table.size(), 2u);
    EXPECT_NE(both.csv.find("lssvm_full"), std::string::npos);
    EXPECT_NE(both.csv.find("plsr_baseline"), std::string::npos);
    EXPECT_NE(both.text.find("NMSE test"), std::string::npos);

    // A run with a different split must be refused.
    PipelineConfig other = small_config(tmp.path("bands.csv"), tmp.path("out3"),
                                        PipelineKind::lssvm_full, 42, 18);
    const json r3 = run_pipeline(other);
    EXPECT_THROW(compare_runs({r1, r3}), ConflictError);
}

TEST(PipelineConfig, SeedIsMandatory) {
    json j;
    j["dataset"] = {{"path", "x.csv"}};
    j["split"] = {{"train_count", 10}, {"test_count", 5}};
    j["pipeline"] = "lssvm_full";
    j["output_dir"] = "out";
    try {
        config_from_json(j);
        FAIL() << "expected InvalidArgument";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos) << e.what();
    }
}

TEST(PipelineConfig, RoundTripsThroughJson) {
    PipelineConfig c = preset_config("wine-table2");
    c.dataset.path = "wine.csv";
    c.seed = 7;
    c.output_dir = "out";
    c.pipeline = PipelineKind::ica_mi_lssvm;
    const json j = config_to_json(c);
    const PipelineConfig back = config_from_json(j);
    EXPECT_EQ(config_to_json(back).dump(), j.dump());
}

TEST(PipelineConfig, PresetsEncodeBenchmarkProtocols) {
    const PipelineConfig tec = preset_config("tecator-table1");
    EXPECT_TRUE(tec.dataset.tecator_fetch);
    EXPECT_EQ(tec.split.train_count, 172);
    EXPECT_EQ(tec.split.test_count, 43);
    EXPECT_EQ(tec.params.ica.k_max, 12);
    EXPECT_EQ(tec.params.P, 7);
    EXPECT_EQ(tec.params.k_neighbors, 6);
    EXPECT_EQ(tec.params.folds, 3);

    const PipelineConfig wine = preset_config("wine-table2");
    EXPECT_EQ(wine.split.train_count, 91);
    EXPECT_EQ(wine.split.test_count, 30);
    EXPECT_EQ(wine.split.excluded, (std::vector<Index>{33, 34, 83}));
    EXPECT_EQ(wine.params.ica.k_max, 30);
    EXPECT_TRUE(wine.params.ica.normalize_rows);

    EXPECT_THROW(preset_config("unknown"), InvalidArgument);
}

TEST(Pipeline, OutputDirLocking) {
    TempDir tmp;
    const auto data = oracles::band_dataset(60, 24, 3, 0, false, 0.002, 413);
    write_band_csv(tmp.path("bands.csv"), data);
    const PipelineConfig cfg = small_config(tmp.path("bands.csv"), tmp.path("out"),
                                            PipelineKind::lssvm_full, 40, 20);

    // Hold the lock the way a concurrent run would.
    fs::create_directories(tmp.path("out"));
    const int fd = ::open((tmp.path("out") / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
    ASSERT_GE(fd, 0);
    ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
    EXPECT_THROW(run_pipeline(cfg), ConflictError);
    ::flock(fd, LOCK_UN);
    ::close(fd);

    EXPECT_NO_THROW(run_pipeline(cfg));
}

TEST(Pipeline, StageTaggedErrors) {
    TempDir tmp;
    PipelineConfig cfg;
    cfg.dataset.path = tmp.path("missing.csv").string();
    cfg.split.train_count = 5;
    cfg.split.test_count = 5;
    cfg.pipeline = PipelineKind::lssvm_full;
    cfg.seed = 1;
    cfg.output_dir = tmp.path("out").string();
    try {
        run_pipeline(cfg);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("stage 'load'"), std::string::npos) << e.what();
    }
}
