#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cluster.hpp"
#include "errors.hpp"
#include "ica.hpp"
#include "models.hpp"
#include "mutual_info.hpp"
#include "spectra.hpp"

namespace specrange {

using json = nlohmann::json;

enum class PipelineKind { cluster_mi_lssvm, ica_mi_lssvm, lssvm_full, plsr_baseline };

PipelineKind pipeline_from_string(const std::string& name);
std::string to_string(PipelineKind kind);

struct DatasetSpec {
    std::string path;          // CSV path; empty when fetching
    bool tecator_fetch = false;
    std::string url;           // optional override for the fetch
    std::string cache_dir = ".specrange-cache";
    int target_column = -1;    // -1: last column
    bool has_header = true;
};

struct SplitConfig {
    // Either explicit index sets, or counts taken over dataset order after
    // removing the excluded indices.
    std::optional<SplitSpec> explicit_split;
    int train_count = -1;
    int test_count = -1;
    std::vector<Index> excluded;

    SplitSpec resolve(Index n_samples) const;
};

struct IcaParams {
    double threshold = 0.01;
    int k_max = 30;
    std::optional<std::uint64_t> seed;  // derived from the global seed if unset
    bool normalize_rows = false;
    double mass_fraction = 0.9;  // squared-mass share defining a component's range
};

struct ClusterParams {
    std::optional<std::pair<int, int>> m_range;
};

struct PipelineParams {
    int P = 7;
    int k_neighbors = 6;
    int folds = 3;
    IcaParams ica;
    ClusterParams cluster;
    std::optional<LsSvmGrid> lssvm_grid;  // defaults when unset
    int plsr_max_components = 30;
};

struct PipelineConfig {
    DatasetSpec dataset;
    std::vector<Preprocess> preprocessing;
    SplitConfig split;
    PipelineKind pipeline = PipelineKind::cluster_mi_lssvm;
    PipelineParams params;
    std::uint64_t seed = 0;  // mandatory; parsing without it fails
    std::string output_dir;
    std::string preset;  // provenance echo only
};

PipelineConfig config_from_json(const json& j);
json config_to_json(const PipelineConfig& config);

// Named presets encoding the two benchmark protocols; the pipeline kind,
// seed and output_dir still have to be chosen by the caller.
PipelineConfig preset_config(const std::string& name);

// Executes preprocess -> projection -> MI selection -> model fit, persists
// every intermediate artifact under config.output_dir, and returns the run
// report. Identical config and seed give identical reports (timings aside).
json run_pipeline(const PipelineConfig& config);

// Re-runs only the final modelling stage from the artifacts persisted by
// run_pipeline; returns the fit section of the report.
json refit_final_stage(const std::string& output_dir);

// Writes plot-source CSVs from a run report. what: ranges_over_mean_spectrum,
// ica_components, mi_trajectory or cluster_cv_curve.
void emit_plot_data(const json& report, const std::string& what, const std::string& out_path);

struct Comparison {
    std::string csv;
    std::string text;
    json table;
};

// Table of {method, latent variable count, test NMSE} across runs on the
// same dataset and split; refuses mismatched splits.
Comparison compare_runs(const std::vector<json>& reports);

json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace specrange
