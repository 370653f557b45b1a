#include "pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tecator.hpp"

namespace fs = std::filesystem;

namespace specrange {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Exclusive advisory lock on <dir>/.lock for the lifetime of a run.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) {
        const fs::path lock_path = dir / ".lock";
        fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) throw IoError("cannot open lock file " + lock_path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw ConflictError("output directory " + dir.string() +
                                " is in use by another run");
        }
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    int fd_ = -1;
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string split_digest(const std::string& source, const SplitSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, source.data(), source.size());
    auto mix = [&h](char tag, const std::vector<Index>& idx) {
        h = fnv1a(h, &tag, 1);
        for (Index i : idx) {
            const auto v = static_cast<std::uint64_t>(i);
            h = fnv1a(h, &v, sizeof(v));
        }
    };
    mix('T', spec.train_indices);
    mix('E', spec.test_indices);
    mix('X', spec.excluded_indices);
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const Matrix& m, const Vector* extra = nullptr) {
    std::ofstream out(path);
    if (!out.good()) throw IoError("cannot write " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j));
        if (extra) out << "," << format_double((*extra)(i));
        out << "\n";
    }
}

Matrix read_matrix_csv(const std::string& path, Vector* extra = nullptr) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty CSV: " + path);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestError("no data rows in " + path);
    const Index n = static_cast<Index>(rows.size());
    const Index total = static_cast<Index>(rows[0].size());
    const Index cols = extra ? total - 1 : total;
    Matrix m(n, cols);
    if (extra) extra->resize(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (extra) (*extra)(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(cols)];
    }
    return m;
}

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

// JSON cannot carry infinities; failed CV scores serialize as the string "inf".
json finite_or_inf(double v) {
    return std::isfinite(v) ? json(v) : json("inf");
}

}  // namespace

PipelineKind pipeline_from_string(const std::string& name) {
    if (name == "cluster_mi_lssvm") return PipelineKind::cluster_mi_lssvm;
    if (name == "ica_mi_lssvm") return PipelineKind::ica_mi_lssvm;
    if (name == "lssvm_full") return PipelineKind::lssvm_full;
    if (name == "plsr_baseline") return PipelineKind::plsr_baseline;
    throw InvalidArgument("unknown pipeline: " + name +
                          " (expected cluster_mi_lssvm, ica_mi_lssvm, lssvm_full or "
                          "plsr_baseline)");
}

std::string to_string(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::cluster_mi_lssvm: return "cluster_mi_lssvm";
        case PipelineKind::ica_mi_lssvm: return "ica_mi_lssvm";
        case PipelineKind::lssvm_full: return "lssvm_full";
        case PipelineKind::plsr_baseline: return "plsr_baseline";
    }
    return "?";
}

SplitSpec SplitConfig::resolve(Index n_samples) const {
    SplitSpec spec;
    if (explicit_split) {
        spec = *explicit_split;
        // Any unlisted sample is treated as excluded.
        std::vector<bool> seen(static_cast<std::size_t>(n_samples), false);
        for (Index i : spec.train_indices) {
            if (i >= 0 && i < n_samples) seen[static_cast<std::size_t>(i)] = true;
        }
        for (Index i : spec.test_indices) {
            if (i >= 0 && i < n_samples) seen[static_cast<std::size_t>(i)] = true;
        }
        for (Index i : spec.excluded_indices) {
            if (i >= 0 && i < n_samples) seen[static_cast<std::size_t>(i)] = true;
        }
        for (Index i = 0; i < n_samples; ++i)
            if (!seen[static_cast<std::size_t>(i)]) spec.excluded_indices.push_back(i);
    } else {
        if (train_count < 1 || test_count < 1)
            throw InvalidArgument("split: train_count and test_count must be positive");
        std::vector<bool> is_excluded(static_cast<std::size_t>(n_samples), false);
        for (Index i : excluded) {
            if (i < 0 || i >= n_samples)
                throw InvalidArgument("split: excluded index " + std::to_string(i) +
                                      " out of range");
            is_excluded[static_cast<std::size_t>(i)] = true;
        }
        spec.excluded_indices = excluded;
        Index taken = 0;
        for (Index i = 0; i < n_samples; ++i) {
            if (is_excluded[static_cast<std::size_t>(i)]) continue;
            if (taken < train_count) {
                spec.train_indices.push_back(i);
            } else if (taken < train_count + test_count) {
                spec.test_indices.push_back(i);
            } else {
                spec.excluded_indices.push_back(i);
            }
            ++taken;
        }
        if (static_cast<int>(spec.train_indices.size()) != train_count ||
            static_cast<int>(spec.test_indices.size()) != test_count)
            throw InvalidArgument(
                "split: dataset has too few samples for train_count=" +
                std::to_string(train_count) + " and test_count=" + std::to_string(test_count));
    }
    spec.validate(n_samples);
    return spec;
}

namespace {

std::vector<Index> json_to_indices(const json& a) {
    std::vector<Index> out;
    for (const auto& v : a) out.push_back(v.get<Index>());
    return out;
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");

    if (!j.contains("dataset")) throw InvalidArgument("config: 'dataset' is required");
    const json& d = j.at("dataset");
    c.dataset.path = d.value("path", "");
    c.dataset.tecator_fetch = d.value("tecator_fetch", false);
    c.dataset.url = d.value("url", "");
    c.dataset.cache_dir = d.value("cache_dir", ".specrange-cache");
    c.dataset.target_column = d.value("target_column", -1);
    c.dataset.has_header = d.value("has_header", true);
    if (c.dataset.path.empty() && !c.dataset.tecator_fetch)
        throw InvalidArgument("config: dataset needs a 'path' or 'tecator_fetch: true'");

    for (const auto& p : j.value("preprocessing", json::array()))
        c.preprocessing.push_back(preprocess_from_string(p.get<std::string>()));

    if (j.contains("split")) {
        const json& s = j.at("split");
        if (s.contains("train_indices") || s.contains("test_indices")) {
            SplitSpec spec;
            spec.train_indices = json_to_indices(s.value("train_indices", json::array()));
            spec.test_indices = json_to_indices(s.value("test_indices", json::array()));
            spec.excluded_indices = json_to_indices(s.value("excluded_indices", json::array()));
            c.split.explicit_split = std::move(spec);
        } else {
            c.split.train_count = s.value("train_count", -1);
            c.split.test_count = s.value("test_count", -1);
            c.split.excluded = json_to_indices(s.value("excluded_indices", json::array()));
        }
    } else {
        throw InvalidArgument("config: 'split' is required");
    }

    if (!j.contains("pipeline")) throw InvalidArgument("config: 'pipeline' is required");
    c.pipeline = pipeline_from_string(j.at("pipeline").get<std::string>());

    if (j.contains("parameters")) {
        const json& p = j.at("parameters");
        c.params.P = p.value("P", 7);
        c.params.k_neighbors = p.value("k_neighbors", 6);
        c.params.folds = p.value("folds", 3);
        c.params.plsr_max_components = p.value("plsr_max_components", 30);
        if (p.contains("ica")) {
            const json& q = p.at("ica");
            c.params.ica.threshold = q.value("threshold", 0.01);
            c.params.ica.k_max = q.value("k_max", 30);
            if (q.contains("seed")) c.params.ica.seed = q.at("seed").get<std::uint64_t>();
            c.params.ica.normalize_rows = q.value("normalize_rows", false);
            c.params.ica.mass_fraction = q.value("mass_fraction", 0.9);
        }
        if (p.contains("cluster") && p.at("cluster").contains("m_range")) {
            const auto& r = p.at("cluster").at("m_range");
            c.params.cluster.m_range = {r.at(0).get<int>(), r.at(1).get<int>()};
        }
        if (p.contains("lssvm_grid")) {
            LsSvmGrid grid;
            for (const auto& g : p.at("lssvm_grid").at("gammas")) grid.gammas.push_back(g.get<double>());
            for (const auto& s : p.at("lssvm_grid").at("sigmas")) grid.sigmas.push_back(s.get<double>());
            c.params.lssvm_grid = std::move(grid);
        }
    }

    if (!j.contains("seed"))
        throw InvalidArgument("config: 'seed' is mandatory (runs must be reproducible)");
    c.seed = j.at("seed").get<std::uint64_t>();

    if (!j.contains("output_dir") || j.at("output_dir").get<std::string>().empty())
        throw InvalidArgument("config: 'output_dir' is required");
    c.output_dir = j.at("output_dir").get<std::string>();
    c.preset = j.value("preset", "");

    if (c.params.P < 1 || c.params.P > 12)
        throw InvalidArgument("config: parameters.P must be in [1, 12]");
    if (c.params.k_neighbors < 1)
        throw InvalidArgument("config: parameters.k_neighbors must be positive");
    if (c.params.folds < 2) throw InvalidArgument("config: parameters.folds must be >= 2");
    if (!(c.params.ica.threshold > 0.0 && c.params.ica.threshold < 1.0))
        throw InvalidArgument("config: parameters.ica.threshold must be in (0,1)");
    if (!(c.params.ica.mass_fraction > 0.0 && c.params.ica.mass_fraction <= 1.0))
        throw InvalidArgument("config: parameters.ica.mass_fraction must be in (0,1]");
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json j;
    json d;
    if (!c.dataset.path.empty()) d["path"] = c.dataset.path;
    d["tecator_fetch"] = c.dataset.tecator_fetch;
    if (!c.dataset.url.empty()) d["url"] = c.dataset.url;
    d["cache_dir"] = c.dataset.cache_dir;
    d["target_column"] = c.dataset.target_column;
    d["has_header"] = c.dataset.has_header;
    j["dataset"] = std::move(d);

    json pp = json::array();
    for (auto m : c.preprocessing) pp.push_back(to_string(m));
    j["preprocessing"] = std::move(pp);

    json s;
    if (c.split.explicit_split) {
        s["train_indices"] = c.split.explicit_split->train_indices;
        s["test_indices"] = c.split.explicit_split->test_indices;
        s["excluded_indices"] = c.split.explicit_split->excluded_indices;
    } else {
        s["train_count"] = c.split.train_count;
        s["test_count"] = c.split.test_count;
        s["excluded_indices"] = c.split.excluded;
    }
    j["split"] = std::move(s);

    j["pipeline"] = to_string(c.pipeline);

    json p;
    p["P"] = c.params.P;
    p["k_neighbors"] = c.params.k_neighbors;
    p["folds"] = c.params.folds;
    p["plsr_max_components"] = c.params.plsr_max_components;
    json q;
    q["threshold"] = c.params.ica.threshold;
    q["k_max"] = c.params.ica.k_max;
    if (c.params.ica.seed) q["seed"] = *c.params.ica.seed;
    q["normalize_rows"] = c.params.ica.normalize_rows;
    q["mass_fraction"] = c.params.ica.mass_fraction;
    p["ica"] = std::move(q);
    if (c.params.cluster.m_range)
        p["cluster"] = {{"m_range", {c.params.cluster.m_range->first,
                                     c.params.cluster.m_range->second}}};
    if (c.params.lssvm_grid)
        p["lssvm_grid"] = {{"gammas", c.params.lssvm_grid->gammas},
                           {"sigmas", c.params.lssvm_grid->sigmas}};
    j["parameters"] = std::move(p);

    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    if (!c.preset.empty()) j["preset"] = c.preset;
    return j;
}

PipelineConfig preset_config(const std::string& name) {
    PipelineConfig c;
    c.preset = name;
    c.preprocessing = {Preprocess::snv};
    if (name == "tecator-table1") {
        c.dataset.tecator_fetch = true;
        c.split.train_count = kTecatorTrain;               // 172
        c.split.test_count = kTecatorSamples - kTecatorTrain;  // 43
        c.params.ica.k_max = 12;  // instability cap observed on this dataset
        c.params.ica.threshold = 0.01;
    } else if (name == "wine-table2") {
        // The wine data is privately distributed; any CSV of matching shape
        // (124 samples x 256 wavenumbers) runs through the same protocol.
        c.split.train_count = 91;
        c.split.test_count = 30;
        c.split.excluded = {33, 34, 83};  // published outliers, 0-based
        c.params.ica.k_max = 30;
        c.params.ica.threshold = 0.01;
        c.params.ica.normalize_rows = true;
    } else {
        throw InvalidArgument("unknown preset: " + name +
                              " (expected tecator-table1 or wine-table2)");
    }
    return c;
}

// ----------------------------------------------------------------- stages

namespace {

struct StageClock {
    json timings = json::array();
    std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

    void lap(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(now - mark).count();
        timings.push_back({{"stage", stage}, {"seconds", secs}});
        mark = now;
    }
};

template <typename F>
auto run_stage(const std::string& name, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), "stage '" + name + "': " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::internal, "stage '" + name + "': " + e.what());
    }
}

struct ProjectionResult {
    Matrix train_features;
    Matrix test_features;
    json artifact;               // clustering.json / ica.json content
    std::optional<Clustering> clustering;
    std::optional<IcaModel> ica_model;
};

// Smallest index window holding at least `fraction` of the squared mass.
std::pair<int, int> mass_window(const Eigen::Ref<const Vector>& row, double fraction) {
    const Index n = row.size();
    const double total = row.squaredNorm();
    const double need = fraction * total;
    int best_lo = 0, best_hi = static_cast<int>(n) - 1;
    Index lo = 0;
    double acc = 0.0;
    for (Index hi = 0; hi < n; ++hi) {
        acc += row(hi) * row(hi);
        while (acc - row(lo) * row(lo) >= need && lo < hi) {
            acc -= row(lo) * row(lo);
            ++lo;
        }
        if (acc >= need && (hi - lo) < (best_hi - best_lo)) {
            best_lo = static_cast<int>(lo);
            best_hi = static_cast<int>(hi);
        }
    }
    return {best_lo, best_hi};
}

json wavelength_range(const Vector& wavelengths, int lo_var, int hi_var) {
    const double a = wavelengths(lo_var);
    const double b = wavelengths(hi_var);
    return json::array({std::min(a, b), std::max(a, b)});
}

}  // namespace

json run_pipeline(const PipelineConfig& config) {
    if (config.output_dir.empty()) throw InvalidArgument("run_pipeline: output_dir not set");
    fs::create_directories(config.output_dir);
    DirLock lock(config.output_dir);
    StageClock clock;

    json report;
    report["schema_version"] = 1;
    report["method"] = to_string(config.pipeline);
    report["config"] = config_to_json(config);
    json warnings = json::array();

    // ---- load
    SpectraSet full = run_stage("load", [&] {
        if (config.dataset.tecator_fetch && config.dataset.path.empty())
            return fetch_tecator(config.dataset.url, config.dataset.cache_dir);
        CsvLayout layout;
        layout.target_column = config.dataset.target_column;
        layout.has_header = config.dataset.has_header;
        return load_csv(config.dataset.path, layout);
    });
    clock.lap("load");

    // ---- split
    const std::string source = config.dataset.tecator_fetch && config.dataset.path.empty()
                                   ? "tecator:" + (config.dataset.url.empty()
                                                       ? std::string(kTecatorDefaultUrl)
                                                       : config.dataset.url)
                                   : "csv:" + config.dataset.path;
    SplitSpec split = run_stage("split", [&] { return config.split.resolve(full.n_samples()); });
    auto [train, test] = run_stage("split", [&] { return apply_split(full, split); });
    clock.lap("split");

    // ---- preprocess (fitted on train where the method has state)
    run_stage("preprocess", [&] {
        for (Preprocess method : config.preprocessing) {
            if (method == Preprocess::msc) {
                const MscReference ref = msc_fit(train);
                train = msc_apply(train, ref);
                test = msc_apply(test, ref);
            } else {
                train = preprocess(train, method);
                test = preprocess(test, method);
            }
        }
        return 0;
    });
    clock.lap("preprocess");

    json dataset_info;
    dataset_info["source"] = source;
    dataset_info["n_samples"] = full.n_samples();
    dataset_info["n_vars"] = full.n_vars();
    dataset_info["n_vars_processed"] = train.n_vars();
    dataset_info["axis_unit"] = train.axis_unit == AxisUnit::nanometer ? "nanometer" : "wavenumber";
    dataset_info["synthetic_axis"] = train.synthetic_axis;
    dataset_info["n_train"] = train.n_samples();
    dataset_info["n_test"] = test.n_samples();
    dataset_info["n_excluded"] = split.excluded_indices.size();
    dataset_info["split_digest"] = split_digest(source, split);
    report["dataset"] = dataset_info;

    json stages;

    // ---- projection
    ProjectionResult proj = run_stage("projection", [&]() -> ProjectionResult {
        ProjectionResult out;
        switch (config.pipeline) {
            case PipelineKind::cluster_mi_lssvm: {
                const ClusterTree tree = build_tree(train);
                const auto choice = select_num_clusters(tree, train, config.params.folds,
                                                        config.params.cluster.m_range);
                const Clustering clustering = cut(tree, choice.m_best);
                out.train_features = cluster_features(train, clustering);
                out.test_features = cluster_features(test, clustering);
                out.clustering = clustering;

                json art;
                art["M"] = choice.m_best;
                art["boundaries"] = clustering.boundaries;
                json ranges = json::array();
                for (int jc = 0; jc < clustering.num_clusters(); ++jc) {
                    const auto [lo, hi] = clustering.interval(jc);
                    ranges.push_back(wavelength_range(train.wavelengths, lo, hi));
                }
                art["wavelength_ranges"] = std::move(ranges);
                json cvs = json::array();
                for (double s : choice.scores) cvs.push_back(finite_or_inf(s));
                art["cv_scores"] = {{"m", choice.m_values}, {"nmse", std::move(cvs)}};
                out.artifact = std::move(art);
                break;
            }
            case PipelineKind::ica_mi_lssvm: {
                const auto probe = whiten(train.absorbance, 1);
                int k_max = config.params.ica.k_max;
                if (k_max > probe.transform.rank) {
                    k_max = probe.transform.rank;
                    warnings.push_back("ica: k_max clamped to usable rank " +
                                       std::to_string(k_max));
                }
                const auto choice = choose_k(train.absorbance, config.params.ica.threshold, k_max);
                if (!choice.threshold_met)
                    warnings.push_back(
                        "ica: reconstruction threshold not reached within k_max; using k=" +
                        std::to_string(choice.k));
                IcaOptions opts;
                opts.seed = config.params.ica.seed ? *config.params.ica.seed
                                                   : hash_combine(config.seed, "ica");
                const IcaModel model = fast_ica(train.absorbance, choice.k, opts);
                if (!model.converged)
                    warnings.push_back("ica: not converged after " +
                                       std::to_string(model.iterations) +
                                       " iterations (residual " +
                                       format_double(model.final_delta) + ")");
                out.train_features =
                    projection_features(model, config.params.ica.normalize_rows);
                out.test_features = project_spectra(model, test.absorbance,
                                                    config.params.ica.normalize_rows);
                out.ica_model = model;

                json art;
                art["k"] = model.k;
                art["error_curve"] = choice.error_curve;
                art["threshold"] = config.params.ica.threshold;
                art["threshold_met"] = choice.threshold_met;
                art["converged"] = model.converged;
                art["iterations"] = model.iterations;
                art["final_delta"] = model.final_delta;
                art["normalize_rows"] = config.params.ica.normalize_rows;
                art["reconstruction_error"] = reconstruction_error(model, train.absorbance);
                out.artifact = std::move(art);
                break;
            }
            case PipelineKind::lssvm_full:
            case PipelineKind::plsr_baseline: {
                out.train_features = train.absorbance;
                out.test_features = test.absorbance;
                break;
            }
        }
        return out;
    });
    clock.lap("projection");
    if (proj.clustering) stages["projection"] = proj.artifact;
    if (proj.ica_model) stages["projection"] = proj.artifact;

    const Vector& y_train = train.target;
    const Vector& y_test = test.target;
    const LsSvmGrid grid = config.params.lssvm_grid
                               ? *config.params.lssvm_grid
                               : LsSvmGrid::defaults(static_cast<int>(proj.train_features.cols()));
    const FoldSpec folds = contiguous_folds(train.n_samples(), config.params.folds);

    // ---- MI selection (projection pipelines only)
    const bool with_selection = config.pipeline == PipelineKind::cluster_mi_lssvm ||
                                config.pipeline == PipelineKind::ica_mi_lssvm;
    std::optional<SelectionResult> selection;
    if (with_selection) {
        selection = run_stage("selection", [&] {
            int P = config.params.P;
            if (P > proj.train_features.cols()) {
                P = static_cast<int>(proj.train_features.cols());
                warnings.push_back("selection: P clamped to feature count " + std::to_string(P));
            }
            KsgOptions opts;
            opts.k_neighbors = config.params.k_neighbors;
            opts.jitter_seed = hash_combine(config.seed, "mi-jitter");
            const ForwardSelection fwd = forward_select(proj.train_features, y_train, P, opts);

            const std::string evaluator_id =
                "lssvm_cv(folds=" + std::to_string(config.params.folds) + ",grid=" +
                std::to_string(grid.gammas.size()) + "x" + std::to_string(grid.sigmas.size()) +
                ")";
            SubsetEvaluator evaluator = [&](const std::vector<int>& subset) {
                Matrix sub(proj.train_features.rows(), static_cast<Index>(subset.size()));
                for (std::size_t c = 0; c < subset.size(); ++c)
                    sub.col(static_cast<Index>(c)) = proj.train_features.col(subset[c]);
                return cv_tune_lssvm(sub, y_train, folds, grid).cv_nmse;
            };
            return exhaustive_search(fwd.order, evaluator, evaluator_id, &fwd);
        });
        clock.lap("selection");

        json sel;
        sel["forward_order"] = selection->forward_order;
        sel["mi_trajectory"] = selection->mi_trajectory;
        sel["best_subset"] = selection->best_subset;
        sel["evaluator_id"] = selection->evaluator_id;
        sel["parameters"] = {{"P", selection->forward_order.size()},
                             {"k_neighbors", config.params.k_neighbors}};
        // Top 20 scores plus best, ranked by CV NMSE.
        std::vector<const SubsetScore*> ranked;
        for (const auto& s : selection->subset_scores) ranked.push_back(&s);
        std::sort(ranked.begin(), ranked.end(), [](const SubsetScore* a, const SubsetScore* b) {
            if (a->cv_nmse != b->cv_nmse) return a->cv_nmse < b->cv_nmse;
            if (a->subset.size() != b->subset.size()) return a->subset.size() < b->subset.size();
            return a->subset < b->subset;
        });
        json scores = json::array();
        for (std::size_t i = 0; i < ranked.size() && i < 20; ++i) {
            json entry;
            entry["subset"] = ranked[i]->subset;
            entry["cv_nmse"] = finite_or_inf(ranked[i]->cv_nmse);
            if (!ranked[i]->note.empty()) entry["note"] = ranked[i]->note;
            scores.push_back(std::move(entry));
        }
        sel["subset_scores_top"] = std::move(scores);
        sel["n_subsets_evaluated"] = selection->subset_scores.size();
        stages["selection"] = std::move(sel);
    }

    // ---- final fit
    json fit = run_stage("fit", [&]() -> json {
        json f;
        json fold_info = {{"scheme", folds.scheme}, {"sizes", folds.sizes()}};
        switch (config.pipeline) {
            case PipelineKind::cluster_mi_lssvm:
            case PipelineKind::ica_mi_lssvm: {
                const auto& subset = selection->best_subset;
                Matrix sub_train(proj.train_features.rows(), static_cast<Index>(subset.size()));
                Matrix sub_test(proj.test_features.rows(), static_cast<Index>(subset.size()));
                for (std::size_t c = 0; c < subset.size(); ++c) {
                    sub_train.col(static_cast<Index>(c)) = proj.train_features.col(subset[c]);
                    sub_test.col(static_cast<Index>(c)) = proj.test_features.col(subset[c]);
                }
                const LsSvmTuning tuning = cv_tune_lssvm(sub_train, y_train, folds, grid);
                const LsSvmModel model =
                    fit_lssvm(sub_train, y_train, tuning.gamma, tuning.sigma);
                if (model.ill_conditioned)
                    warnings.push_back("fit: LS-SVM system ill-conditioned");
                f["model_kind"] = "lssvm";
                f["hyperparameters"] = {{"gamma", tuning.gamma}, {"sigma", tuning.sigma}};
                f["n_features"] = subset.size();
                f["cv_nmse"] = tuning.cv_nmse;
                f["train_nmse"] = nmse(y_train, predict(model, sub_train));
                f["test_nmse"] = nmse(y_test, predict(model, sub_test));
                f["kkt_residual"] = model.kkt_residual;
                break;
            }
            case PipelineKind::lssvm_full: {
                const LsSvmTuning tuning =
                    cv_tune_lssvm(proj.train_features, y_train, folds, grid);
                const LsSvmModel model =
                    fit_lssvm(proj.train_features, y_train, tuning.gamma, tuning.sigma);
                if (model.ill_conditioned)
                    warnings.push_back("fit: LS-SVM system ill-conditioned");
                f["model_kind"] = "lssvm";
                f["hyperparameters"] = {{"gamma", tuning.gamma}, {"sigma", tuning.sigma}};
                f["n_features"] = proj.train_features.cols();
                f["cv_nmse"] = tuning.cv_nmse;
                f["train_nmse"] = nmse(y_train, predict(model, proj.train_features));
                f["test_nmse"] = nmse(y_test, predict(model, proj.test_features));
                f["kkt_residual"] = model.kkt_residual;
                break;
            }
            case PipelineKind::plsr_baseline: {
                const int max_a = static_cast<int>(std::min<Index>(
                    {static_cast<Index>(config.params.plsr_max_components),
                     proj.train_features.cols(), train.n_samples() - 1}));
                double best_score = std::numeric_limits<double>::infinity();
                int best_a = 1;
                json curve = json::array();
                for (int a = 1; a <= max_a; ++a) {
                    double total = 0.0;
                    bool failed = false;
                    for (std::size_t fd = 0; fd < folds.folds.size() && !failed; ++fd) {
                        const auto tr = folds.train_indices(fd);
                        const auto& va = folds.folds[fd];
                        Matrix Xtr(static_cast<Index>(tr.size()), proj.train_features.cols());
                        Vector ytr(static_cast<Index>(tr.size()));
                        for (std::size_t r = 0; r < tr.size(); ++r) {
                            Xtr.row(static_cast<Index>(r)) = proj.train_features.row(tr[r]);
                            ytr(static_cast<Index>(r)) = y_train(tr[r]);
                        }
                        Matrix Xva(static_cast<Index>(va.size()), proj.train_features.cols());
                        Vector yva(static_cast<Index>(va.size()));
                        for (std::size_t r = 0; r < va.size(); ++r) {
                            Xva.row(static_cast<Index>(r)) = proj.train_features.row(va[r]);
                            yva(static_cast<Index>(r)) = y_train(va[r]);
                        }
                        if (a > std::min<Index>(Xtr.cols(), Xtr.rows() - 1)) {
                            failed = true;
                            break;
                        }
                        try {
                            const PlsrModel m = fit_plsr(Xtr, ytr, a);
                            total += nmse(yva, predict(m, Xva));
                        } catch (const Error&) {
                            failed = true;
                        }
                    }
                    const double score =
                        failed ? std::numeric_limits<double>::infinity()
                               : total / static_cast<double>(folds.folds.size());
                    curve.push_back(finite_or_inf(score));
                    if (score < best_score) {
                        best_score = score;
                        best_a = a;
                    }
                }
                const PlsrModel model = fit_plsr(proj.train_features, y_train, best_a);
                if (model.truncated)
                    warnings.push_back("fit: PLSR truncated at " +
                                       std::to_string(model.n_components) + " components");
                f["model_kind"] = "plsr";
                f["hyperparameters"] = {{"n_components", model.n_components}};
                f["n_features"] = proj.train_features.cols();
                f["cv_nmse"] = finite_or_inf(best_score);
                f["cv_curve"] = std::move(curve);
                f["train_nmse"] = nmse(y_train, predict(model, proj.train_features));
                f["test_nmse"] = nmse(y_test, predict(model, proj.test_features));
                break;
            }
        }
        f["fold_spec"] = std::move(fold_info);
        return f;
    });
    clock.lap("fit");
    stages["fit"] = fit;

    // ---- selected ranges + latent variable count
    json ranges = json::array();
    json selected_features = json::array();
    Vector selected_mask = Vector::Zero(train.n_vars());
    Vector boundary_mask = Vector::Zero(train.n_vars());
    int n_latent = 0;
    if (config.pipeline == PipelineKind::cluster_mi_lssvm) {
        const Clustering& clustering = *proj.clustering;
        for (int b = 1; b < clustering.num_clusters(); ++b)
            boundary_mask(clustering.boundaries[static_cast<std::size_t>(b)]) = 1.0;
        for (int idx : selection->best_subset) {
            const auto [lo, hi] = clustering.interval(idx);
            ranges.push_back(wavelength_range(train.wavelengths, lo, hi));
            selected_features.push_back(idx);
            for (int v = lo; v <= hi; ++v) selected_mask(v) = 1.0;
        }
        n_latent = static_cast<int>(selection->best_subset.size());
    } else if (config.pipeline == PipelineKind::ica_mi_lssvm) {
        for (int idx : selection->best_subset) {
            const auto [lo, hi] =
                mass_window(proj.ica_model->sources.row(idx).transpose(),
                            config.params.ica.mass_fraction);
            ranges.push_back(wavelength_range(train.wavelengths, lo, hi));
            selected_features.push_back(idx);
            for (int v = lo; v <= hi; ++v) selected_mask(v) = 1.0;
        }
        n_latent = static_cast<int>(selection->best_subset.size());
    } else {
        for (Index jv = 0; jv < proj.train_features.cols(); ++jv)
            selected_features.push_back(jv);
        n_latent = config.pipeline == PipelineKind::plsr_baseline
                       ? fit["hyperparameters"]["n_components"].get<int>()
                       : static_cast<int>(proj.train_features.cols());
    }
    report["selected_wavelength_ranges"] = ranges;
    report["selected_feature_indices"] = selected_features;
    report["n_latent_variables"] = n_latent;

    // ---- plot-source data
    json plot;
    plot["wavelengths"] = vector_to_json(train.wavelengths);
    plot["mean_train_spectrum"] =
        vector_to_json(train.absorbance.colwise().mean().transpose());
    plot["selected_mask"] = vector_to_json(selected_mask);
    plot["boundary_mask"] = vector_to_json(boundary_mask);
    if (with_selection) plot["mi_trajectory"] = selection->mi_trajectory;
    if (proj.clustering) {
        plot["cluster_cv"] = proj.artifact["cv_scores"];
    }
    if (proj.ica_model) {
        json comps = json::array();
        for (int idx : selection->best_subset)
            comps.push_back(vector_to_json(proj.ica_model->sources.row(idx).transpose()));
        plot["ica_selected_sources"] = std::move(comps);
        plot["ica_selected_components"] = selection->best_subset;
    }
    report["plot_data"] = std::move(plot);
    report["stages"] = std::move(stages);
    report["warnings"] = warnings;

    // ---- persist artifacts
    run_stage("persist", [&] {
        const fs::path dir(config.output_dir);
        write_text_file((dir / "config.json").string(),
                        config_to_json(config).dump(2) + "\n");
        if (proj.clustering)
            write_text_file((dir / "clustering.json").string(), proj.artifact.dump(2) + "\n");
        if (proj.ica_model) {
            write_text_file((dir / "ica.json").string(), proj.artifact.dump(2) + "\n");
            std::vector<std::string> header;
            for (Index jv = 0; jv < train.n_vars(); ++jv)
                header.push_back(format_double(train.wavelengths(jv)));
            write_matrix_csv((dir / "ica_sources.csv").string(), header,
                             proj.ica_model->sources);
            std::vector<std::string> mix_header;
            for (int cpn = 0; cpn < proj.ica_model->k; ++cpn)
                mix_header.push_back("component_" + std::to_string(cpn));
            write_matrix_csv((dir / "ica_mixing.csv").string(), mix_header,
                             proj.ica_model->mixing);
        }
        if (selection)
            write_text_file((dir / "selection.json").string(),
                            report["stages"]["selection"].dump(2) + "\n");
        write_text_file((dir / "fit.json").string(), fit.dump(2) + "\n");

        std::vector<std::string> fheader;
        for (Index jv = 0; jv < proj.train_features.cols(); ++jv)
            fheader.push_back("f" + std::to_string(jv));
        fheader.push_back("target");
        write_matrix_csv((dir / "features_train.csv").string(), fheader, proj.train_features,
                         &y_train);
        write_matrix_csv((dir / "features_test.csv").string(), fheader, proj.test_features,
                         &y_test);
        return 0;
    });
    clock.lap("persist");

    report["timings"] = clock.timings;
    write_text_file((fs::path(config.output_dir) / "report.json").string(),
                    report.dump(2) + "\n");
    return report;
}

json refit_final_stage(const std::string& output_dir) {
    const fs::path dir(output_dir);
    const PipelineConfig config =
        config_from_json(load_json_file((dir / "config.json").string()));
    Vector y_train, y_test;
    const Matrix all_train = read_matrix_csv((dir / "features_train.csv").string(), &y_train);
    const Matrix all_test = read_matrix_csv((dir / "features_test.csv").string(), &y_test);

    std::vector<int> subset;
    const bool with_selection = config.pipeline == PipelineKind::cluster_mi_lssvm ||
                                config.pipeline == PipelineKind::ica_mi_lssvm;
    if (with_selection) {
        const json sel = load_json_file((dir / "selection.json").string());
        for (const auto& v : sel.at("best_subset")) subset.push_back(v.get<int>());
    } else {
        for (Index j = 0; j < all_train.cols(); ++j) subset.push_back(static_cast<int>(j));
    }

    const LsSvmGrid grid = config.params.lssvm_grid
                               ? *config.params.lssvm_grid
                               : LsSvmGrid::defaults(static_cast<int>(all_train.cols()));
    const FoldSpec folds = contiguous_folds(all_train.rows(), config.params.folds);
    json fold_info = {{"scheme", folds.scheme}, {"sizes", folds.sizes()}};

    json f;
    if (config.pipeline == PipelineKind::plsr_baseline) {
        throw NotAvailableError(
            "refit_final_stage: plsr_baseline refit is not supported; rerun the pipeline");
    }
    Matrix sub_train(all_train.rows(), static_cast<Index>(subset.size()));
    Matrix sub_test(all_test.rows(), static_cast<Index>(subset.size()));
    for (std::size_t c = 0; c < subset.size(); ++c) {
        sub_train.col(static_cast<Index>(c)) = all_train.col(subset[c]);
        sub_test.col(static_cast<Index>(c)) = all_test.col(subset[c]);
    }
    const LsSvmTuning tuning = cv_tune_lssvm(sub_train, y_train, folds, grid);
    const LsSvmModel model = fit_lssvm(sub_train, y_train, tuning.gamma, tuning.sigma);
    f["model_kind"] = "lssvm";
    f["hyperparameters"] = {{"gamma", tuning.gamma}, {"sigma", tuning.sigma}};
    f["n_features"] = subset.size();
    f["cv_nmse"] = tuning.cv_nmse;
    f["train_nmse"] = nmse(y_train, predict(model, sub_train));
    f["test_nmse"] = nmse(y_test, predict(model, sub_test));
    f["kkt_residual"] = model.kkt_residual;
    f["fold_spec"] = std::move(fold_info);
    return f;
}

void emit_plot_data(const json& report, const std::string& what, const std::string& out_path) {
    if (!report.contains("plot_data"))
        throw InvalidArgument("emit_plot_data: report has no plot_data section");
    const json& plot = report.at("plot_data");
    const std::string method = report.value("method", "?");
    std::ostringstream out;

    if (what == "ranges_over_mean_spectrum") {
        if (!report.contains("selected_wavelength_ranges") ||
            report.at("selected_wavelength_ranges").empty())
            throw NotAvailableError(
                "ranges_over_mean_spectrum requires a run with selected ranges "
                "(cluster_mi_lssvm or ica_mi_lssvm); this report is from " + method);
        const auto& wl = plot.at("wavelengths");
        const auto& mean = plot.at("mean_train_spectrum");
        const auto& selected = plot.at("selected_mask");
        const auto& boundary = plot.at("boundary_mask");
        out << "wavelength,mean_absorbance,selected,boundary\n";
        for (std::size_t i = 0; i < wl.size(); ++i)
            out << format_double(wl[i].get<double>()) << ','
                << format_double(mean[i].get<double>()) << ','
                << static_cast<int>(selected[i].get<double>()) << ','
                << static_cast<int>(boundary[i].get<double>()) << "\n";
    } else if (what == "ica_components") {
        if (!plot.contains("ica_selected_sources"))
            throw NotAvailableError("ica_components is produced by ica_mi_lssvm runs; "
                                    "this report is from " + method);
        const auto& wl = plot.at("wavelengths");
        const auto& comps = plot.at("ica_selected_sources");
        const auto& ids = plot.at("ica_selected_components");
        out << "wavelength";
        for (const auto& id : ids) out << ",component_" << id.get<int>();
        out << "\n";
        for (std::size_t i = 0; i < wl.size(); ++i) {
            out << format_double(wl[i].get<double>());
            for (const auto& comp : comps) out << ',' << format_double(comp[i].get<double>());
            out << "\n";
        }
    } else if (what == "mi_trajectory") {
        if (!plot.contains("mi_trajectory"))
            throw NotAvailableError("mi_trajectory is produced by cluster_mi_lssvm and "
                                    "ica_mi_lssvm runs; this report is from " + method);
        out << "step,joint_mi\n";
        const auto& tr = plot.at("mi_trajectory");
        for (std::size_t i = 0; i < tr.size(); ++i)
            out << (i + 1) << ',' << format_double(tr[i].get<double>()) << "\n";
    } else if (what == "cluster_cv_curve") {
        if (!plot.contains("cluster_cv"))
            throw NotAvailableError("cluster_cv_curve is produced by cluster_mi_lssvm runs; "
                                    "this report is from " + method);
        out << "m,cv_nmse\n";
        const auto& m = plot.at("cluster_cv").at("m");
        const auto& s = plot.at("cluster_cv").at("nmse");
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double v = s[i].is_number() ? s[i].get<double>()
                                              : std::numeric_limits<double>::infinity();
            out << m[i].get<int>() << ',' << format_double(v) << "\n";
        }
    } else {
        throw InvalidArgument("unknown plot-data kind: " + what +
                              " (expected ranges_over_mean_spectrum, ica_components, "
                              "mi_trajectory or cluster_cv_curve)");
    }
    write_text_file(out_path, out.str());
}

Comparison compare_runs(const std::vector<json>& reports) {
    if (reports.empty()) throw InvalidArgument("compare_runs: no reports");
    const std::string digest = reports.front().at("dataset").at("split_digest").get<std::string>();
    for (const auto& r : reports) {
        const std::string d = r.at("dataset").at("split_digest").get<std::string>();
        if (d != digest)
            throw ConflictError(
                "compare_runs: reports come from different datasets or splits (digest " +
                digest + " vs " + d + "); rerun on identical splits to compare");
    }

    Comparison cmp;
    cmp.table = json::array();
    std::ostringstream csv;
    csv << "method,latent_variables,test_nmse\n";
    std::ostringstream text;
    text << "Method                     Number of (latent) variables   NMSE test\n";
    text << "-------------------------  -----------------------------  ---------\n";
    for (const auto& r : reports) {
        const std::string method = r.at("method").get<std::string>();
        const int latent = r.at("n_latent_variables").get<int>();
        const double test_nmse = r.at("stages").at("fit").at("test_nmse").get<double>();
        cmp.table.push_back(
            {{"method", method}, {"latent_variables", latent}, {"test_nmse", test_nmse}});
        csv << method << ',' << latent << ',' << format_double(test_nmse) << "\n";
        char line[128];
        std::snprintf(line, sizeof(line), "%-25s  %29d  %9.4f\n", method.c_str(), latent,
                      test_nmse);
        text << line;
    }
    cmp.csv = csv.str();
    cmp.text = text.str();
    return cmp;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IngestError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out.good()) throw IoError("cannot write " + path);
    out << contents;
}

}  // namespace specrange
