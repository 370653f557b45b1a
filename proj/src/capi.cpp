#include "specrange/specrange.h"

#include <cstring>
#include <string>

#include "pipeline.hpp"
#include "spectra.hpp"
#include "tecator.hpp"

using namespace specrange;

struct sr_spectra {
    SpectraSet data;
};

namespace {

thread_local std::string g_last_error;

sr_status status_from(const Error& e) {
    switch (e.code()) {
        case ErrorCode::invalid_argument: return SR_ERROR_INVALID_ARGUMENT;
        case ErrorCode::parse: return SR_ERROR_PARSE;
        case ErrorCode::io: return SR_ERROR_IO;
        case ErrorCode::network: return SR_ERROR_NETWORK;
        case ErrorCode::degenerate_data: return SR_ERROR_DEGENERATE_DATA;
        case ErrorCode::numeric: return SR_ERROR_NUMERIC;
        case ErrorCode::not_available: return SR_ERROR_NOT_AVAILABLE;
        case ErrorCode::conflict: return SR_ERROR_CONFLICT;
        case ErrorCode::internal: return SR_ERROR_INTERNAL;
    }
    return SR_ERROR_INTERNAL;
}

template <typename F>
sr_status guarded(F&& fn) {
    try {
        fn();
        return SR_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SR_ERROR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SR_ERROR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

sr_status require(bool cond, const char* message) {
    if (cond) return SR_OK;
    g_last_error = message;
    return SR_ERROR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* sr_version(void) { return "0.1.0"; }

const char* sr_last_error(void) { return g_last_error.c_str(); }

sr_status sr_spectra_load_csv(const char* path, int target_column, int has_header,
                              sr_spectra** out) {
    if (auto rc = require(path && out, "path and out must not be NULL")) return rc;
    return guarded([&] {
        CsvLayout layout;
        layout.target_column = target_column;
        layout.has_header = has_header != 0;
        *out = new sr_spectra{load_csv(path, layout)};
    });
}

sr_status sr_spectra_fetch_tecator(const char* url, const char* cache_dir, sr_spectra** out) {
    if (auto rc = require(out != nullptr, "out must not be NULL")) return rc;
    return guarded([&] {
        *out = new sr_spectra{fetch_tecator(url ? url : "", cache_dir ? cache_dir : ".specrange-cache")};
    });
}

sr_status sr_spectra_dims(const sr_spectra* s, int64_t* n_samples, int64_t* n_vars) {
    if (auto rc = require(s && n_samples && n_vars, "arguments must not be NULL")) return rc;
    *n_samples = s->data.n_samples();
    *n_vars = s->data.n_vars();
    return SR_OK;
}

sr_status sr_spectra_wavelengths(const sr_spectra* s, double* out, int64_t len) {
    if (auto rc = require(s && out, "arguments must not be NULL")) return rc;
    if (auto rc = require(len >= s->data.n_vars(), "buffer too small")) return rc;
    for (Index j = 0; j < s->data.n_vars(); ++j) out[j] = s->data.wavelengths(j);
    return SR_OK;
}

sr_status sr_spectra_target(const sr_spectra* s, double* out, int64_t len) {
    if (auto rc = require(s && out, "arguments must not be NULL")) return rc;
    if (auto rc = require(len >= s->data.n_samples(), "buffer too small")) return rc;
    for (Index i = 0; i < s->data.n_samples(); ++i) out[i] = s->data.target(i);
    return SR_OK;
}

sr_status sr_spectra_absorbance(const sr_spectra* s, double* out, int64_t len) {
    if (auto rc = require(s && out, "arguments must not be NULL")) return rc;
    const int64_t need = static_cast<int64_t>(s->data.n_samples()) * s->data.n_vars();
    if (auto rc = require(len >= need, "buffer too small")) return rc;
    int64_t pos = 0;
    for (Index i = 0; i < s->data.n_samples(); ++i)
        for (Index j = 0; j < s->data.n_vars(); ++j) out[pos++] = s->data.absorbance(i, j);
    return SR_OK;
}

sr_status sr_spectra_preprocess(const sr_spectra* s, const char* method, sr_spectra** out) {
    if (auto rc = require(s && method && out, "arguments must not be NULL")) return rc;
    return guarded([&] {
        *out = new sr_spectra{preprocess(s->data, preprocess_from_string(method))};
    });
}

void sr_spectra_free(sr_spectra* s) { delete s; }

sr_status sr_run_pipeline(const char* config_json, char** report_json_out) {
    if (auto rc = require(config_json && report_json_out, "arguments must not be NULL"))
        return rc;
    return guarded([&] {
        json j;
        try {
            j = json::parse(config_json);
        } catch (const std::exception& e) {
            throw IngestError(std::string("invalid config JSON: ") + e.what());
        }
        const json report = run_pipeline(config_from_json(j));
        *report_json_out = dup_string(report.dump(2));
    });
}

sr_status sr_run_pipeline_file(const char* config_path, char** report_json_out) {
    if (auto rc = require(config_path && report_json_out, "arguments must not be NULL"))
        return rc;
    return guarded([&] {
        const json report = run_pipeline(config_from_json(load_json_file(config_path)));
        *report_json_out = dup_string(report.dump(2));
    });
}

sr_status sr_preset_config(const char* preset, const char* pipeline, char** config_json_out) {
    if (auto rc = require(preset && config_json_out, "preset and out must not be NULL"))
        return rc;
    return guarded([&] {
        PipelineConfig c = preset_config(preset);
        if (pipeline) c.pipeline = pipeline_from_string(pipeline);
        *config_json_out = dup_string(config_to_json(c).dump(2));
    });
}

sr_status sr_emit_plot_data(const char* report_path, const char* what,
                            const char* out_csv_path) {
    if (auto rc = require(report_path && what && out_csv_path, "arguments must not be NULL"))
        return rc;
    return guarded([&] {
        emit_plot_data(load_json_file(report_path), what, out_csv_path);
    });
}

sr_status sr_compare_runs(const char* const* report_paths, int n_reports, char** csv_out,
                          char** text_out) {
    if (auto rc = require(report_paths && n_reports >= 1, "need at least one report path"))
        return rc;
    return guarded([&] {
        std::vector<json> reports;
        reports.reserve(static_cast<std::size_t>(n_reports));
        for (int i = 0; i < n_reports; ++i) reports.push_back(load_json_file(report_paths[i]));
        const Comparison cmp = compare_runs(reports);
        if (csv_out) *csv_out = dup_string(cmp.csv);
        if (text_out) *text_out = dup_string(cmp.text);
    });
}

void sr_string_free(char* s) { delete[] s; }

}  // extern "C"
