/* specrange - wavelength-range selection for smooth spectra.
 *
 * C interface to the specrange core: dataset ingestion, preprocessing, the
 * range-selection pipelines (contiguity-constrained variable clustering or
 * ICA projection, mutual-information feature selection, LS-SVM regression)
 * and the PLSR / full-spectrum baselines.
 *
 * Conventions:
 *   - every function returns sr_status; SR_OK is 0.
 *   - on failure, sr_last_error() returns a thread-local message.
 *   - objects returned through out-parameters are owned by the caller and
 *     released with the matching sr_*_free function.
 *   - structured inputs and outputs are JSON strings; the schemas are
 *     documented in the project README.
 */

#ifndef SPECRANGE_H
#define SPECRANGE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sr_status {
    SR_OK = 0,
    SR_ERROR_INVALID_ARGUMENT = 1,
    SR_ERROR_PARSE = 2,
    SR_ERROR_IO = 3,
    SR_ERROR_NETWORK = 4,
    SR_ERROR_DEGENERATE_DATA = 5,
    SR_ERROR_NUMERIC = 6,
    SR_ERROR_NOT_AVAILABLE = 7,
    SR_ERROR_CONFLICT = 8,
    SR_ERROR_INTERNAL = 9
} sr_status;

/* Opaque spectra collection (absorbance matrix + wavelength axis + target). */
typedef struct sr_spectra sr_spectra;

const char* sr_version(void);

/* Message describing the most recent failure on this thread. */
const char* sr_last_error(void);

/* ------------------------------------------------------------ datasets */

/* Loads a CSV of spectra. target_column: 0-based index, -1 for the last
 * column. has_header: nonzero when the first row carries wavelengths. */
sr_status sr_spectra_load_csv(const char* path, int target_column, int has_header,
                              sr_spectra** out);

/* Fetches (or reuses the cache of) the StatLib Tecator distribution.
 * url may be NULL for the canonical location, an http(s) URL, a local path
 * or a file:// reference. */
sr_status sr_spectra_fetch_tecator(const char* url, const char* cache_dir,
                                   sr_spectra** out);

sr_status sr_spectra_dims(const sr_spectra* s, int64_t* n_samples, int64_t* n_vars);

/* Buffers must hold n_vars (wavelengths), n_samples (target) or
 * n_samples*n_vars (absorbance, row-major) doubles. */
sr_status sr_spectra_wavelengths(const sr_spectra* s, double* out, int64_t len);
sr_status sr_spectra_target(const sr_spectra* s, double* out, int64_t len);
sr_status sr_spectra_absorbance(const sr_spectra* s, double* out, int64_t len);

/* method: "snv", "msc" or "derivative1". */
sr_status sr_spectra_preprocess(const sr_spectra* s, const char* method, sr_spectra** out);

void sr_spectra_free(sr_spectra* s);

/* ------------------------------------------------------------ pipelines */

/* Runs a full pipeline from a JSON configuration; artifacts land in the
 * configured output_dir and the run report JSON is returned. */
sr_status sr_run_pipeline(const char* config_json, char** report_json_out);
sr_status sr_run_pipeline_file(const char* config_path, char** report_json_out);

/* Configuration template for a named preset ("tecator-table1",
 * "wine-table2") and pipeline kind ("cluster_mi_lssvm", "ica_mi_lssvm",
 * "lssvm_full", "plsr_baseline"). Seed and output_dir still must be set. */
sr_status sr_preset_config(const char* preset, const char* pipeline,
                           char** config_json_out);

/* Writes plot-source CSV from a stored report. what: one of
 * "ranges_over_mean_spectrum", "ica_components", "mi_trajectory",
 * "cluster_cv_curve". */
sr_status sr_emit_plot_data(const char* report_path, const char* what,
                            const char* out_csv_path);

/* Comparison table across runs of the same dataset/split. Either out
 * parameter may be NULL. */
sr_status sr_compare_runs(const char* const* report_paths, int n_reports,
                          char** csv_out, char** text_out);

void sr_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPECRANGE_H */
