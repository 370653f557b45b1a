#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace specrange {

enum class AxisUnit { nanometer, wavenumber };

// A set of digitized spectra (rows) over a monotone wavelength axis,
// together with the dependent variable to predict.
struct SpectraSet {
    Matrix absorbance;   // n_samples x n_vars
    Vector wavelengths;  // n_vars, strictly monotone (either direction)
    Vector target;       // n_samples
    AxisUnit axis_unit = AxisUnit::nanometer;
    bool synthetic_axis = false;  // wavelengths were synthesized as 0..n_vars-1

    Index n_samples() const { return absorbance.rows(); }
    Index n_vars() const { return absorbance.cols(); }

    // Enforces: monotone axis, finite absorbance/target, minimum sizes.
    void validate() const;
};

struct CsvLayout {
    int target_column = -1;  // column index of the target; -1 means last column
    bool has_header = true;  // first row carries wavelengths for the spectral columns
};

SpectraSet load_csv(const std::string& path, const CsvLayout& layout);

enum class Preprocess { snv, msc, derivative1 };

Preprocess preprocess_from_string(const std::string& name);
std::string to_string(Preprocess method);

// Reference spectrum for multiplicative scatter correction, fitted on a
// training set so test rows are corrected without leakage.
struct MscReference {
    Vector mean_spectrum;
};

MscReference msc_fit(const SpectraSet& train);
SpectraSet msc_apply(const SpectraSet& s, const MscReference& ref);

SpectraSet preprocess(const SpectraSet& s, Preprocess method);

struct SplitSpec {
    std::vector<Index> train_indices;
    std::vector<Index> test_indices;
    std::vector<Index> excluded_indices;

    // Pairwise disjoint and jointly exhaustive over [0, n_samples).
    void validate(Index n_samples) const;
};

std::pair<SpectraSet, SpectraSet> apply_split(const SpectraSet& s, const SplitSpec& spec);

// Row-subset helper preserving order; used by split and CV folds.
SpectraSet take_rows(const SpectraSet& s, const std::vector<Index>& rows);

}  // namespace specrange
