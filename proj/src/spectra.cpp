#include "spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace specrange {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

bool parse_double(const std::string& raw, double& out) {
    const char* begin = raw.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void SpectraSet::validate() const {
    if (n_samples() < 2 || n_vars() < 2)
        throw InvalidArgument("SpectraSet requires at least 2 samples and 2 variables, got " +
                              std::to_string(n_samples()) + "x" + std::to_string(n_vars()));
    if (wavelengths.size() != n_vars())
        throw InvalidArgument("wavelength axis length does not match variable count");
    if (target.size() != n_samples())
        throw InvalidArgument("target length does not match sample count");

    const bool increasing = wavelengths(1) > wavelengths(0);
    for (Index j = 1; j < wavelengths.size(); ++j) {
        const double step = wavelengths(j) - wavelengths(j - 1);
        if (!(increasing ? step > 0.0 : step < 0.0))
            throw InvalidArgument("wavelength axis is not strictly monotone at index " +
                                  std::to_string(j));
    }
    if (!absorbance.allFinite())
        throw InvalidArgument("absorbance contains non-finite entries");
    if (!target.allFinite())
        throw InvalidArgument("target contains non-finite entries");
}

SpectraSet load_csv(const std::string& path, const CsvLayout& layout) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open CSV file: " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> header_cells;
    std::string line;
    std::size_t line_no = 0;
    std::size_t n_cols = 0;
    bool header_pending = layout.has_header;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_line(line, ',');
        if (header_pending) {
            header_cells = cells;
            n_cols = cells.size();
            header_pending = false;
            continue;
        }
        if (n_cols == 0) n_cols = cells.size();
        if (cells.size() != n_cols)
            throw IngestError("malformed CSV row " + std::to_string(line_no) + " in " + path +
                              ": expected " + std::to_string(n_cols) + " columns, got " +
                              std::to_string(cells.size()));
        std::vector<double> parsed(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            if (!parse_double(trim(cells[c]), v))
                throw IngestError("unparseable cell at row " + std::to_string(line_no) +
                                  ", column " + std::to_string(c) + " in " + path + ": '" +
                                  trim(cells[c]) + "'");
            if (!std::isfinite(v))
                throw IngestError("non-finite cell at row " + std::to_string(line_no) +
                                  ", column " + std::to_string(c) + " in " + path);
            parsed[c] = v;
        }
        rows.push_back(std::move(parsed));
    }

    if (rows.empty()) throw IngestError("CSV file has no data rows: " + path);
    if (n_cols < 3)
        throw IngestError("CSV needs at least two spectral columns plus a target column: " + path);

    const int target_col = layout.target_column < 0 ? static_cast<int>(n_cols) - 1
                                                    : layout.target_column;
    if (target_col < 0 || static_cast<std::size_t>(target_col) >= n_cols)
        throw InvalidArgument("target column " + std::to_string(layout.target_column) +
                              " out of range for " + std::to_string(n_cols) + " columns");

    const Index n_samples = static_cast<Index>(rows.size());
    const Index n_vars = static_cast<Index>(n_cols) - 1;

    SpectraSet s;
    s.absorbance.resize(n_samples, n_vars);
    s.target.resize(n_samples);
    for (Index i = 0; i < n_samples; ++i) {
        Index jj = 0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (static_cast<int>(c) == target_col) {
                s.target(i) = rows[i][c];
            } else {
                s.absorbance(i, jj++) = rows[i][c];
            }
        }
    }

    s.wavelengths.resize(n_vars);
    bool axis_parsed = false;
    if (layout.has_header && !header_cells.empty()) {
        axis_parsed = true;
        Index jj = 0;
        for (std::size_t c = 0; c < header_cells.size() && axis_parsed; ++c) {
            if (static_cast<int>(c) == target_col) continue;
            double v;
            if (!parse_double(trim(header_cells[c]), v)) axis_parsed = false;
            else s.wavelengths(jj++) = v;
        }
    }
    if (!axis_parsed) {
        for (Index j = 0; j < n_vars; ++j) s.wavelengths(j) = static_cast<double>(j);
        s.synthetic_axis = true;
    }
    s.axis_unit = (n_vars >= 2 && s.wavelengths(1) < s.wavelengths(0)) ? AxisUnit::wavenumber
                                                                       : AxisUnit::nanometer;
    s.validate();
    return s;
}

Preprocess preprocess_from_string(const std::string& name) {
    if (name == "snv") return Preprocess::snv;
    if (name == "msc") return Preprocess::msc;
    if (name == "derivative1") return Preprocess::derivative1;
    throw InvalidArgument("unknown preprocessing method: " + name);
}

std::string to_string(Preprocess method) {
    switch (method) {
        case Preprocess::snv: return "snv";
        case Preprocess::msc: return "msc";
        case Preprocess::derivative1: return "derivative1";
    }
    return "?";
}

namespace {

SpectraSet snv_transform(const SpectraSet& s) {
    SpectraSet out = s;
    const Index n = s.n_vars();
    for (Index i = 0; i < s.n_samples(); ++i) {
        const double mean = s.absorbance.row(i).mean();
        const double var =
            (s.absorbance.row(i).array() - mean).square().sum() / static_cast<double>(n - 1);
        if (var <= 0.0 || !std::isfinite(var))
            throw DegenerateDataError("SNV: spectrum at row " + std::to_string(i) +
                                      " is constant");
        out.absorbance.row(i) = (s.absorbance.row(i).array() - mean) / std::sqrt(var);
    }
    return out;
}

SpectraSet derivative_transform(const SpectraSet& s) {
    if (s.n_vars() < 3)
        throw InvalidArgument("derivative1 needs at least 3 spectral variables");
    SpectraSet out;
    const Index n = s.n_vars();
    out.absorbance.resize(s.n_samples(), n - 1);
    out.wavelengths.resize(n - 1);
    for (Index j = 0; j + 1 < n; ++j) {
        const double dl = s.wavelengths(j + 1) - s.wavelengths(j);
        out.absorbance.col(j) = (s.absorbance.col(j + 1) - s.absorbance.col(j)) / dl;
        out.wavelengths(j) = 0.5 * (s.wavelengths(j) + s.wavelengths(j + 1));
    }
    out.target = s.target;
    out.axis_unit = s.axis_unit;
    out.synthetic_axis = s.synthetic_axis;
    out.validate();
    return out;
}

}  // namespace

MscReference msc_fit(const SpectraSet& train) {
    MscReference ref;
    ref.mean_spectrum = train.absorbance.colwise().mean();
    const double var = sample_variance(ref.mean_spectrum);
    if (var <= 0.0)
        throw DegenerateDataError("MSC: reference (mean) spectrum is constant");
    return ref;
}

SpectraSet msc_apply(const SpectraSet& s, const MscReference& ref) {
    if (ref.mean_spectrum.size() != s.n_vars())
        throw InvalidArgument("MSC reference length does not match variable count");
    SpectraSet out = s;
    const Vector& m = ref.mean_spectrum;
    const double m_mean = m.mean();
    const double m_ss = (m.array() - m_mean).square().sum();
    for (Index i = 0; i < s.n_samples(); ++i) {
        const auto row = s.absorbance.row(i);
        const double x_mean = row.mean();
        // OLS of the spectrum on the reference: x ~ a + b*m
        const double b = ((m.array() - m_mean) * (row.transpose().array() - x_mean)).sum() / m_ss;
        const double a = x_mean - b * m_mean;
        if (std::abs(b) < 1e-12)
            throw DegenerateDataError("MSC: regression slope below tolerance at row " +
                                      std::to_string(i));
        out.absorbance.row(i) = (row.array() - a) / b;
    }
    return out;
}

SpectraSet preprocess(const SpectraSet& s, Preprocess method) {
    s.validate();
    switch (method) {
        case Preprocess::snv: return snv_transform(s);
        case Preprocess::msc: return msc_apply(s, msc_fit(s));
        case Preprocess::derivative1: return derivative_transform(s);
    }
    throw InvalidArgument("unknown preprocessing method");
}

void SplitSpec::validate(Index n_samples) const {
    std::unordered_set<Index> seen;
    auto check = [&](const std::vector<Index>& idx, const char* name) {
        for (Index i : idx) {
            if (i < 0 || i >= n_samples)
                throw InvalidArgument(std::string(name) + " index " + std::to_string(i) +
                                      " out of range [0," + std::to_string(n_samples) + ")");
            if (!seen.insert(i).second)
                throw InvalidArgument("invalid split: sample " + std::to_string(i) +
                                      " appears in more than one set");
        }
    };
    check(train_indices, "train");
    check(test_indices, "test");
    check(excluded_indices, "excluded");
    if (static_cast<Index>(seen.size()) != n_samples)
        throw InvalidArgument("invalid split: train/test/excluded do not cover all " +
                              std::to_string(n_samples) + " samples");
}

SpectraSet take_rows(const SpectraSet& s, const std::vector<Index>& rows) {
    SpectraSet out;
    out.absorbance.resize(static_cast<Index>(rows.size()), s.n_vars());
    out.target.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.absorbance.row(static_cast<Index>(r)) = s.absorbance.row(rows[r]);
        out.target(static_cast<Index>(r)) = s.target(rows[r]);
    }
    out.wavelengths = s.wavelengths;
    out.axis_unit = s.axis_unit;
    out.synthetic_axis = s.synthetic_axis;
    return out;
}

std::pair<SpectraSet, SpectraSet> apply_split(const SpectraSet& s, const SplitSpec& spec) {
    spec.validate(s.n_samples());
    return {take_rows(s, spec.train_indices), take_rows(s, spec.test_indices)};
}

}  // namespace specrange
