#include "tecator.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#ifdef SPECRANGE_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace specrange {

namespace {

// Per sample: 100 absorbances, 22 principal components, 3 contents
// (moisture, fat, protein). 240 records: 172 C + 43 M + 25 T.
constexpr int kValuesPerRecord = 125;
constexpr int kRecords = 240;
constexpr int kFatOffset = 100 + 22 + 1;  // fat is the second content value

bool numeric_line(const std::string& line, std::vector<double>& values) {
    values.clear();
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') return false;
        values.push_back(v);
    }
    return !values.empty();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot open file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw IoError("cannot write file: " + path.string());
    out << data;
}

std::string http_get(const std::string& url) {
    std::string rest;
    bool https = false;
    if (url.rfind("http://", 0) == 0) {
        rest = url.substr(7);
    } else if (url.rfind("https://", 0) == 0) {
        rest = url.substr(8);
        https = true;
    } else {
        throw NetworkError("unsupported URL scheme: " + url);
    }
    const auto slash = rest.find('/');
    const std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);

    auto fetch = [&path](auto& client) -> std::string {
        client.set_follow_location(true);
        client.set_connection_timeout(20);
        client.set_read_timeout(60);
        auto res = client.Get(path.c_str());
        if (!res)
            throw NetworkError("request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw NetworkError("HTTP status " + std::to_string(res->status));
        return res->body;
    };

    if (https) {
#ifdef SPECRANGE_HTTPS
        httplib::SSLClient client(host);
        client.enable_server_certificate_verification(false);
        return fetch(client);
#else
        throw NetworkError("built without HTTPS support; download the file manually");
#endif
    }
    httplib::Client client(host);
    return fetch(client);
}

}  // namespace

SpectraSet parse_tecator(const std::string& raw, const std::string& origin) {
    // The published file is a prose banner followed by a block of lines that
    // contain nothing but numbers. Collect the trailing run of numeric lines.
    std::vector<double> values;
    std::vector<double> line_vals;
    std::istringstream ss(raw);
    std::string line;
    while (std::getline(ss, line)) {
        if (numeric_line(line, line_vals)) {
            values.insert(values.end(), line_vals.begin(), line_vals.end());
        } else if (!values.empty()) {
            values.clear();  // numeric run interrupted by prose: restart
        }
    }

    const std::size_t expected = static_cast<std::size_t>(kRecords) * kValuesPerRecord;
    if (values.size() != expected)
        throw IngestError("Tecator parse error for " + origin + ": expected " +
                          std::to_string(expected) + " numeric values (" +
                          std::to_string(kRecords) + " records of " +
                          std::to_string(kValuesPerRecord) + "), found " +
                          std::to_string(values.size()));

    SpectraSet s;
    s.absorbance.resize(kTecatorSamples, kTecatorVars);
    s.target.resize(kTecatorSamples);
    for (int i = 0; i < kTecatorSamples; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * kValuesPerRecord;
        for (int j = 0; j < kTecatorVars; ++j)
            s.absorbance(i, j) = values[base + static_cast<std::size_t>(j)];
        s.target(i) = values[base + kFatOffset];
    }
    s.wavelengths.resize(kTecatorVars);
    for (int j = 0; j < kTecatorVars; ++j)
        s.wavelengths(j) = 850.0 + 200.0 * j / (kTecatorVars - 1);
    s.axis_unit = AxisUnit::nanometer;
    s.validate();
    return s;
}

SplitSpec tecator_split() {
    SplitSpec spec;
    spec.train_indices.resize(kTecatorTrain);
    std::iota(spec.train_indices.begin(), spec.train_indices.end(), Index{0});
    spec.test_indices.resize(kTecatorSamples - kTecatorTrain);
    std::iota(spec.test_indices.begin(), spec.test_indices.end(), Index{kTecatorTrain});
    return spec;
}

SpectraSet fetch_tecator(const std::string& url, const std::string& cache_dir) {
    const fs::path dir = fs::path(cache_dir) / "tecator";
    const fs::path raw_path = dir / "raw.dat";
    const fs::path meta_path = dir / "meta.json";

    if (fs::exists(raw_path)) {
        return parse_tecator(read_file(raw_path), raw_path.string());
    }

    std::string body;
    std::string source = url.empty() ? std::string(kTecatorDefaultUrl) : url;
    if (source.rfind("file://", 0) == 0) {
        body = read_file(source.substr(7));
    } else if (source.rfind("http", 0) == 0) {
        body = http_get(source);
    } else {
        body = read_file(source);  // plain local path
    }

    // Parse before committing to the cache so a truncated download cannot
    // poison later offline runs.
    SpectraSet s = parse_tecator(body, source);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create cache directory " + dir.string());
    const fs::path tmp = dir / "raw.dat.tmp";
    write_file(tmp, body);
    fs::rename(tmp, raw_path, ec);
    if (ec) throw IoError("cannot finalize cache file " + raw_path.string());

    nlohmann::json meta;
    meta["url"] = source;
    meta["bytes"] = body.size();
    meta["fetched_at"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    write_file(meta_path, meta.dump(2) + "\n");

    return s;
}

}  // namespace specrange
