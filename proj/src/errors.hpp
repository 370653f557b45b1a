#pragma once

#include <stdexcept>
#include <string>

namespace specrange {

// Stable error categories, mirrored by the C API status codes.
enum class ErrorCode {
    invalid_argument = 1,
    parse = 2,
    io = 3,
    network = 4,
    degenerate_data = 5,
    numeric = 6,
    not_available = 7,
    conflict = 8,
    internal = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(ErrorCode::invalid_argument, w) {}
};

struct IngestError : Error {
    explicit IngestError(const std::string& w) : Error(ErrorCode::parse, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::io, w) {}
};

struct NetworkError : Error {
    explicit NetworkError(const std::string& w) : Error(ErrorCode::network, w) {}
};

// Zero-variance rows/variables, constant spectra, undefined metrics.
struct DegenerateDataError : Error {
    explicit DegenerateDataError(const std::string& w) : Error(ErrorCode::degenerate_data, w) {}
};

// NaN during iteration, singular solves, rank violations.
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorCode::numeric, w) {}
};

// Requested artifact does not exist for this kind of run.
struct NotAvailableError : Error {
    explicit NotAvailableError(const std::string& w) : Error(ErrorCode::not_available, w) {}
};

// Incompatible inputs (e.g. comparing reports from different splits).
struct ConflictError : Error {
    explicit ConflictError(const std::string& w) : Error(ErrorCode::conflict, w) {}
};

}  // namespace specrange
