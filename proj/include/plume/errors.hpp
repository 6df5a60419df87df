#pragma once

#include <stdexcept>
#include <string>

namespace plume {

// Base for every error raised by the engine. `code()` is the machine-readable
// identifier surfaced by the service and the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("PARSE_ERROR", message) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("VALIDATION_FAILED", message) {}
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& message) : Error("INVALID_ARGUMENT", message) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& message) : Error("INSUFFICIENT_DATA", message) {}
};

class TriangulationError : public Error {
public:
    explicit TriangulationError(const std::string& message) : Error("TRIANGULATION_FAILED", message) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& message) : Error("FIT_FAILED", message) {}
};

class RankDeficiencyError : public FitError {
public:
    explicit RankDeficiencyError(const std::string& message) : FitError(message) {}
};

class ExtrapolationError : public Error {
public:
    explicit ExtrapolationError(const std::string& message) : Error("EXTRAPOLATION", message) {}
};

class IntervalRangeError : public Error {
public:
    explicit IntervalRangeError(const std::string& message) : Error("INTERVAL_OUT_OF_RANGE", message) {}
};

// Unknown well, solute, dataset or analysis. `code` names which.
class NotFoundError : public Error {
public:
    NotFoundError(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("IO_ERROR", message) {}
};

} // namespace plume
