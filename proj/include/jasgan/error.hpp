#pragma once

#include <stdexcept>
#include <string>

namespace jasgan {

// Error categories double as CLI exit codes (see README).
enum class ErrorKind : int {
    Config = 3,
    MissingInput = 4,
    Shape = 5,
    DegenerateInput = 6,
    UndefinedMetric = 7,
    Io = 8,
    Diverged = 9,
    RefuseOverwrite = 10,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::MissingInput: return "missing_input";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::DegenerateInput: return "degenerate_input";
    case ErrorKind::UndefinedMetric: return "undefined_metric";
    case ErrorKind::Io: return "io";
    case ErrorKind::Diverged: return "diverged";
    case ErrorKind::RefuseOverwrite: return "refuse_overwrite";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct MissingInputError : Error {
    explicit MissingInputError(const std::string& w) : Error(ErrorKind::MissingInput, w) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& w) : Error(ErrorKind::DegenerateInput, w) {}
};
struct UndefinedMetricError : Error {
    explicit UndefinedMetricError(const std::string& w) : Error(ErrorKind::UndefinedMetric, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct DivergedError : Error {
    explicit DivergedError(const std::string& w) : Error(ErrorKind::Diverged, w) {}
};
struct RefuseOverwriteError : Error {
    explicit RefuseOverwriteError(const std::string& w) : Error(ErrorKind::RefuseOverwrite, w) {}
};

} // namespace jasgan
