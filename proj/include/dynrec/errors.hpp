#pragma once

#include <stdexcept>
#include <string>

namespace dynrec {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IngestError : std::runtime_error {
    std::size_t line;
    IngestError(std::size_t line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct ValidationError : std::runtime_error {
    std::size_t line = 0;
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
    ValidationError(std::size_t line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProviderError : std::runtime_error {
    bool backoff_exhausted = false;
    explicit ProviderError(const std::string& msg, bool exhausted = false)
        : std::runtime_error(msg), backoff_exhausted(exhausted) {}
};

struct FacetParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CacheError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunDirError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dynrec
