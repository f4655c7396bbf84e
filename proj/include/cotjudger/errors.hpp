#pragma once

#include <stdexcept>
#include <string>

namespace cotjudger {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset or fixture content is malformed. Carries a preformatted
/// diagnostic listing every offending line/field.
class CorpusError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage received or produced data violating its contract.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& msg)
        : Error(stage + ": " + msg), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Transport-level failure talking to an annotation backend.
class BackendError : public Error {
public:
    using Error::Error;
};

/// The host environment is missing something we need (e.g. interpreter).
class EnvironmentError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (bad flags, missing fixture, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cotjudger
