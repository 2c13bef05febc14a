#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed caller input: dimension mismatches, bad bounds, bad matrices.
class InputError : public Error {
public:
    using Error::Error;
};

/// A computation produced or consumed a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A request would exceed a hard resource limit (box counts, sample budgets).
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Integration could not continue: step-size underflow or a Line coordinate
/// left the divergence bound. Carries the last time the integrator reached.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double last_time)
        : Error(what), last_time_(last_time) {}

    [[nodiscard]] double last_time() const noexcept { return last_time_; }

private:
    double last_time_;
};

/// Configuration document violates the schema; path is a JSON path like
/// `$.chainrec.epsilon`.
class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& message)
        : Error(path + ": " + message), path_(path) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace cascade
