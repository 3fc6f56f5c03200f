#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tierrank {

/// Input rejected by a domain precondition or protocol rule.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
    ValidationError(const std::string& what, std::vector<std::string> details)
        : std::invalid_argument(what), details_(std::move(details)) {}

    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::vector<std::string> details_;
};

/// A statistic has no defined value for the given data (zero variance,
/// zero expected disagreement, too few pairable values).
class UndefinedMetricError : public std::domain_error {
public:
    explicit UndefinedMetricError(const std::string& what) : std::domain_error(what) {}
};

/// Endpoint could not be reached or answered with a transport-level failure.
/// Always retriable within the caller's attempt budget.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Persistent state on disk is unreadable.
class StorageError : public std::runtime_error {
public:
    explicit StorageError(const std::string& what) : std::runtime_error(what) {}
};

/// A workflow stage was requested before its prerequisites completed.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& what, std::vector<std::string> missing)
        : std::runtime_error(what), missing_(std::move(missing)) {}

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

}  // namespace tierrank
