#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace matt {

/// Bad shapes, bad config values, out-of-range indices.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Rejection sampling could not place the requested number of objects.
class CapacityError : public std::runtime_error {
public:
    CapacityError(const std::string& what, std::size_t requested)
        : std::runtime_error(what), requested_(requested) {}
    std::size_t requested() const noexcept { return requested_; }

private:
    std::size_t requested_;
};

/// A loss became NaN/Inf during training.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, long long step)
        : std::runtime_error(what), step_(step) {}
    long long step() const noexcept { return step_; }

private:
    long long step_;
};

/// Missing input artifacts and malformed files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input file the command needs does not exist.
class MissingInput : public IoError {
public:
    using IoError::IoError;
};

} // namespace matt
