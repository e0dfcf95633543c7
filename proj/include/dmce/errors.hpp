#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmce {

/// Thrown when a Gram matrix turns out to be numerically rank deficient.
/// Carries the index of the offending pivot.
class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(std::size_t pivot_index, double pivot_value)
        : std::runtime_error("singular Gram matrix: pivot " + std::to_string(pivot_index) +
                             " has magnitude " + std::to_string(pivot_value)),
          pivot_index_(pivot_index),
          pivot_value_(pivot_value) {}

    std::size_t pivot_index() const { return pivot_index_; }
    double pivot_value() const { return pivot_value_; }

private:
    std::size_t pivot_index_;
    double pivot_value_;
};

/// Thrown when a training loss becomes non-finite.
class TrainingDivergedError : public std::runtime_error {
public:
    explicit TrainingDivergedError(std::size_t epoch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}

    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

/// Thrown on malformed configuration or input files.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
    ConfigError(const std::string& file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

}  // namespace dmce
