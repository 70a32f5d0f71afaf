#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace smpheat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array shapes or truncation sizes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (negative time, alpha >= 1/2, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Raised by the time steppers when a coefficient becomes non-finite or exceeds the blowup threshold.
class BlowupError : public Error {
public:
    BlowupError(std::size_t step, std::size_t path, const std::string& what)
        : Error("blowup at step " + std::to_string(step) + " on path " + std::to_string(path) + ": " + what),
          step_(step), path_(path) {}

    std::size_t step() const noexcept { return step_; }
    std::size_t path() const noexcept { return path_; }

private:
    std::size_t step_;
    std::size_t path_;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Optimizer could not find an acceptable step.
class StallError : public Error {
public:
    using Error::Error;
};

class TruncationMismatchError : public Error {
public:
    using Error::Error;
};

/// Carries every violation found while validating a configuration, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += "; ";
            out += item;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

}  // namespace smpheat
