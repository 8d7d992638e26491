#pragma once

#include <stdexcept>
#include <string>

namespace gmpc {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when printing one-line errors.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& m) : Error("domain", m) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& m) : Error("numerical", m) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(int epoch, const std::string& m)
        : Error("divergence", m), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class EvaluationError : public Error {
public:
    explicit EvaluationError(const std::string& m) : Error("evaluation", m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace gmpc
