#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mphp {

// Every failure raised by the library carries a short machine-readable
// category so the CLI can print "error: <category>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    [[nodiscard]] const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input", what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, double partial_estimate)
        : Error("numeric", what), partial_estimate_(partial_estimate) {}

    [[nodiscard]] double partial_estimate() const noexcept { return partial_estimate_; }

private:
    double partial_estimate_;
};

class EstimationError : public Error {
public:
    EstimationError(const std::string& what, std::size_t index)
        : Error("estimation", what), index_(index) {}

    // Event index (E-step) or iteration index (EM loop) that failed.
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what) : Error("simulation", what) {}
};

class LoadError : public Error {
public:
    explicit LoadError(const std::string& what) : Error("load", what) {}
};

class ReplicateError : public Error {
public:
    ReplicateError(const std::string& what, std::size_t replicate)
        : Error("replicate", what), replicate_(replicate) {}

    [[nodiscard]] std::size_t replicate() const noexcept { return replicate_; }

private:
    std::size_t replicate_;
};

} // namespace mphp
