#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shrinklogit {

// Dimension mismatches, out-of-range parameters and malformed specs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Inputs outside the mathematical domain of a function (e.g. a probability of 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// X'VX could not be factorized at the given IRLS iteration (0 = closed-form solve).
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

// The cross-product matrix was not positive definite or had non-finite entries.
class DecompositionError : public std::runtime_error {
public:
    DecompositionError(const std::string& what, double smallest_eigenvalue)
        : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}

    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

// Every replication of a simulation cell diverged.
class CellFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structured CSV / config parse error. line is 1-based, 0 when not line specific.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace shrinklogit

namespace shrinklogit {

// IRLS stopped at max_iterations where a converged fit is required.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace shrinklogit
