#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace afrelay {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class NotPositiveSemidefinite : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

// Raised when a derived quantity violates a guarantee that holds for valid inputs.
class InternalError : public Error {
public:
    using Error::Error;
};

// Alternating allocation did not meet its stopping rule; carries the objective trace.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace afrelay
