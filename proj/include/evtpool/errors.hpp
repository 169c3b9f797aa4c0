#ifndef EVTPOOL_ERRORS_HPP
#define EVTPOOL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace evtpool {

// Bad or missing user input (CSV, config, flags). CLI maps this to exit 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : InputError {
    ParseError(const std::string& what, std::size_t line)
        : InputError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

struct ValidationError : InputError {
    using InputError::InputError;
};

struct InsufficientDataError : InputError {
    using InputError::InputError;
};

// Persisted artifact has an incompatible schema version. CLI exit 3.
struct VersionMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure inside a fit or derived computation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace evtpool

#endif
