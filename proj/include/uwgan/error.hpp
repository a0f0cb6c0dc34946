#pragma once

#include <stdexcept>
#include <string>

namespace uwgan {

/// Bad input: malformed files, out-of-range values, shape mismatches,
/// schema violations. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A failure while doing the work: I/O, missing upstream artifacts,
/// non-finite losses. The CLI maps these to exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace uwgan
