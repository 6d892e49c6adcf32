#pragma once

#include <stdexcept>
#include <string>

namespace odaa {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kInfeasible = 3,
    kNumericalFailure = 4,
};

/// Malformed or out-of-contract input (bad CSV, dimension mismatch, non-positive price).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A constraint system or target specification admits no solution.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or otherwise unusable number.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace odaa
