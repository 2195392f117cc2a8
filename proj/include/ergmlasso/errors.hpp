#pragma once

#include <stdexcept>
#include <string>

namespace ergmlasso {

// Exit codes used by the CLI: 0 ok, 2 input/parse, 3 non-convergence,
// 4 numerical/degeneracy.
enum class ExitCode : int {
    ok = 0,
    input = 2,
    nonconvergence = 3,
    numerical = 4,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ExitCode exit_code() const { return code_; }

private:
    ExitCode code_;
};

// Bad input files, malformed values, invalid arguments.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(ExitCode::input, msg) {}
};

// Model spec inconsistent with itself or with the attribute data.
class SpecError : public InputError {
public:
    explicit SpecError(const std::string& msg) : InputError(msg) {}
};

// API misuse (out-of-range dyad, i == j, m < 2, ...).
class UsageError : public InputError {
public:
    explicit UsageError(const std::string& msg) : InputError(msg) {}
};

// An iterative routine hit its budget without converging.
class NonconvergenceError : public Error {
public:
    explicit NonconvergenceError(const std::string& msg)
        : Error(ExitCode::nonconvergence, msg) {}
};

// Overflow, degeneracy, singular covariance, capacity limits.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg)
        : Error(ExitCode::numerical, msg) {}
};

class CapacityError : public NumericalError {
public:
    explicit CapacityError(const std::string& msg) : NumericalError(msg) {}
};

class DegeneracyError : public NumericalError {
public:
    explicit DegeneracyError(const std::string& msg) : NumericalError(msg) {}
};

class CollinearityError : public NumericalError {
public:
    explicit CollinearityError(const std::string& msg) : NumericalError(msg) {}
};

} // namespace ergmlasso
