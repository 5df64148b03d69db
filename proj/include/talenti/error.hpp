#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace talenti {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A MESH v1 file (or similar text input) is malformed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Structural invariant of a mesh or dof map is violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition (mismatched meshes, negative fields, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
          last_residual_(last_residual) {}

    [[nodiscard]] double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

/// Iteration behaved in a way that signals a modelling problem (e.g. a
/// Rayleigh quotient that oscillates instead of decreasing).
class DiagnosticError : public Error {
public:
    using Error::Error;
};

/// A comparison was requested outside the hypotheses under which it is a theorem.
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Scenario document does not match the schema. `pointer()` is a JSON pointer.
class ConfigError : public Error {
public:
    ConfigError(const std::string& pointer, const std::string& what)
        : Error((pointer.empty() ? std::string("/") : pointer) + ": " + what), pointer_(pointer) {}

    [[nodiscard]] const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace talenti
