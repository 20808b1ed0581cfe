#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace battctl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data or configuration (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A caller passed arguments outside an operation's domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Battery dynamics left [0, b_max].
class DynamicsError : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap (CLI exit code 3).
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (last residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Cell of a policy table: exogenous state index and battery grid index.
struct Cell {
    std::size_t state = 0;
    std::size_t level = 0;
};

/// Policy is not of two-threshold form.
class StructureError : public Error {
public:
    StructureError(const std::string& what, std::vector<Cell> cells)
        : Error(what), cells_(std::move(cells)) {}
    const std::vector<Cell>& cells() const noexcept { return cells_; }

private:
    std::vector<Cell> cells_;
};

/// Two routes that must agree did not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

}  // namespace battctl
