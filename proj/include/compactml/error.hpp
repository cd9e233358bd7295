#pragma once

#include <stdexcept>
#include <string>

namespace compactml {

// Base of every error raised by the library. The CLI maps subclasses onto
// stable exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input problems: bad files, bad cells, missing columns.
class InputError : public Error {
public:
    using Error::Error;
};

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : InputError(what), row_(row), column_(std::move(column)) {}

    // 1-based data row (header excluded).
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class EmptyInputError : public InputError {
public:
    using InputError::InputError;
};

// Invalid plans, hyperparameters, or option values.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// R^2 with constant ground truth.
class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace compactml
