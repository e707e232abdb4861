#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hlchoice {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file content. Carries the location of the offending field.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, std::string field, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": field '" + field + "': " + what),
          file_(std::move(file)), line_(line), field_(std::move(field)) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::string file_;
    std::size_t line_;
    std::string field_;
};

/// A required input file or artifact is absent.
class MissingInputError : public Error {
public:
    using Error::Error;
};

/// A date lies outside the loaded workday calendar.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Inputs that are well-formed but unusable (empty dataset, unknown region, bad shapes).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace hlchoice
