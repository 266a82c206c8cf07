#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace repshift {

/// Input arrays do not have the shape an operation expects.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Point or parameter outside the domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class EmptyInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (e.g. missing responses).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite loss.
class DivergedTraining : public std::runtime_error {
public:
    DivergedTraining(std::size_t epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A derivative oracle failed while building an approximant.
class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreprocessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace repshift
