#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace actdet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Malformed record in a line-oriented file. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UndefinedRecall : public Error {
public:
    using Error::Error;
};

class ScoringError : public Error {
public:
    ScoringError(std::int64_t proposal_id, const std::string& what)
        : Error("proposal " + std::to_string(proposal_id) + ": " + what), proposal_id_(proposal_id) {}
    std::int64_t proposal_id() const noexcept { return proposal_id_; }

private:
    std::int64_t proposal_id_;
};

}  // namespace actdet
