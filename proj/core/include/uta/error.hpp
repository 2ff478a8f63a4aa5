#pragma once

#include <stdexcept>
#include <string>

namespace uta {

/// Broad failure category. Each maps to one CLI exit code.
enum class ErrorKind {
    config,   // exit 2
    backend,  // exit 3
    data,     // exit 4
    internal,
};

int exit_code(ErrorKind kind) noexcept;
const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class BackendError : public Error {
public:
    BackendError(const std::string& what, int attempts, bool retriable)
        : Error(ErrorKind::backend, what), attempts_(attempts), retriable_(retriable) {}
    int attempts() const noexcept { return attempts_; }
    bool retriable() const noexcept { return retriable_; }

private:
    int attempts_;
    bool retriable_;
};

/// Raised by the numerics when an input makes a quantity undefined
/// (empty logprob list, fewer than two samples, degenerate group).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::data, what) {}
};

}  // namespace uta
