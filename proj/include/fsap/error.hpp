#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fsap {

/// Base class for every error raised by the workbench.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input record. `line()` is 1-based, 0 when not line oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A remote service call failed. Retryable failures are retried by RetryPolicy.
class BackendError : public Error {
public:
    BackendError(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class TransientError : public BackendError {
public:
    explicit TransientError(const std::string& what) : BackendError(what, true) {}
};

class AuthError : public BackendError {
public:
    explicit AuthError(const std::string& what) : BackendError(what, false) {}
};

/// Scoring a document failed; carries the document id.
class ScoringError : public Error {
public:
    ScoringError(std::string doc_id, std::string reason)
        : Error("scoring " + doc_id + ": " + reason), doc_id_(std::move(doc_id)), reason_(std::move(reason)) {}

    const std::string& doc_id() const noexcept { return doc_id_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string doc_id_;
    std::string reason_;
};

}  // namespace fsap
