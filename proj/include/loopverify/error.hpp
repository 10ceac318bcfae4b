#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loopverify {

/// Base of every error the library throws on bad input or impossible execution.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text (JSON or S-expression). `position()` is a byte offset into the parsed text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " (at offset " + std::to_string(position) + ")"), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Well-formed input that violates a domain or controller invariant.
class SemanticError : public Error {
public:
    using Error::Error;
};

/// The requested semantics does not apply to the given domain (e.g. T* on a noisy domain).
class UnsupportedModel : public Error {
public:
    using Error::Error;
};

/// Execution cannot continue: annihilated belief, impossible observation, inconsistent scenario.
class ExecutionError : public Error {
public:
    using Error::Error;
};

} // namespace loopverify
