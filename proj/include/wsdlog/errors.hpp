#pragma once

#include <stdexcept>
#include <string>

namespace wsdlog {

/// Malformed source text. Carries a 1-based line/column of the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, std::size_t line, std::size_t column)
        : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                             std::to_string(column) + ": " + msg),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Well-formed text that violates a program-level rule (arity, safety, ...).
class SemanticError : public std::runtime_error {
public:
    explicit SemanticError(const std::string& msg)
        : std::runtime_error("semantic error: " + msg) {}
};

/// A class precondition of an algorithm does not hold on its input.
class PreconditionViolated : public std::runtime_error {
public:
    explicit PreconditionViolated(const std::string& msg)
        : std::runtime_error("precondition violated: " + msg) {}
};

class NotWeaklySticky : public PreconditionViolated {
public:
    NotWeaklySticky() : PreconditionViolated("rule set is not weakly-sticky") {}
};

class NotSticky : public PreconditionViolated {
public:
    NotSticky() : PreconditionViolated("rule set is not sticky") {}
};

/// A configured safety cap was hit; signals a mis-set cap, not a wrong input.
class CapExceeded : public std::runtime_error {
public:
    explicit CapExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

class RuleCapExceeded : public CapExceeded {
public:
    explicit RuleCapExceeded(std::size_t cap)
        : CapExceeded("ground rule cap exceeded (" + std::to_string(cap) + ")") {}
};

class DisjunctCapExceeded : public CapExceeded {
public:
    explicit DisjunctCapExceeded(std::size_t cap)
        : CapExceeded("rewriting disjunct cap exceeded (" + std::to_string(cap) + ")") {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error("i/o error: " + msg) {}
};

class UnknownPredicate : public std::runtime_error {
public:
    explicit UnknownPredicate(const std::string& pred)
        : std::runtime_error("unknown predicate: " + pred) {}
};

class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg)
        : std::logic_error("internal invariant breached: " + msg) {}
};

}  // namespace wsdlog
