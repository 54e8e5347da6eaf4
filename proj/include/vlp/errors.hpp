#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vlp {

/// Base of every error raised by the runtime. `code()` is a stable
/// machine-readable identifier; `what()` carries the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message, std::string code = "SchemaError")
        : Error(std::move(code), message) {}
};

class ScenarioError : public Error {
public:
    explicit ScenarioError(const std::string& message) : Error("ScenarioError", message) {}
};

class UnknownEmbodiment : public Error {
public:
    explicit UnknownEmbodiment(const std::string& name)
        : Error("UnknownEmbodiment", "unknown embodiment profile: " + name) {}
};

class UnknownObject : public Error {
public:
    explicit UnknownObject(const std::string& label)
        : Error("UnknownObject", "no object labelled '" + label + "'") {}
};

class DuplicateObject : public Error {
public:
    explicit DuplicateObject(const std::string& label)
        : Error("DuplicateObject", "object '" + label + "' already exists") {}
};

class UnresolvedReference : public Error {
public:
    explicit UnresolvedReference(const std::string& message)
        : Error("UnresolvedReference", message) {}
};

class UnsupportedInstruction : public Error {
public:
    explicit UnsupportedInstruction(const std::string& instruction)
        : Error("UnsupportedInstruction", "instruction outside the oracle grammar: " + instruction) {}
};

class CorpusError : public Error {
public:
    explicit CorpusError(const std::string& message) : Error("CorpusError", message) {}
};

/// Raised by a planner backend that could not produce a reply at all.
class PlannerUnavailable : public Error {
public:
    enum class Cause { timeout, transport, http_status };

    PlannerUnavailable(Cause cause, int attempts, const std::string& message)
        : Error("PlannerUnavailable", message), cause_(cause), attempts_(attempts) {}

    Cause cause() const noexcept { return cause_; }
    int attempts() const noexcept { return attempts_; }

private:
    Cause cause_;
    int attempts_;
};

} // namespace vlp
