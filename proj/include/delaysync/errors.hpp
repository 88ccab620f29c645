#pragma once

#include <stdexcept>
#include <string>

namespace delaysync {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched or invalid matrix/vector dimensions.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Iterative solver failed to converge within its iteration cap.
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error(what) {}
};

/// Gain synthesis failed (non-stabilizable / non-detectable pair).
class SynthesisError : public Error {
public:
    explicit SynthesisError(const std::string& what) : Error(what) {}
};

/// Communication structure is not a rooted directed spanning tree.
class TopologyError : public Error {
public:
    explicit TopologyError(const std::string& what) : Error(what) {}
};

/// Agent/exosystem model violates a structural assumption.
class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(what) {}
};

/// Pre-compensator construction or contract validation failed.
class HomogenizationError : public Error {
public:
    explicit HomogenizationError(const std::string& what) : Error(what) {}
};

/// A signal left the finite range during simulation.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

/// Scenario file could not be parsed or validated.
class ScenarioError : public Error {
public:
    explicit ScenarioError(const std::string& what) : Error(what) {}
};

/// Scenario document is not well-formed (syntax, missing/mistyped fields).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

/// Filesystem failure (unreadable input, unwritable output).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace delaysync
