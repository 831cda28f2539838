#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nullflow {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Expression parser failure; offset is a byte position into the input text.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : Error(message + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Expression evaluation failure: unbound variable, division by zero,
/// or a non-finite intermediate value.
class EvalError : public Error {
public:
    using Error::Error;
};

/// Frame or curvature data violates the structural requirements of its kind.
class FrameError : public Error {
public:
    using Error::Error;
};

/// A quantity that must stay away from zero fell below its threshold
/// (vanishing first curvature, null tangent, degenerate gauge pairing).
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// Evolution or integration detected runaway state: frame residual blow-up,
/// non-finite fields, or a grid that stopped being usable.
class NumericalAbort : public Error {
public:
    using Error::Error;
};

/// Scenario configuration problems; carries every issue found, not just the first.
class ScenarioError : public Error {
public:
    ScenarioError(const std::string& summary, std::vector<std::string> issues)
        : Error(join(summary, issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::string& summary, const std::vector<std::string>& issues) {
        std::string out = summary;
        for (const auto& issue : issues) {
            out += "\n  - ";
            out += issue;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

}  // namespace nullflow
