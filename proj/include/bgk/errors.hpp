#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bgk {

/// Base class for every failure raised by the library. `kind()` is a stable
/// machine-readable tag (used in CLI failure summaries).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define BGK_DEFINE_ERROR(Name)                                                 \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

BGK_DEFINE_ERROR(InvalidConfig);
BGK_DEFINE_ERROR(CutoffTooSmall);
BGK_DEFINE_ERROR(RankDeficiency);
BGK_DEFINE_ERROR(GridMismatch);
BGK_DEFINE_ERROR(GramSingular);
BGK_DEFINE_ERROR(NegativeDensityValue);
BGK_DEFINE_ERROR(OrderTooHighForGrid);
BGK_DEFINE_ERROR(NonPositiveValue);
BGK_DEFINE_ERROR(ZeroField);
BGK_DEFINE_ERROR(ValidationError);
BGK_DEFINE_ERROR(PositivityViolation);

#undef BGK_DEFINE_ERROR

/// Raised when a spatial cell has non-positive density or temperature.
class DegenerateState : public Error {
public:
    DegenerateState(std::size_t cell, const std::string& what)
        : Error("DegenerateState", "cell " + std::to_string(cell) + ": " + what),
          cell_(cell) {}

    std::size_t cell() const noexcept { return cell_; }

private:
    std::size_t cell_;
};

class NewtonDivergence : public Error {
public:
    NewtonDivergence(std::size_t cell, double residual)
        : Error("NewtonDivergence",
                "moment matching failed in cell " + std::to_string(cell) +
                    " (residual " + std::to_string(residual) + ")"),
          cell_(cell), residual_(residual) {}

    std::size_t cell() const noexcept { return cell_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t cell_;
    double residual_;
};

class NonFiniteState : public Error {
public:
    NonFiniteState(std::size_t step, const std::string& what)
        : Error("NonFiniteState", "step " + std::to_string(step) + ": " + what),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Config-file syntax error, carrying the offending line and key.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string key, const std::string& what)
        : Error("ParseError", "line " + std::to_string(line) +
                                  (key.empty() ? "" : " key '" + key + "'") +
                                  ": " + what),
          line_(line), key_(std::move(key)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    std::size_t line_;
    std::string key_;
};

} // namespace bgk
