#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grbsde {

/// Argument outside the domain of a transform (e.g. x < D).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Value outside the range of an inverse transform (e.g. y beyond the mass of 1/phi).
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Inconsistent problem or scenario configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bracketed root search did not converge within its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    [[nodiscard]] double bracket_lo() const noexcept { return lo_; }
    [[nodiscard]] double bracket_hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// A point (x, c, eta) outside the admissible set H(F^{-1}(x, c)) >= eta.
class AdmissibilityError : public std::domain_error {
public:
    AdmissibilityError(const std::string& what, double deficit,
                       std::size_t node = npos, std::size_t path = npos)
        : std::domain_error(what), deficit_(deficit), node_(node), path_(path) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// H(F^{-1}(x, c)) - eta; negative when the point is inadmissible.
    [[nodiscard]] double deficit() const noexcept { return deficit_; }
    [[nodiscard]] std::size_t node() const noexcept { return node_; }
    [[nodiscard]] std::size_t path() const noexcept { return path_; }

private:
    double deficit_;
    std::size_t node_;
    std::size_t path_;
};

}  // namespace grbsde
