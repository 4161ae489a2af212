#ifndef KEPLERDRAG_ERRORS_HPP
#define KEPLERDRAG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kepler {

// Input outside the domain of a chart map, vector field or operation.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Coefficient magnitude left the representable floating-point range.
// largest_valid order is the last order that was computed successfully.
class OverflowError : public std::overflow_error {
public:
    OverflowError(const std::string& what, int largest_valid)
        : std::overflow_error(what), largest_valid_order(largest_valid) {}
    int largest_valid_order;
};

// Least-squares fit failed its quality gate (R^2 or residual bound).
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what, double r_squared = 0.0)
        : std::runtime_error(what), r2(r_squared) {}
    double r2;
};

// A Pade denominator root lies on the Laplace integration path.
class PoleOnPathError : public std::runtime_error {
public:
    explicit PoleOnPathError(const std::string& what, double pole = 0.0)
        : std::runtime_error(what), pole_location(pole) {}
    double pole_location;
};

class QuadratureError : public std::runtime_error {
public:
    explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

// No sign change found when bracketing a scalar root.
class RootBracketError : public std::runtime_error {
public:
    explicit RootBracketError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solve or a two-cutoff estimate failed its convergence gate.
// value_a/value_b carry the disagreeing quantities for diagnostics.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double a, double b)
        : std::runtime_error(what), value_a(a), value_b(b) {}
    double value_a;
    double value_b;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kepler

#endif
