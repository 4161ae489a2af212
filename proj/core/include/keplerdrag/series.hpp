#ifndef KEPLERDRAG_SERIES_HPP
#define KEPLERDRAG_SERIES_HPP

#include <array>
#include <iosfwd>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "keplerdrag/dynamics.hpp"

namespace kepler {

using Rational = boost::multiprecision::cpp_rational;

// Formal series data of the one-dimensional invariant graph through the
// zero-Hopf point q1 = (1, 0, 0).  In the blown-up variables
//   r1 = 1 + x y1(x),  v = x (y2(x) - 2 delta),  x = l^3,
// y solves  x^2 y' = A y + f(x, y)  with A = [[0, -1/(3d)], [1/(3d), 0]],
// and y(x) = sum_n Y_n x^n is its unique formal power-series solution.
// The coefficients alternate components: Y_odd = (*, 0), Y_even = (0, *),
// and grow like n!, so the series is summed, never evaluated directly.
//
// (The C21INF chart reuses the v11 symbol for an unrelated coordinate;
// inside this module the series components are named y1, y2.)
struct SeriesCoefficients {
    Params params;
    int N = 0;            // truncation order; Y[n-1] holds Y_n, n = 1..N
    int exact_order = 0;  // orders 1..exact_order carry exact rationals
    std::vector<std::array<double, 2>> Y;
    std::vector<std::array<Rational, 2>> Y_exact;
    // Fitted growth constants of |Y_n| <= a b^n n! (see gevrey_fit).
    double gevrey_a = 0.0;
    double gevrey_b = 0.0;
    double gevrey_r2 = 0.0;
};

// Coefficients through order N.  Orders up to exact_cap are computed in
// exact rational arithmetic (factorial growth would destroy the recurrence
// tail in floating point); higher orders continue in double.  Throws
// OverflowError when the double continuation leaves the representable range.
SeriesCoefficients compute_coefficients(const Params& p, int N, int exact_cap = 40);

// Least-squares fit of log(|Y_n|/n!) ~ log a + n log b over the last
// ceil(N/2) orders; requires N >= 10.  The returned a is inflated so the
// bound |Y_n| <= a b^n n! holds for every computed order.  Throws FitError
// when the points are not log-linear with R^2 >= 0.99.
std::pair<double, double> gevrey_fit(SeriesCoefficients& sc);

enum class SummationMode { TruncatedOptimal, BorelPadeLaplace };

struct ManifoldPoint {
    double r1 = 1.0;
    double v = 0.0;
    double est_error = 0.0;   // minimal-term size or quadrature/tail estimate
    int n_opt = 0;            // truncation index used (TruncatedOptimal)
    bool advisory = false;    // l beyond the trusted window, value indicative
    SummationMode mode_used = SummationMode::TruncatedOptimal;
};

// Largest l at which the summed graph is reported without the advisory flag.
constexpr double kManifoldLSmall = 0.5;

// Evaluate the invariant graph at angular momentum l.
//   TruncatedOptimal  sums to the index minimizing the term magnitude.
//   BorelPadeLaplace  sums Borel coefficients Y_{n+1}/n!, continues them by a
//                     diagonal Pade approximant (built per component on the
//                     parity-reduced variable u^2), and evaluates the Laplace
//                     integral on [0, 10x] by adaptive Gauss-Kronrod plus an
//                     analytic tail term.
// Falls back to TruncatedOptimal (advisory mode_used) if the Pade denominator
// has a pole on the integration path.
ManifoldPoint evaluate_manifold(const SeriesCoefficients& sc, double l, SummationMode mode);

// CSV export: "n,Y_n_1,Y_n_2", exact orders printed as exact decimal strings
// (or p/q literals when the denominator is not 2^a 5^b), the rest as %.17g.
void write_coefficients_csv(const SeriesCoefficients& sc, std::ostream& os);

}  // namespace kepler

#endif
