#ifndef KEPLERDRAG_MANIFOLDS_HPP
#define KEPLERDRAG_MANIFOLDS_HPP

#include <array>
#include <vector>

#include "keplerdrag/integrate.hpp"
#include "keplerdrag/series.hpp"

namespace kepler {

// One periodic orbit of the planar l = 0 flow in the (r1, v) plane,
// the level set H(r1, v) = h for h in (0, 1/2).
struct PeriodicOrbitData {
    double h = 0.0;
    double r1_minus = 0.0;  // inner turning point 1/(1 + sqrt(2h))
    double r1_plus = 0.0;   // outer turning point 1/(1 - sqrt(2h))
    double period = 0.0;    // return time of the v = 0 section, chart time
    std::vector<ChartPoint> samples;  // one full revolution
};

// The orbit through the level h, traced by integration, with the section
// crossings cross-checked against the closed-form turning points.
PeriodicOrbitData gamma1(double h);

// Point of the orbit at angle phi in [0, 2pi), measured from the inner
// turning point (r1_minus, 0) and advancing with the flow: the orbit point
// at time phi / Omega0(h).
std::array<double, 2> point_on_orbit(double h, double phi);

// Action integral A(h) = 2 int sqrt(2h - (r1-1)^2/r1^2) dr1 over the oval
// (by adaptive quadrature on the square-root-free substitution) and the
// angular frequency Omega0 = 2 pi / period.
struct ActionFrequency {
    double A = 0.0;
    double Omega0 = 0.0;
};
ActionFrequency action_and_frequency(double h);

// Forward-limit estimate of H along an orbit with l > 0: integrate in the
// blowup atlas until l reaches l_cut and l_cut/ratio, evaluate the
// drag-corrected H1 there, and extrapolate assuming the l^3 drift rate.
struct HInfinityEstimate {
    double value = 0.0;
    double error_bound = 0.0;      // cutoff disagreement plus tolerance floor
    std::array<double, 2> l_cuts{0.0, 0.0};
    std::array<double, 2> h_at_cuts{0.0, 0.0};
    double drift_rate = 0.0;       // measured exponent of |H1(l) - limit|, NaN if flat
    long n_steps = 0;
};

HInfinityEstimate h_infinity(const ChartPoint& start, const Params& p, double l_cut,
                             double ratio = 10.0,
                             const IntegratorControls& base = IntegratorControls{});
HInfinityEstimate h_infinity(const PhysicalState& start, const Params& p, double l_cut,
                             double ratio = 10.0,
                             const IntegratorControls& base = IntegratorControls{});

// A point of the stable set of the orbit through h, at angle phi and height
// l0: the unique s with h_infinity(point-on-orbit(s, phi) lifted to l0) = h,
// solved to |dh| < 1e-6 by bracketed Illinois iteration.
struct FiberPoint {
    double r1 = 0.0;
    double v = 0.0;
    double s = 0.0;         // level whose orbit point the fiber hangs from
    double residual = 0.0;  // |h_infinity - h| at the returned point
    int iterations = 0;
};
FiberPoint stable_fiber(double h, double phi, double l0, const Params& p, double l_cut = 0.04);

// The graph point of the one-dimensional stable set of the zero-Hopf point
// at height l0, found by shooting: Newton on the endpoint condition that the
// orbit meets the local series graph at l = l_cut, where the truncated
// series is accurate far beyond the solver tolerance.
struct ShootResult {
    double r1 = 0.0;
    double v = 0.0;
    double H_end = 0.0;     // H at the matching height (driven below 1e-8)
    double residual = 0.0;  // endpoint mismatch after the last iteration
    int iterations = 0;
};
ShootResult ws_q1_shoot(const Params& p, double l0, double l_cut = 0.0);

// Leading coefficient of the center-manifold graph v11 = c nu^6 (1 + ...) at
// the semi-hyperbolic point at infinity; c tends to -1/delta.  Sampled by
// integrating out of a seed on the local graph (the transversal direction
// contracts forward in time, so the run converges onto the unique unstable
// set) and fit as v11/nu^6 = c + c2 nu^6.
struct CenterFit {
    double c = 0.0;
    double c2 = 0.0;
    double residual = 0.0;  // max deviation of the samples from the fit
    std::vector<std::array<double, 2>> samples;  // (nu, v11)
};
CenterFit center_manifold_fit(const Params& p, double nu_min = 0.15, double nu_max = 0.3);

}  // namespace kepler

#endif
