#ifndef KEPLERDRAG_DYNAMICS_HPP
#define KEPLERDRAG_DYNAMICS_HPP

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "keplerdrag/charts.hpp"

namespace kepler {

// Drag coefficient of  u'' + delta u' + u/|u|^3 = 0  (unit gravitational
// parameter).  delta = 0 is admitted for conservative-limit tests only.
struct Params {
    double delta = 1.0;
};

// Right-hand side of the desingularized flow in one chart.
//   dcdtau      chart-coordinate derivatives w.r.t. chart time tau
//   dt_dtau     physical-time rescaling factor (>= 0 on the chart domain)
//   dtheta_dtau polar-angle rate in chart time, = (l/r^2) * dt_dtau
struct FieldOutput {
    std::array<double, 3> dcdtau{};
    double dt_dtau = 1.0;
    double dtheta_dtau = 0.0;
};

// Conserved and monitored quantities of a physical state.
//   E = K + P          energy (drag makes it non-increasing)
//   ecc                eccentricity vector in the inertial frame
//   H  = |ecc|^2 / 2   in the (r1, v) = (r/l^2, l rdot) variables; NaN at l = 0
//   H1                 drag-corrected H, H + 2 delta r1 v x + 3 delta^2 r1^2 x^2, x = l^3
//   H2                 H expressed through l2 = l/sqrt(r); defined for every r > 0
struct Invariants {
    double E = 0.0;
    double K = 0.0;
    double P = 0.0;
    double l = 0.0;
    std::array<double, 2> ecc{0.0, 0.0};
    double H = 0.0;
    double H1 = 0.0;
    double H2 = 0.0;
};

// Two time normalizations of the C1 chart flow.  ChartTime divides by l^3
// (the form the invariant-manifold analysis uses); RadialScaled divides by
// l^3 r1^3 (the form produced directly by the blowup).  They trace the same
// curves, related by the positive factor r1^3.
enum class C1Form { ChartTime, RadialScaled };

// Desingularized vector field of a chart at coordinates c.
// Throws DomainError when the right-hand side is undefined (r = 0 in PHYS,
// r1 = 0 in C1, non-finite input); the engineering chart-switch margins are
// not enforced here.
FieldOutput vector_field(ChartId id, const std::array<double, 3>& c, const Params& p,
                         C1Form c1_form = C1Form::ChartTime);

// Jacobian of vector_field's dcdtau at c.  Hand-coded for C1, C21 and C21INF;
// central finite differences with step 1e-6 (1 + |c|) elsewhere.
std::array<std::array<double, 3>, 3> jacobian(ChartId id, const std::array<double, 3>& c,
                                              const Params& p);

// All invariant quantities of a physical state (r > 0 required; H and H1 are
// NaN when l = 0 since r1 = r/l^2 is undefined there, H2 takes over).
Invariants invariants(const PhysicalState& s, const Params& p);

// Invariants evaluated through chart coordinates; usable on blowup states
// where to_physical fails.  Fields whose defining variables are singular at
// the point come back NaN.
Invariants invariants_at(const ChartPoint& p, const Params& params);

struct LieDerivativeH1 {
    double numeric;      // grad(H1) . X1 with the exact gradient
    double closed_form;  // -6 delta^3 r1^2 x^3
};

// Drift identity for H1 along the (r1, v, x) flow, x = l^3.  The two fields
// agree to rounding; the pair is kept separate so the identity is testable.
LieDerivativeH1 lie_derivative_H1(double r1, double v, double x, const Params& p);

struct Equilibrium {
    std::string name;
    std::array<double, 3> coords;
    std::array<std::complex<double>, 3> eigenvalues;  // of the full 3x3 Jacobian
    bool has_inplane = false;
    // Spectrum of the flow restricted to the invariant plane the equilibrium
    // is hyperbolic in (the nu = 0 subsystem for the points at infinity).
    std::array<double, 2> inplane{0.0, 0.0};
};

// Named equilibria of the chart with numerically computed spectra.
std::vector<Equilibrium> equilibria(ChartId id, const Params& p);

}  // namespace kepler

#endif
