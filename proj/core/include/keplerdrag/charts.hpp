#ifndef KEPLERDRAG_CHARTS_HPP
#define KEPLERDRAG_CHARTS_HPP

#include <array>
#include <string>
#include <vector>

#include "keplerdrag/errors.hpp"

namespace kepler {

// Atlas of the blown-up, compactified planar Kepler-with-drag phase space.
//
// Base variables are (r, rdot, l) with l = |angular momentum| >= 0 and the
// auxiliary v = l*rdot.  The cylindrical blowup of {r = l = 0} produces the
// C1/C2 charts, a second blowup of {v = l2 = 0} inside C2 produces
// C21/C22/C23, and the r -> infinity compactification produces the *INF
// charts.  Coordinate triples:
//
//   PHYS    (r, rdot, l)           r > 0
//   RVL     (r, v, l)              v = l*rdot
//   C1      (r1, v, rho1)          r = rho1^2 r1,  l = rho1
//   C2      (rho2, v, l2)          r = rho2^2,     l = rho2 l2
//   C21     (rho2, v1, mu1)        v = mu1 v1,     l2 = mu1        [v1 = rho2 rdot]
//   C22     (rho2, mu2, l22)       v = mu2,        l2 = mu2 l22    [v > 0 side]
//   C23     (rho2, mu3, l23)       v = -mu3,       l2 = mu3 l23    [v < 0 side]
//   C21INF  (nu, v11, mu11)        rho2 = 1/nu, v1 = v11/nu^3, mu1 = nu^3 mu11
//   C22INF  (nu, mu2, l222)        rho2 = 1/nu, l22 = nu^3 l222
//   C23INF  (nu, mu3, l233)        rho2 = 1/nu, l23 = nu^3 l233
//
// In physical terms: v11 = rdot/r, mu11 = l*r, l222 = r/rdot, l233 = -r/rdot.
enum class ChartId {
    PHYS,
    RVL,
    C1,
    C2,
    C21,
    C22,
    C23,
    C21INF,
    C22INF,
    C23INF,
};

constexpr int kNumCharts = 10;

const char* chart_name(ChartId id);
ChartId chart_from_name(const std::string& name);

// Names of the three coordinates of a chart, for CSV headers and messages.
std::array<const char*, 3> chart_coord_names(ChartId id);

struct PhysicalState {
    double r = 1.0;      // radius, > 0
    double rdot = 0.0;   // radial velocity
    double l = 0.0;      // angular momentum magnitude, >= 0
    double theta = 0.0;  // polar angle, unwrapped
    double t = 0.0;      // physical time
};

// A point in one chart.  theta is stored unwrapped so the total winding
// stays recoverable; t_phys is accumulated physical time.
struct ChartPoint {
    ChartId chart = ChartId::PHYS;
    std::array<double, 3> c{1.0, 0.0, 0.0};
    double theta = 0.0;
    double t_phys = 0.0;
};

// Chart-domain bounds.  The blowup construction does not single out guard
// values; these margins keep every chart coordinate O(1) along the orbits
// the toolkit integrates, with overlap bands wide enough for hysteresis.
struct DomainLimits {
    double r1_max = 4.0;    // C1 valid for r1 in (0, r1_max]
    double l2_max = 2.0;    // C2 valid for l2 in [0, l2_max]
    double l22_max = 1.0;   // C22/C23 valid below (v1 beyond +-1)
    double nu_max = 1.05;   // *INF charts valid for nu in [0, nu_max]
};

const DomainLimits& domain_limits();

// True when the coordinates satisfy the chart's domain predicate
// (nonnegative radial-type coordinates plus the margins above).
bool in_domain(ChartId id, const std::array<double, 3>& c);

// --- Derived scalars, valid on blowup sets as well ------------------------

// r, l, v = l*rdot from chart coordinates.  Defined for every chart point,
// including points on the blown-up sets (where r or l may be 0, or r = inf
// at nu = 0 in the *INF charts).
double radius(const ChartPoint& p);
double angular_momentum(const ChartPoint& p);
double v_of(const ChartPoint& p);

// --- Chart maps ------------------------------------------------------------

// Map a chart point to the physical variables.  Throws DomainError when the
// inverse requires division by a vanishing coordinate (e.g. l = 0 when
// recovering rdot = v/l) or lands at r = 0 or r = inf.
PhysicalState to_physical(const ChartPoint& p);

// Inverse of to_physical onto a named chart.  Throws DomainError when the
// target chart cannot represent the state (e.g. C22 needs v = l*rdot > 0).
ChartPoint from_physical(const PhysicalState& s, ChartId target);

// Change coordinates to an overlapping chart.  theta and t_phys are carried
// unchanged.  Works on blowup sets (l = 0, r = 0, nu = 0) where the detour
// through PhysicalState would be undefined.  Throws DomainError outside the
// overlap of the two charts.
ChartPoint transition(const ChartPoint& p, ChartId target);

// Charts directly connected to `id` by a closed-form transition.
std::vector<ChartId> adjacent_charts(ChartId id);

}  // namespace kepler

#endif
