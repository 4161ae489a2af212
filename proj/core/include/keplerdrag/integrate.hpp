#ifndef KEPLERDRAG_INTEGRATE_HPP
#define KEPLERDRAG_INTEGRATE_HPP

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "keplerdrag/charts.hpp"
#include "keplerdrag/dynamics.hpp"

namespace kepler {

// Error control and budgets for one integration.
struct IntegratorControls {
    double rtol = 1e-12;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 = choose automatically
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 100000000;
    // Hand the orbit to the neighbouring chart at the hysteresis guards.
    // With switching off the orbit stays in its chart for the whole run.
    bool chart_switching = true;
    // Record every k-th accepted step (events, switches and the final state
    // are always recorded).
    int sample_stride = 1;
    bool record_invariants = false;
};

// Scalar event on the trajectory.  g is evaluated on dense output; a crossing
// is located to |g| < 1e-13 * scale by bracketing plus Illinois iteration.
// direction: +1 fires on -..0..+, -1 on +..0..-, 0 on either.
struct Event {
    std::string name;
    std::function<double(const ChartPoint&)> g;
    int direction = 0;
    bool terminal = false;
};

Event l_below_event(double l_threshold, bool terminal, std::string name = "");
Event v_section_event(int direction = 0, bool terminal = false, std::string name = "v=0");

struct EventRecord {
    std::string name;
    double tau;
    ChartPoint state;
};

struct SwitchRecord {
    double tau;
    ChartId from;
    ChartId to;
    ChartPoint before;
    ChartPoint after;
};

enum class IntegrationStatus {
    ReachedEnd,           // tau_end reached
    TerminalEvent,        // a terminal event fired
    StepUnderflow,        // step below 1e-15 * scale; true singularity ahead
    StepBudgetExhausted,  // max_steps spent, reported not truncated silently
    ChartEscape,          // left the chart with no admissible target
};

const char* status_name(IntegrationStatus s);

struct Trajectory {
    std::vector<double> taus;         // cumulative chart time (per-segment meaning)
    std::vector<ChartPoint> samples;  // parallel to taus
    std::vector<Invariants> sample_invariants;  // filled when record_invariants
    std::vector<double> dissipation;  // cumulative drag work, PHYS runs only
    std::vector<EventRecord> events;
    std::vector<SwitchRecord> chart_history;
    IntegrationStatus status = IntegrationStatus::ReachedEnd;
    std::string message;
    long n_accepted = 0;
    long n_rejected = 0;
    long n_rhs = 0;

    const ChartPoint& last() const { return samples.back(); }
    double last_tau() const { return taus.back(); }
};

// Integrate the desingularized flow from `start` for chart time tau_end.
// Physical time and the polar angle ride along as extra quadrature states, so
// a chart switch changes only the parametrization, never the curve.  l = 0
// and the other invariant planes are pinned: a coordinate starting exactly at
// zero stays zero.
Trajectory integrate(const ChartPoint& start, const Params& p, const IntegratorControls& controls,
                     const std::vector<Event>& events, double tau_end);

// Same on the PHYS chart in original time; also accumulates the drag work
// integral of delta |udot|^2 into Trajectory::dissipation.
Trajectory integrate_physical(const PhysicalState& start, const Params& p,
                              const IntegratorControls& controls, const std::vector<Event>& events,
                              double t_end);

}  // namespace kepler

#endif
