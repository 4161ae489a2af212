#include "keplerdrag/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace kepler {

namespace {

// Dormand-Prince 5(4) tableau (the fields are autonomous, so the stage
// nodes never appear explicitly).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - bhat, the embedded 4th-order error weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

constexpr int NS = 6;  // 3 chart coords + theta + t_phys + drag work
using Vec = std::array<double, NS>;

struct PinMask {
    std::array<bool, 3> pin{false, false, false};
};

// Coordinates that span invariant planes of the chart's flow; a zero there
// is pinned for the whole chart segment.
std::array<bool, 3> invariant_coords(ChartId id) {
    switch (id) {
        case ChartId::PHYS: return {false, false, true};
        case ChartId::RVL: return {true, false, true};
        case ChartId::C1: return {false, false, true};
        case ChartId::C2: return {true, false, true};
        case ChartId::C21: return {true, false, true};
        case ChartId::C22:
        case ChartId::C23: return {true, true, true};
        case ChartId::C21INF: return {true, false, true};
        case ChartId::C22INF:
        case ChartId::C23INF: return {true, true, true};
    }
    return {false, false, false};
}

PinMask make_pins(ChartId id, const std::array<double, 3>& c) {
    PinMask m;
    auto inv = invariant_coords(id);
    for (int i = 0; i < 3; ++i) m.pin[i] = inv[i] && c[i] == 0.0;
    return m;
}

ChartPoint point_of(ChartId chart, const Vec& y) {
    ChartPoint p;
    p.chart = chart;
    p.c = {y[0], y[1], y[2]};
    p.theta = y[3];
    p.t_phys = y[4];
    return p;
}

// --- chart-switch guards ----------------------------------------------------

// Hysteresis thresholds.  A chart is left where its coordinates stop being
// O(1); the re-entry values sit well inside so guards cannot chatter.
struct SwitchBands {
    double c1_exit_r1 = 4.0;        // C1 -> C2
    double c1_enter_l2 = 0.70710678118654752;  // C2 -> C1 at r1 = 2
    double rho2_exit = 2.0;         // finite -> infinity charts
    double nu_exit = 0.7;           // infinity -> finite charts
    double mu_enter = 0.15;         // C2 -> P2-blowup charts
    // P2-blowup charts -> C2.  Kept wide: for l > 0 the lap through
    // periapsis has mu = hypot(v, l2) <= sqrt(2)*l2 <= 2, so a whole
    // ejection-collision swing stays inside one chart.
    double mu_exit = 2.0;
    double v1_exit = 2.5;           // C21 -> C22/C23
    double l22_exit = 5.0 / 9.0;    // C22/C23 -> C21 at v1 = 1.8
    double v11_exit = 2.5;          // C21INF -> C22INF/C23INF
    double l222_exit = 0.5;         // C22INF/C23INF -> C21INF at v11 = 2
};

const SwitchBands& bands() {
    static const SwitchBands b{};
    return b;
}

// rdot/r, the natural velocity variable at large radius.
double v11_of(const ChartPoint& p) {
    switch (p.chart) {
        case ChartId::C21INF: return p.c[1];
        case ChartId::C22INF: return p.c[2] > 0.0 ? 1.0 / p.c[2] : std::numeric_limits<double>::infinity();
        case ChartId::C23INF:
            return p.c[2] > 0.0 ? -1.0 / p.c[2] : -std::numeric_limits<double>::infinity();
        default: {
            const double r = radius(p);
            const double l = angular_momentum(p);
            const double v = v_of(p);
            if (l > 0.0) return v / (l * r);
            // l = 0: the sign of rdot survives through the blowup charts.
            if (p.chart == ChartId::C21) return p.c[0] > 0.0 ? p.c[1] / (p.c[0] * r) : 0.0;
            if (p.chart == ChartId::C22) return p.c[0] > 0.0 && p.c[2] > 0.0 ? 1.0 / (p.c[0] * p.c[2] * r) : 0.0;
            if (p.chart == ChartId::C23)
                return p.c[0] > 0.0 && p.c[2] > 0.0 ? -1.0 / (p.c[0] * p.c[2] * r) : 0.0;
            return 0.0;
        }
    }
}

ChartId infinity_target(const ChartPoint& p) {
    const double w = v11_of(p);
    if (w > 2.0) return ChartId::C22INF;
    if (w < -2.0) return ChartId::C23INF;
    return ChartId::C21INF;
}

// v1 = rho2 * rdot, finite through collisions.
double v1_of(const ChartPoint& p) {
    switch (p.chart) {
        case ChartId::C21: return p.c[1];
        case ChartId::C22: return p.c[2] > 0.0 ? 1.0 / p.c[2] : std::numeric_limits<double>::infinity();
        case ChartId::C23:
            return p.c[2] > 0.0 ? -1.0 / p.c[2] : -std::numeric_limits<double>::infinity();
        case ChartId::C21INF: {
            const double nu3 = p.c[0] * p.c[0] * p.c[0];
            return nu3 > 0.0 ? p.c[1] / nu3 : 0.0;
        }
        case ChartId::C22INF: {
            const double nu3 = p.c[0] * p.c[0] * p.c[0];
            return nu3 * p.c[2] > 0.0 ? 1.0 / (nu3 * p.c[2]) : std::numeric_limits<double>::infinity();
        }
        case ChartId::C23INF: {
            const double nu3 = p.c[0] * p.c[0] * p.c[0];
            return nu3 * p.c[2] > 0.0 ? -1.0 / (nu3 * p.c[2]) : -std::numeric_limits<double>::infinity();
        }
        default: {
            const double l2 = angular_momentum(p) / std::sqrt(radius(p));
            const double v = v_of(p);
            if (l2 > 0.0) return v / l2;
            return v > 0.0 ? std::numeric_limits<double>::infinity()
                           : (v < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
        }
    }
}

ChartId finite_target(const ChartPoint& p) {
    const double r = radius(p);
    const double l2 = angular_momentum(p) / std::sqrt(r);
    if (l2 >= bands().c1_enter_l2) return ChartId::C1;
    const double v = v_of(p);
    const double mu2 = v * v + l2 * l2;
    if (mu2 >= bands().mu_enter * bands().mu_enter) return ChartId::C2;
    const double v1 = v1_of(p);
    if (v1 > 2.0) return ChartId::C22;
    if (v1 < -2.0) return ChartId::C23;
    return ChartId::C21;
}

ChartId p2_family_target(const ChartPoint& p) {
    const double v1 = v1_of(p);
    if (v1 > 2.0) return ChartId::C22;
    if (v1 < -2.0) return ChartId::C23;
    return ChartId::C21;
}

struct Guard {
    const char* name;
    std::function<double(const ChartPoint&)> g;
    int direction;
    std::function<ChartId(const ChartPoint&)> target;
};

std::vector<Guard> guards_for(ChartId id) {
    const SwitchBands b = bands();
    std::vector<Guard> gs;
    auto coord_above = [](int i, double thr) {
        return [i, thr](const ChartPoint& p) { return p.c[i] - thr; };
    };
    auto to = [](ChartId t) { return [t](const ChartPoint&) { return t; }; };
    switch (id) {
        case ChartId::C1:
            gs.push_back({"r1_high", coord_above(0, b.c1_exit_r1), +1, to(ChartId::C2)});
            break;
        case ChartId::C2:
            gs.push_back({"l2_high", coord_above(2, b.c1_enter_l2), +1, to(ChartId::C1)});
            gs.push_back({"rho2_high", coord_above(0, b.rho2_exit), +1, infinity_target});
            gs.push_back({"mu_low",
                          [thr = b.mu_enter * b.mu_enter](const ChartPoint& p) {
                              return p.c[1] * p.c[1] + p.c[2] * p.c[2] - thr;
                          },
                          -1, p2_family_target});
            break;
        case ChartId::C21:
            gs.push_back({"rho2_high", coord_above(0, b.rho2_exit), +1, infinity_target});
            gs.push_back({"v1_high", coord_above(1, b.v1_exit), +1, to(ChartId::C22)});
            gs.push_back({"v1_low", coord_above(1, -b.v1_exit), -1, to(ChartId::C23)});
            gs.push_back({"mu_high",
                          [thr = b.mu_exit * b.mu_exit](const ChartPoint& p) {
                              return p.c[2] * p.c[2] * (1.0 + p.c[1] * p.c[1]) - thr;
                          },
                          +1, to(ChartId::C2)});
            break;
        case ChartId::C22:
            gs.push_back({"rho2_high", coord_above(0, b.rho2_exit), +1, infinity_target});
            gs.push_back({"l22_high", coord_above(2, b.l22_exit), +1, to(ChartId::C21)});
            gs.push_back({"mu_high",
                          [thr = b.mu_exit * b.mu_exit](const ChartPoint& p) {
                              return p.c[1] * p.c[1] * (1.0 + p.c[2] * p.c[2]) - thr;
                          },
                          +1, to(ChartId::C2)});
            break;
        case ChartId::C23:
            // rho2 decreases along this chart's flow; no outer rho2 guard.
            gs.push_back({"l23_high", coord_above(2, b.l22_exit), +1, to(ChartId::C21)});
            gs.push_back({"mu_high",
                          [thr = b.mu_exit * b.mu_exit](const ChartPoint& p) {
                              return p.c[1] * p.c[1] * (1.0 + p.c[2] * p.c[2]) - thr;
                          },
                          +1, to(ChartId::C2)});
            break;
        case ChartId::C21INF:
            gs.push_back({"nu_high", coord_above(0, b.nu_exit), +1, finite_target});
            gs.push_back({"v11_high", coord_above(1, b.v11_exit), +1, to(ChartId::C22INF)});
            gs.push_back({"v11_low", coord_above(1, -b.v11_exit), -1, to(ChartId::C23INF)});
            break;
        case ChartId::C22INF:
            gs.push_back({"nu_high", coord_above(0, b.nu_exit), +1, finite_target});
            gs.push_back({"l222_high", coord_above(2, b.l222_exit), +1, to(ChartId::C21INF)});
            break;
        case ChartId::C23INF:
            gs.push_back({"nu_high", coord_above(0, b.nu_exit), +1, finite_target});
            gs.push_back({"l233_high", coord_above(2, b.l222_exit), +1, to(ChartId::C21INF)});
            break;
        default: break;  // PHYS, RVL: single-chart runs
    }
    return gs;
}

// --- stepper ----------------------------------------------------------------

struct Stepper {
    ChartId chart;
    const Params& p;
    PinMask pins;
    long n_rhs = 0;

    explicit Stepper(ChartId id, const Params& params) : chart(id), p(params) {}

    Vec f(const Vec& y) {
        ++n_rhs;
        FieldOutput fo = vector_field(chart, {y[0], y[1], y[2]}, p);
        Vec dy;
        dy[0] = pins.pin[0] ? 0.0 : fo.dcdtau[0];
        dy[1] = pins.pin[1] ? 0.0 : fo.dcdtau[1];
        dy[2] = pins.pin[2] ? 0.0 : fo.dcdtau[2];
        dy[3] = fo.dtheta_dtau;
        dy[4] = fo.dt_dtau;
        if (chart == ChartId::PHYS) {
            const double rdot = y[1], l = y[2], r = y[0];
            dy[5] = p.delta * (rdot * rdot + l * l / (r * r));
        } else {
            dy[5] = 0.0;
        }
        return dy;
    }
};

struct StepResult {
    Vec y1;
    Vec k7;
    double err;
    std::array<Vec, 5> rcont;  // dense-output coefficients
};

void do_step(Stepper& st, const Vec& y, const Vec& k1, double h, const IntegratorControls& ctl,
             StepResult& out) {
    Vec yt, k2, k3, k4, k5, k6;
    for (int i = 0; i < NS; ++i) yt[i] = y[i] + h * a21 * k1[i];
    k2 = st.f(yt);
    for (int i = 0; i < NS; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = st.f(yt);
    for (int i = 0; i < NS; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = st.f(yt);
    for (int i = 0; i < NS; ++i)
        yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = st.f(yt);
    for (int i = 0; i < NS; ++i)
        yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = st.f(yt);
    for (int i = 0; i < NS; ++i)
        out.y1[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    // Keep pinned coordinates exactly on their invariant plane.
    for (int i = 0; i < 3; ++i)
        if (st.pins.pin[i]) out.y1[i] = 0.0;
    out.k7 = st.f(out.y1);

    double err2 = 0.0;
    for (int i = 0; i < NS; ++i) {
        const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                               e7 * out.k7[i]);
        const double sc = ctl.atol + ctl.rtol * std::max(std::abs(y[i]), std::abs(out.y1[i]));
        err2 += (ei / sc) * (ei / sc);
    }
    out.err = std::sqrt(err2 / NS);

    for (int i = 0; i < NS; ++i) {
        const double dy = out.y1[i] - y[i];
        const double bspl = h * k1[i] - dy;
        out.rcont[0][i] = y[i];
        out.rcont[1][i] = dy;
        out.rcont[2][i] = bspl;
        out.rcont[3][i] = dy - h * out.k7[i] - bspl;
        out.rcont[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                               d7 * out.k7[i]);
    }
}

Vec dense_eval(const StepResult& sr, double theta) {
    Vec y;
    const double th1 = 1.0 - theta;
    for (int i = 0; i < NS; ++i) {
        y[i] = sr.rcont[0][i] +
               theta * (sr.rcont[1][i] +
                        th1 * (sr.rcont[2][i] +
                               theta * (sr.rcont[3][i] + th1 * sr.rcont[4][i])));
    }
    return y;
}

double initial_step(Stepper& st, const Vec& y0, const Vec& f0, double tau_end,
                    const IntegratorControls& ctl) {
    if (ctl.h_init > 0.0) return std::min({ctl.h_init, ctl.h_max, tau_end});
    auto rms = [&](const Vec& v, const Vec& ref) {
        double s = 0.0;
        for (int i = 0; i < NS; ++i) {
            const double sc = ctl.atol + ctl.rtol * std::abs(ref[i]);
            s += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(s / NS);
    };
    const double d0 = rms(y0, y0);
    const double dd1 = rms(f0, y0);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min({h0, ctl.h_max, tau_end});
    Vec y1, f1;
    try {
        for (int i = 0; i < NS; ++i) y1[i] = y0[i] + h0 * f0[i];
        f1 = st.f(y1);
    } catch (const DomainError&) {
        return std::min(1e-6, h0);
    }
    Vec df;
    for (int i = 0; i < NS; ++i) df[i] = f1[i] - f0[i];
    const double d2 = rms(df, y0) / h0;
    double h1;
    const double dmax = std::max(dd1, d2);
    if (dmax <= 1e-15)
        h1 = std::max(1e-6, h0 * 1e-3);
    else
        h1 = std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, ctl.h_max, tau_end});
}

struct Crossing {
    double theta;
    int event_index;  // >= 0 user event, < 0 guard (-1 - guard_index)
};

// Refine a sign change of g on the dense output of one step.
double refine_crossing(const std::function<double(const ChartPoint&)>& g, const StepResult& sr,
                       ChartId chart, double ga, double gb) {
    double a = 0.0, b = 1.0;
    const double gscale = std::max({1.0, std::abs(ga), std::abs(gb)});
    double fa = ga, fb = gb;
    int side = 0;
    for (int it = 0; it < 80; ++it) {
        double m = (fb != fa) ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
        if (!(m > a && m < b)) m = 0.5 * (a + b);
        const double fm = g(point_of(chart, dense_eval(sr, m)));
        if (std::abs(fm) <= 1e-13 * gscale || b - a < 1e-14) return m;
        if ((fm > 0.0) == (fb > 0.0)) {
            b = m;
            fb = fm;
            if (side == -1) fa *= 0.5;  // Illinois modification
            side = -1;
        } else {
            a = m;
            fa = fm;
            if (side == +1) fb *= 0.5;
            side = +1;
        }
    }
    return 0.5 * (a + b);
}

bool crossed(double g0, double g1, int direction) {
    if (g0 == 0.0) return false;  // do not re-fire at the step start
    if (direction >= 0 && g0 < 0.0 && g1 >= 0.0) return true;
    if (direction <= 0 && g0 > 0.0 && g1 <= 0.0) return true;
    return false;
}

}  // namespace

const char* status_name(IntegrationStatus s) {
    switch (s) {
        case IntegrationStatus::ReachedEnd: return "reached_end";
        case IntegrationStatus::TerminalEvent: return "terminal_event";
        case IntegrationStatus::StepUnderflow: return "step_underflow";
        case IntegrationStatus::StepBudgetExhausted: return "step_budget_exhausted";
        case IntegrationStatus::ChartEscape: return "chart_escape";
    }
    return "?";
}

Event l_below_event(double l_threshold, bool terminal, std::string name) {
    Event ev;
    ev.name = name.empty() ? "l_below_" + std::to_string(l_threshold) : std::move(name);
    ev.g = [l_threshold](const ChartPoint& p) { return angular_momentum(p) - l_threshold; };
    ev.direction = -1;
    ev.terminal = terminal;
    return ev;
}

Event v_section_event(int direction, bool terminal, std::string name) {
    Event ev;
    ev.name = std::move(name);
    ev.g = [](const ChartPoint& p) { return v_of(p); };
    ev.direction = direction;
    ev.terminal = terminal;
    return ev;
}

Trajectory integrate(const ChartPoint& start, const Params& p, const IntegratorControls& ctl,
                     const std::vector<Event>& user_events, double tau_end) {
    Trajectory tr;
    if (!(tau_end > 0.0)) throw DomainError("integrate: tau_end must be > 0");
    if (!(ctl.rtol > 0.0) || !(ctl.atol > 0.0))
        throw DomainError("integrate: tolerances must be > 0");
    if (!in_domain(start.chart, start.c)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "integrate: start off-domain in %s (%.17g, %.17g, %.17g)",
                      chart_name(start.chart), start.c[0], start.c[1], start.c[2]);
        throw DomainError(buf);
    }

    ChartPoint cur = start;
    // If the start already violates an exit guard, hand it to the right chart
    // before stepping so hysteresis has something to work with.
    if (ctl.chart_switching) {
        for (int pass = 0; pass < 3; ++pass) {
            bool moved = false;
            for (const Guard& gd : guards_for(cur.chart)) {
                const double gv = gd.g(cur);
                if ((gd.direction > 0 && gv > 0.0) || (gd.direction < 0 && gv < 0.0)) {
                    ChartId target = gd.target(cur);
                    if (target == cur.chart) continue;
                    ChartPoint next = transition(cur, target);
                    tr.chart_history.push_back({0.0, cur.chart, target, cur, next});
                    cur = next;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
    }

    Stepper st(cur.chart, p);
    st.pins = make_pins(cur.chart, cur.c);
    Vec y{cur.c[0], cur.c[1], cur.c[2], cur.theta, cur.t_phys, 0.0};
    double tau = 0.0;

    std::vector<Guard> guards = ctl.chart_switching ? guards_for(cur.chart) : std::vector<Guard>{};

    auto record = [&](double tau_s, const Vec& ys) {
        tr.taus.push_back(tau_s);
        tr.samples.push_back(point_of(st.chart, ys));
        if (ctl.record_invariants) tr.sample_invariants.push_back(invariants_at(tr.samples.back(), p));
        if (start.chart == ChartId::PHYS) tr.dissipation.push_back(ys[5]);
    };

    Vec k1 = st.f(y);
    record(tau, y);

    double h = initial_step(st, y, k1, tau_end, ctl);
    double facold = 1e-4;
    bool just_rejected = false;
    long sample_count = 0;
    StepResult sr;

    while (tau < tau_end) {
        if (tr.n_accepted + tr.n_rejected >= ctl.max_steps) {
            if (tr.taus.back() != tau) record(tau, y);
            tr.status = IntegrationStatus::StepBudgetExhausted;
            tr.message = "step budget exhausted at tau = " + std::to_string(tau);
            tr.n_rhs = st.n_rhs;
            return tr;
        }
        const double hmin = 1e-15 * std::max(1.0, std::abs(tau));
        if (h < hmin) {
            if (tr.taus.back() != tau) record(tau, y);
            tr.status = IntegrationStatus::StepUnderflow;
            tr.message = "step underflow at tau = " + std::to_string(tau) +
                         " (approach to a true singularity)";
            tr.n_rhs = st.n_rhs;
            return tr;
        }
        if (tau + h > tau_end) h = tau_end - tau;

        bool stage_ok = true;
        try {
            do_step(st, y, k1, h, ctl, sr);
        } catch (const DomainError&) {
            stage_ok = false;
        }
        if (!stage_ok || !std::isfinite(sr.err)) {
            ++tr.n_rejected;
            h *= 0.25;
            just_rejected = true;
            continue;
        }
        if (sr.err > 1.0) {
            ++tr.n_rejected;
            const double fac = std::max(0.1, 0.9 * std::pow(sr.err, -0.2));
            h *= std::min(0.9, fac);
            just_rejected = true;
            continue;
        }

        // Accepted.  Locate events on this step before committing to y1.
        std::vector<Crossing> crossings;
        const ChartPoint p0 = point_of(st.chart, y);
        const ChartPoint p1 = point_of(st.chart, sr.y1);
        for (size_t i = 0; i < user_events.size(); ++i) {
            const double g0 = user_events[i].g(p0), g1 = user_events[i].g(p1);
            if (crossed(g0, g1, user_events[i].direction))
                crossings.push_back(
                    {refine_crossing(user_events[i].g, sr, st.chart, g0, g1), int(i)});
        }
        for (size_t i = 0; i < guards.size(); ++i) {
            const double g0 = guards[i].g(p0), g1 = guards[i].g(p1);
            if (crossed(g0, g1, guards[i].direction))
                crossings.push_back(
                    {refine_crossing(guards[i].g, sr, st.chart, g0, g1), -1 - int(i)});
        }
        std::sort(crossings.begin(), crossings.end(),
                  [](const Crossing& a, const Crossing& b) { return a.theta < b.theta; });

        bool switched = false;
        for (const Crossing& cr : crossings) {
            const double tau_ev = tau + cr.theta * h;
            const Vec y_ev = dense_eval(sr, cr.theta);
            const ChartPoint pt_ev = point_of(st.chart, y_ev);
            if (cr.event_index >= 0) {
                const Event& ev = user_events[cr.event_index];
                tr.events.push_back({ev.name, tau_ev, pt_ev});
                if (ev.terminal) {
                    record(tau_ev, y_ev);
                    tr.status = IntegrationStatus::TerminalEvent;
                    tr.message = "terminal event: " + ev.name;
                    tr.n_rhs = st.n_rhs;
                    ++tr.n_accepted;
                    return tr;
                }
            } else {
                const Guard& gd = guards[-1 - cr.event_index];
                ChartId target = gd.target(pt_ev);
                ChartPoint next;
                try {
                    next = transition(pt_ev, target);
                } catch (const DomainError& e) {
                    record(tau_ev, y_ev);
                    tr.status = IntegrationStatus::ChartEscape;
                    tr.message = std::string("chart escape at guard ") + gd.name + ": " + e.what();
                    tr.n_rhs = st.n_rhs;
                    ++tr.n_accepted;
                    return tr;
                }
                tr.chart_history.push_back({tau_ev, st.chart, target, pt_ev, next});
                record(tau_ev, y_ev);
                // Resume in the new chart from the mapped state.
                st.chart = target;
                st.pins = make_pins(target, next.c);
                y = {next.c[0], next.c[1], next.c[2], next.theta, next.t_phys, y_ev[5]};
                tau = tau_ev;
                guards = guards_for(target);
                k1 = st.f(y);
                ++tr.n_accepted;
                h = std::min(h, std::max(hmin * 10.0, 0.5 * h));
                switched = true;
                break;
            }
        }
        if (switched) continue;

        // Commit the full step.
        tau += h;
        y = sr.y1;
        k1 = sr.k7;
        ++tr.n_accepted;
        ++sample_count;
        if (sample_count % std::max(1, ctl.sample_stride) == 0 || tau >= tau_end)
            record(tau, y);

        const double expo1 = 0.2 - 0.04 * 0.75;
        double fac = 0.9 * std::pow(std::max(sr.err, 1e-16), -expo1) * std::pow(facold, 0.04);
        fac = std::clamp(fac, 0.2, just_rejected ? 1.0 : 10.0);
        facold = std::max(sr.err, 1e-4);
        h = std::min(h * fac, ctl.h_max);
        just_rejected = false;
    }

    if (tr.taus.back() != tau) record(tau, y);
    tr.status = IntegrationStatus::ReachedEnd;
    tr.n_rhs = st.n_rhs;
    return tr;
}

Trajectory integrate_physical(const PhysicalState& start, const Params& p,
                              const IntegratorControls& ctl, const std::vector<Event>& events,
                              double t_end) {
    ChartPoint cp;
    cp.chart = ChartId::PHYS;
    cp.c = {start.r, start.rdot, start.l};
    cp.theta = start.theta;
    cp.t_phys = start.t;
    IntegratorControls c2 = ctl;
    c2.chart_switching = false;  // PHYS has no blowup guards
    return integrate(cp, p, c2, events, t_end);
}

}  // namespace kepler
