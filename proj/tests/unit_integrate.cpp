#include "doctest.h"

#include <cmath>

#include "keplerdrag/integrate.hpp"

using namespace kepler;

namespace {

PhysicalState ps(double r, double rdot, double l) {
    PhysicalState s;
    s.r = r;
    s.rdot = rdot;
    s.l = l;
    return s;
}

ChartPoint cpt(ChartId id, double a, double b, double c) {
    ChartPoint p;
    p.chart = id;
    p.c = {a, b, c};
    return p;
}

Event t_phys_reaches(double t_end) {
    Event ev;
    ev.name = "t_phys_end";
    ev.g = [t_end](const ChartPoint& p) { return p.t_phys - t_end; };
    ev.direction = +1;
    ev.terminal = true;
    return ev;
}

}  // namespace

TEST_CASE("circular Kepler orbit stays circular (delta = 0)") {
    Params p{0.0};
    IntegratorControls ctl;
    auto tr = integrate_physical(ps(1.0, 0.0, 1.0), p, ctl, {}, 10.0);
    CHECK(tr.status == IntegrationStatus::ReachedEnd);
    for (const auto& s : tr.samples) {
        REQUIRE(std::abs(s.c[0] - 1.0) < 1e-10);
    }
    // theta advances like t for the unit circular orbit.
    CHECK(tr.last().theta == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("angular momentum decays exactly exponentially") {
    Params p{1.0};
    IntegratorControls ctl;
    auto tr = integrate_physical(ps(1.0, 0.0, 0.5), p, ctl, {}, 1.0);
    CHECK(tr.status == IntegrationStatus::ReachedEnd);
    CHECK(tr.last().t_phys == doctest::Approx(1.0));
    CHECK(std::abs(tr.last().c[2] - 0.5 * std::exp(-1.0)) < 1e-10);
}

TEST_CASE("l-threshold event fires at the analytic time") {
    Params p{1.0};
    IntegratorControls ctl;
    auto tr = integrate_physical(ps(1.0, 0.0, 0.5), p, ctl, {l_below_event(0.3, true)}, 5.0);
    REQUIRE(tr.status == IntegrationStatus::TerminalEvent);
    REQUIRE(tr.events.size() == 1);
    CHECK(std::abs(tr.events[0].tau - std::log(0.5 / 0.3)) < 1e-10);
    CHECK(std::abs(tr.events[0].state.c[2] - 0.3) < 1e-11);
}

TEST_CASE("planar Hamiltonian flow in C1 at l = 0") {
    Params p{1.0};  // drag is invisible on the l = 0 plane
    IntegratorControls ctl;
    ctl.chart_switching = false;

    // From (r1, v) = (2, 0) the orbit reaches the v = 0 section at r1 = 2/3.
    auto tr = integrate(cpt(ChartId::C1, 2.0, 0.0, 0.0), p, ctl,
                        {v_section_event(0, true)}, 50.0);
    REQUIRE(tr.status == IntegrationStatus::TerminalEvent);
    CHECK(std::abs(tr.events[0].state.c[0] - 2.0 / 3.0) < 1e-9);
    // l stays pinned to zero exactly.
    for (const auto& s : tr.samples) CHECK(s.c[2] == 0.0);
    // H is conserved along the l = 0 flow.
    auto H = [](const ChartPoint& q) {
        const double r1 = q.c[0], v = q.c[1];
        return 0.5 * v * v + (r1 - 1.0) * (r1 - 1.0) / (2.0 * r1 * r1);
    };
    const double H0 = H(tr.samples.front());
    for (const auto& s : tr.samples) REQUIRE(std::abs(H(s) - H0) < 1e-10);
}

TEST_CASE("equilibria are stationary trajectories") {
    Params p{1.0};
    IntegratorControls ctl;
    ctl.chart_switching = false;
    auto tr = integrate(cpt(ChartId::C21, 0.0, std::sqrt(2.0), 0.0), p, ctl, {}, 5.0);
    CHECK(tr.status == IntegrationStatus::ReachedEnd);
    CHECK(std::abs(tr.last().c[1] - std::sqrt(2.0)) < 1e-12);
    CHECK(tr.last().c[0] == 0.0);
    CHECK(tr.last().c[2] == 0.0);
}

TEST_CASE("radial plunge reaches the collision singularity") {
    Params p{1.0};
    IntegratorControls ctl;
    ctl.max_steps = 200000;
    auto tr = integrate_physical(ps(1.0, -1.0, 0.0), p, ctl, {}, 10.0);
    CHECK(tr.status == IntegrationStatus::StepUnderflow);
    CHECK(tr.last().c[0] < 1e-3);  // r collapsed
}

TEST_CASE("energy balance against the accumulated drag work") {
    Params p{1.0};
    IntegratorControls ctl;
    ctl.record_invariants = true;
    auto tr = integrate_physical(ps(1.0, 0.0, 0.9), p, ctl, {}, 3.0);
    REQUIRE(tr.status == IntegrationStatus::ReachedEnd);
    REQUIRE(tr.dissipation.size() == tr.samples.size());
    const double E0 = tr.sample_invariants.front().E;
    for (size_t i = 0; i < tr.samples.size(); ++i) {
        const double Ei = tr.sample_invariants[i].E;
        // The spiral dives toward collision, |E| grows; check on the E scale.
        REQUIRE(std::abs(Ei - E0 + tr.dissipation[i]) < 1e-8 * (1.0 + std::abs(Ei)));
        if (std::abs(Ei) < 2.0) REQUIRE(std::abs(Ei - E0 + tr.dissipation[i]) < 1e-8);
        REQUIRE(Ei <= E0 + 1e-12);  // energy only dissipates
    }
    // l strictly decreasing in physical time.
    for (size_t i = 1; i < tr.samples.size(); ++i)
        REQUIRE(tr.samples[i].c[2] < tr.samples[i - 1].c[2]);
}

TEST_CASE("the conservative limit keeps E, l and the eccentricity") {
    Params p{0.0};
    IntegratorControls ctl;
    ctl.record_invariants = true;
    auto tr = integrate_physical(ps(1.2, 0.3, 0.8), p, ctl, {}, 12.0);
    REQUIRE(tr.status == IntegrationStatus::ReachedEnd);
    const auto& q0 = tr.sample_invariants.front();
    for (const auto& q : tr.sample_invariants) {
        REQUIRE(std::abs(q.E - q0.E) < 1e-10);
        REQUIRE(std::abs(q.l - q0.l) < 1e-12);
        const double e0 = std::hypot(q0.ecc[0], q0.ecc[1]);
        REQUIRE(std::abs(std::hypot(q.ecc[0], q.ecc[1]) - e0) < 1e-10);
    }
}

TEST_CASE("the same orbit through PHYS and through C1") {
    Params p{1.0};
    IntegratorControls ctl;
    auto want = integrate_physical(ps(1.0, 0.1, 0.8), p, ctl, {}, 1.0);
    REQUIRE(want.status == IntegrationStatus::ReachedEnd);
    PhysicalState end_phys = to_physical(want.last());

    ctl.chart_switching = false;
    for (ChartId id : {ChartId::C1, ChartId::C2}) {
        ChartPoint start = from_physical(ps(1.0, 0.1, 0.8), id);
        auto tr = integrate(start, p, ctl, {t_phys_reaches(1.0)}, 1e6);
        REQUIRE(tr.status == IntegrationStatus::TerminalEvent);
        PhysicalState end_chart = to_physical(tr.events[0].state);

        CHECK(std::abs(end_chart.r - end_phys.r) < 1e-8);
        CHECK(std::abs(end_chart.rdot - end_phys.rdot) < 1e-8);
        CHECK(std::abs(end_chart.l - end_phys.l) < 1e-8);
        CHECK(std::abs(end_chart.theta - end_phys.theta) < 1e-8);
    }
}

TEST_CASE("the two C1 normalizations trace identical trajectories") {
    // Compare endpoints at a common physical time through the l^3 form and
    // the l^3 r1^3 form; the latter is driven through the RVL chart route.
    Params p{1.0};
    IntegratorControls ctl;
    ctl.chart_switching = false;
    ChartPoint start = from_physical(ps(0.9, -0.05, 0.7), ChartId::C1);
    auto a = integrate(start, p, ctl, {t_phys_reaches(0.8)}, 1e6);
    REQUIRE(a.status == IntegrationStatus::TerminalEvent);

    // RVL integration of the same state; same curve, different clock.
    ChartPoint start_rvl = from_physical(ps(0.9, -0.05, 0.7), ChartId::RVL);
    auto b = integrate(start_rvl, p, ctl, {t_phys_reaches(0.8)}, 1e6);
    REQUIRE(b.status == IntegrationStatus::TerminalEvent);

    PhysicalState ea = to_physical(a.events[0].state);
    PhysicalState eb = to_physical(b.events[0].state);
    CHECK(std::abs(ea.r - eb.r) < 1e-8);
    CHECK(std::abs(ea.rdot - eb.rdot) < 1e-8);
    CHECK(std::abs(ea.l - eb.l) < 1e-8);
}

TEST_CASE("tolerance controls the defect") {
    Params p{1.0};
    ChartPoint start = cpt(ChartId::C1, 2.0, 0.0, 0.3);
    IntegratorControls tight;
    tight.rtol = tight.atol = 1e-13;
    tight.chart_switching = false;
    auto ref = integrate(start, p, tight, {}, 40.0);
    REQUIRE(ref.status == IntegrationStatus::ReachedEnd);

    auto defect = [&](double tol) {
        IntegratorControls c;
        c.rtol = c.atol = tol;
        c.chart_switching = false;
        auto tr = integrate(start, p, c, {}, 40.0);
        double d = 0.0;
        for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(tr.last().c[i] - ref.last().c[i]));
        return d;
    };
    const double loose = defect(1e-6);
    const double tighter = defect(1e-6 / 16.0);
    CHECK(tighter < loose / 4.0);
    CHECK(loose < 1e-3);
}

TEST_CASE("a strongly damped infall rides the center manifold at infinity") {
    // With delta = 1 the drag freezes a fast plunge onto the slow graph
    // rdot ~ -1/(delta r^2): chart and physical-time integrations must agree
    // at an angular-momentum cut, and the endpoint must track the graph.
    Params p{1.0};
    PhysicalState s0 = ps(9.0, -5.05, 0.01);

    IntegratorControls pctl;
    auto ref = integrate_physical(s0, p, pctl, {l_below_event(3e-6, true)}, 50.0);
    REQUIRE(ref.status == IntegrationStatus::TerminalEvent);

    IntegratorControls ctl;
    ctl.sample_stride = 1 << 30;
    auto tr = integrate(from_physical(s0, ChartId::C21INF), p, ctl, {l_below_event(3e-6, true)},
                        1e7);
    REQUIRE(tr.status == IntegrationStatus::TerminalEvent);

    PhysicalState a = to_physical(ref.events[0].state);
    PhysicalState b = to_physical(tr.events[0].state);
    CHECK(std::abs(a.r - b.r) < 1e-7 * (1.0 + a.r));
    CHECK(std::abs(a.rdot - b.rdot) < 1e-7);
    CHECK(std::abs(a.t - b.t) < 1e-6);
    // On the graph the infall creep satisfies rdot r^2 ~ -1/delta.
    CHECK(b.rdot * b.r * b.r == doctest::Approx(-1.0 / p.delta).epsilon(0.1));
}

TEST_CASE("a weak-drag steep plunge runs the infall chart chain") {
    // With little drag the plunge stays fast: rdot/r leaves the central
    // compactified chart for the v < 0 one, hands back to the finite v < 0
    // chart, and crosses into the collision-cylinder chart around the deep
    // periapsis (r ~ l^2/2 ~ 5e-5).  The physical-time integration can still
    // resolve that passage, so the periapsis states must match.
    Params p{0.05};
    PhysicalState s0 = ps(9.0, -8.0, 0.01);

    IntegratorControls pctl;
    pctl.max_steps = 10000000;
    auto ref = integrate_physical(s0, p, pctl, {v_section_event(+1, true, "peri")}, 10.0);
    REQUIRE(ref.status == IntegrationStatus::TerminalEvent);

    IntegratorControls ctl;
    ctl.sample_stride = 1 << 30;
    ChartPoint start = from_physical(s0, ChartId::C21INF);
    auto tr = integrate(start, p, ctl, {v_section_event(+1, true, "peri")}, 1e7);
    REQUIRE(tr.status == IntegrationStatus::TerminalEvent);

    bool saw_c23inf = false, saw_c23 = false, saw_c21 = false;
    for (const auto& sw : tr.chart_history) {
        saw_c23inf = saw_c23inf || sw.to == ChartId::C23INF;
        saw_c23 = saw_c23 || sw.to == ChartId::C23;
        saw_c21 = saw_c21 || sw.to == ChartId::C21;
    }
    CHECK(saw_c23inf);
    CHECK(saw_c23);
    CHECK(saw_c21);

    PhysicalState a = to_physical(ref.events[0].state);
    PhysicalState b = to_physical(tr.events[0].state);
    CHECK(std::abs(a.r - b.r) < 1e-6 * (1e-5 + a.r));
    CHECK(std::abs(a.l - b.l) < 1e-8);
    CHECK(std::abs(a.t - b.t) < 1e-6);
}

TEST_CASE("an energetic ejection runs the outbound chart chain") {
    Params p{1.0};
    PhysicalState s0 = ps(1.0, 15.0, 0.5);

    IntegratorControls pctl;
    auto ref = integrate_physical(s0, p, pctl, {l_below_event(0.2, true)}, 10.0);
    REQUIRE(ref.status == IntegrationStatus::TerminalEvent);

    IntegratorControls ctl;
    ctl.sample_stride = 1 << 30;
    ChartPoint start = from_physical(s0, ChartId::C22);
    auto tr = integrate(start, p, ctl, {l_below_event(0.2, true)}, 1e7);
    REQUIRE(tr.status == IntegrationStatus::TerminalEvent);

    bool saw_c22inf = false;
    for (const auto& sw : tr.chart_history) saw_c22inf = saw_c22inf || sw.to == ChartId::C22INF;
    CHECK(saw_c22inf);

    PhysicalState a = to_physical(ref.events[0].state);
    PhysicalState b = to_physical(tr.events[0].state);
    CHECK(std::abs(a.r - b.r) < 1e-7 * (1.0 + a.r));
    CHECK(std::abs(a.rdot - b.rdot) < 1e-7 * (1.0 + std::abs(a.rdot)));
    CHECK(std::abs(a.t - b.t) < 1e-7);
}

TEST_CASE("chart switching hands a growing orbit to the next charts") {
    // An outward hyperbolic-ish orbit must walk C1 -> C2 -> infinity charts
    // without escaping the atlas.
    Params p{1.0};
    IntegratorControls ctl;
    auto start = from_physical(ps(1.0, 0.9, 0.9), ChartId::C1);
    auto tr = integrate(start, p, ctl, {}, 30.0);
    CHECK(tr.status != IntegrationStatus::ChartEscape);
    CHECK(!tr.chart_history.empty());
    // t_phys is nondecreasing across all samples and switches.
    for (size_t i = 1; i < tr.samples.size(); ++i)
        REQUIRE(tr.samples[i].t_phys >= tr.samples[i - 1].t_phys - 1e-12);
}
