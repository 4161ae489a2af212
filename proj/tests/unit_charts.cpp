#include "doctest.h"

#include <cmath>
#include <random>

#include "keplerdrag/charts.hpp"

using namespace kepler;

namespace {

PhysicalState ps(double r, double rdot, double l, double theta = 0.0) {
    PhysicalState s;
    s.r = r;
    s.rdot = rdot;
    s.l = l;
    s.theta = theta;
    return s;
}

ChartPoint cp(ChartId id, double a, double b, double c) {
    ChartPoint p;
    p.chart = id;
    p.c = {a, b, c};
    return p;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); }

}  // namespace

TEST_CASE("to_physical on the worked chart points") {
    // C1 (r1=1, v=0, rho1=0.1): r = rho1^2 r1, rdot = v/l.
    auto s = to_physical(cp(ChartId::C1, 1.0, 0.0, 0.1));
    CHECK(s.r == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(s.rdot == doctest::Approx(0.0));
    CHECK(s.l == doctest::Approx(0.1));

    // C2 (rho2=0.5, v=0.2, l2=1) -> (r=0.25, rdot=0.4, l=0.5).
    s = to_physical(cp(ChartId::C2, 0.5, 0.2, 1.0));
    CHECK(s.r == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.rdot == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(s.l == doctest::Approx(0.5).epsilon(1e-15));

    // C21 (rho2=0.5, v1=1, mu1=0.2) -> (r=0.25, rdot=2, l=0.1); v1 = rho2*rdot.
    s = to_physical(cp(ChartId::C21, 0.5, 1.0, 0.2));
    CHECK(s.r == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.rdot == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s.l == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("from_physical on the worked states") {
    auto p = from_physical(ps(0.01, 0.0, 0.1), ChartId::C1);
    CHECK(p.c[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.c[1] == doctest::Approx(0.0));
    CHECK(p.c[2] == doctest::Approx(0.1));

    p = from_physical(ps(0.25, 2.0, 0.1), ChartId::C21);
    CHECK(p.c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.c[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.c[2] == doctest::Approx(0.2).epsilon(1e-15));

    CHECK_THROWS_AS(from_physical(ps(0.25, -2.0, 0.1), ChartId::C22), DomainError);
    CHECK_THROWS_AS(from_physical(ps(0.25, 2.0, 0.1), ChartId::C23), DomainError);
    CHECK_THROWS_AS(from_physical(ps(1.0, 0.0, 0.0), ChartId::C1), DomainError);
}

TEST_CASE("transition on the worked overlaps") {
    // C1 -> C2: rho2 = rho1 sqrt(r1), l2 = 1/sqrt(r1).
    auto q = transition(cp(ChartId::C1, 4.0, 0.1, 0.2), ChartId::C2);
    CHECK(q.c[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(q.c[1] == doctest::Approx(0.1));
    CHECK(q.c[2] == doctest::Approx(0.5).epsilon(1e-15));

    // C21 -> C22: mu2 = mu1 v1, l22 = 1/v1 (v1 > 0).
    q = transition(cp(ChartId::C21, 0.3, 2.0, 0.1), ChartId::C22);
    CHECK(q.c[0] == doctest::Approx(0.3));
    CHECK(q.c[1] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(q.c[2] == doctest::Approx(0.5).epsilon(1e-15));

    // C22 -> C22INF: nu = 1/rho2, l222 = rho2^3 l22.
    q = transition(cp(ChartId::C22, 2.0, 0.2, 0.08), ChartId::C22INF);
    CHECK(q.c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q.c[1] == doctest::Approx(0.2));
    CHECK(q.c[2] == doctest::Approx(0.64).epsilon(1e-14));

    // theta and t ride along unchanged.
    ChartPoint a = cp(ChartId::C1, 2.0, -0.3, 0.4);
    a.theta = 7.25;
    a.t_phys = 3.5;
    auto b = transition(a, ChartId::C21);
    CHECK(b.theta == 7.25);
    CHECK(b.t_phys == 3.5);

    CHECK_THROWS_AS(transition(cp(ChartId::C21, 0.3, -2.0, 0.1), ChartId::C22), DomainError);
}

TEST_CASE("transition works on blowup sets where physical variables fail") {
    // l = 0 plane of C1 maps into the rho2 = 0 ... no, into l2 = 1/sqrt(r1) with rho2 = 0.
    auto q = transition(cp(ChartId::C1, 2.0, 0.3, 0.0), ChartId::C2);
    CHECK(q.c[0] == 0.0);
    CHECK(q.c[2] == doctest::Approx(1.0 / std::sqrt(2.0)));

    // mu1 = 0 (the blown-up collision cylinder) through C21 -> C22.
    q = transition(cp(ChartId::C21, 0.5, 1.5, 0.0), ChartId::C22);
    CHECK(q.c[1] == 0.0);
    CHECK(q.c[2] == doctest::Approx(1.0 / 1.5));

    // nu = 0 (r = infinity) through C21INF -> C22INF.
    q = transition(cp(ChartId::C21INF, 0.0, 3.0, 0.2), ChartId::C22INF);
    CHECK(q.c[0] == 0.0);
    CHECK(q.c[1] == doctest::Approx(0.6));
    CHECK(q.c[2] == doctest::Approx(1.0 / 3.0));
}

namespace {

// Random point inside the overlap of a chart pair, built from a physical
// state that both charts represent.
PhysicalState random_overlap_state(std::mt19937_64& rng, ChartId a, ChartId b) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const double r = 0.05 + 4.0 * u(rng);
        const double rdot = -2.0 + 4.0 * u(rng);
        const double l = 0.01 + 1.5 * u(rng);
        PhysicalState s = ps(r, rdot, l, -3.0 + 6.0 * u(rng));
        try {
            auto pa = from_physical(s, a);
            auto pb = from_physical(s, b);
            if (!in_domain(a, pa.c) || !in_domain(b, pb.c)) continue;
            return s;
        } catch (const DomainError&) {
            continue;
        }
    }
}

}  // namespace

TEST_CASE("round trips and physical consistency over the atlas") {
    std::mt19937_64 rng(20260809);
    const std::pair<ChartId, ChartId> pairs[] = {
        {ChartId::PHYS, ChartId::RVL},     {ChartId::RVL, ChartId::C1},
        {ChartId::RVL, ChartId::C2},       {ChartId::C1, ChartId::C2},
        {ChartId::C2, ChartId::C21},       {ChartId::C2, ChartId::C22},
        {ChartId::C2, ChartId::C23},       {ChartId::C21, ChartId::C22},
        {ChartId::C21, ChartId::C23},      {ChartId::C21, ChartId::C21INF},
        {ChartId::C22, ChartId::C22INF},   {ChartId::C23, ChartId::C23INF},
        {ChartId::C21INF, ChartId::C22INF}, {ChartId::C21INF, ChartId::C23INF},
        {ChartId::C1, ChartId::C21},       {ChartId::PHYS, ChartId::C21INF},
    };
    for (auto [a, b] : pairs) {
        for (int k = 0; k < 1000; ++k) {
            PhysicalState s = random_overlap_state(rng, a, b);
            ChartPoint pa = from_physical(s, a);
            ChartPoint pb = transition(pa, b);
            ChartPoint pa2 = transition(pb, a);
            for (int i = 0; i < 3; ++i) {
                REQUIRE_MESSAGE(close(pa2.c[i], pa.c[i], 1e-12),
                                chart_name(a) << "<->" << chart_name(b) << " coord " << i);
            }
            // The same physical state through either chart.
            PhysicalState sa = to_physical(pa);
            PhysicalState sb = to_physical(pb);
            REQUIRE(close(sa.r, sb.r, 1e-12));
            REQUIRE(close(sa.rdot, sb.rdot, 1e-12));
            REQUIRE(close(sa.l, sb.l, 1e-12));
            // Radial-type coordinates stay nonnegative through the maps.
            REQUIRE(radius(pb) >= 0.0);
            REQUIRE(angular_momentum(pb) >= -1e-15);
        }
    }
}

TEST_CASE("derived scalars agree with the physical state") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        PhysicalState s = ps(0.1 + 3.0 * u(rng), -1.5 + 3.0 * u(rng), 0.02 + u(rng));
        for (ChartId id : {ChartId::PHYS, ChartId::RVL, ChartId::C1, ChartId::C2, ChartId::C21,
                           ChartId::C21INF}) {
            ChartPoint p = from_physical(s, id);
            CHECK(close(radius(p), s.r, 1e-13));
            CHECK(close(angular_momentum(p), s.l, 1e-13));
            CHECK(close(v_of(p), s.l * s.rdot, 1e-13));
        }
    }
}

TEST_CASE("chart names round trip") {
    for (int i = 0; i < kNumCharts; ++i) {
        ChartId id = static_cast<ChartId>(i);
        CHECK(chart_from_name(chart_name(id)) == id);
    }
    CHECK_THROWS_AS(chart_from_name("C99"), DomainError);
}
