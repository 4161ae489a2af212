#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "keplerdrag/dynamics.hpp"

using namespace kepler;

namespace {

ChartPoint cpt(ChartId id, double a, double b, double c) {
    ChartPoint p;
    p.chart = id;
    p.c = {a, b, c};
    return p;
}

// Time derivative of from_physical along the physical flow, by a central
// RK4 micro-step.  Each desingularized field must equal this derivative
// divided by its own dt_dtau.
std::array<double, 3> chart_rate_from_phys(const PhysicalState& s, ChartId id, const Params& p) {
    auto phys_rhs = [&p](const std::array<double, 3>& y) {
        return vector_field(ChartId::PHYS, y, p).dcdtau;
    };
    auto rk4 = [&](std::array<double, 3> y, double h) {
        auto k1 = phys_rhs(y);
        std::array<double, 3> t;
        for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * h * k1[i];
        auto k2 = phys_rhs(t);
        for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * h * k2[i];
        auto k3 = phys_rhs(t);
        for (int i = 0; i < 3; ++i) t[i] = y[i] + h * k3[i];
        auto k4 = phys_rhs(t);
        for (int i = 0; i < 3; ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        return y;
    };
    const double h = 1e-6;
    std::array<double, 3> y0{s.r, s.rdot, s.l};
    auto yp = rk4(y0, h), ym = rk4(y0, -h);
    PhysicalState sp = s, sm = s;
    sp.r = yp[0];
    sp.rdot = yp[1];
    sp.l = yp[2];
    sm.r = ym[0];
    sm.rdot = ym[1];
    sm.l = ym[2];
    auto cp = from_physical(sp, id).c;
    auto cm = from_physical(sm, id).c;
    return {(cp[0] - cm[0]) / (2 * h), (cp[1] - cm[1]) / (2 * h), (cp[2] - cm[2]) / (2 * h)};
}

}  // namespace

TEST_CASE("chart fields at the named points") {
    Params p{1.0};
    // Zero-Hopf point of the C1 flow.
    auto fo = vector_field(ChartId::C1, {1.0, 0.0, 0.0}, p);
    CHECK(fo.dcdtau[0] == 0.0);
    CHECK(fo.dcdtau[1] == 0.0);
    CHECK(fo.dcdtau[2] == 0.0);

    // (r1=2, v=0, l=0): only the v-equation moves.
    fo = vector_field(ChartId::C1, {2.0, 0.0, 0.0}, p);
    CHECK(fo.dcdtau[0] == 0.0);
    CHECK(fo.dcdtau[1] == doctest::Approx(-0.125).epsilon(1e-15));
    CHECK(fo.dcdtau[2] == 0.0);

    // Hyperbolic saddles on the collision cylinder.
    fo = vector_field(ChartId::C21, {0.0, std::sqrt(2.0), 0.0}, p);
    CHECK(std::abs(fo.dcdtau[0]) < 1e-15);
    CHECK(std::abs(fo.dcdtau[1]) < 1e-15);
    CHECK(std::abs(fo.dcdtau[2]) < 1e-15);
}

TEST_CASE("physical-time factors") {
    Params p{1.0};
    PhysicalState s;
    s.r = 0.7;
    s.rdot = 0.4;
    s.l = 0.3;
    struct Expect {
        ChartId id;
        double dt;
    } cases[] = {
        {ChartId::PHYS, 1.0},
        {ChartId::RVL, s.l * s.r * s.r * s.r},
        {ChartId::C1, s.l * s.l * s.l},
        {ChartId::C2, std::pow(std::sqrt(s.r), 3.0) * (s.l / std::sqrt(s.r))},
        {ChartId::C21, std::pow(std::sqrt(s.r), 3.0)},
        {ChartId::C21INF, 1.0},
        {ChartId::C22INF, s.r / s.rdot},
    };
    for (auto [id, dt] : cases) {
        auto c = from_physical(s, id).c;
        auto fo = vector_field(id, c, p);
        CHECK_MESSAGE(fo.dt_dtau == doctest::Approx(dt).epsilon(1e-12), chart_name(id));
        // dtheta_dtau = (l/r^2) dt_dtau everywhere.
        CHECK_MESSAGE(fo.dtheta_dtau ==
                          doctest::Approx(s.l / (s.r * s.r) * dt).epsilon(1e-12),
                      chart_name(id));
        CHECK(fo.dt_dtau >= 0.0);
    }
}

TEST_CASE("every chart field is the physical flow in disguise") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double delta : {0.5, 1.0, 2.0}) {
        Params p{delta};
        for (int k = 0; k < 60; ++k) {
            PhysicalState s;
            s.r = 0.2 + 3.0 * u(rng);
            s.rdot = -1.5 + 3.0 * u(rng);
            s.l = 0.05 + 1.2 * u(rng);
            for (int ci = 0; ci < kNumCharts; ++ci) {
                ChartId id = static_cast<ChartId>(ci);
                ChartPoint q;
                try {
                    q = from_physical(s, id);
                } catch (const DomainError&) {
                    continue;  // state not on this chart's side
                }
                auto fo = vector_field(id, q.c, p);
                if (fo.dt_dtau <= 1e-12) continue;
                auto rate_t = chart_rate_from_phys(s, id, p);
                for (int i = 0; i < 3; ++i) {
                    const double expect = rate_t[i] * fo.dt_dtau;
                    REQUIRE_MESSAGE(
                        std::abs(fo.dcdtau[i] - expect) < 2e-5 * (1.0 + std::abs(expect)),
                        chart_name(id) << " coord " << i << " delta " << delta);
                }
            }
        }
    }
}

TEST_CASE("the two C1 normalizations trace the same curves") {
    Params p{1.0};
    std::array<double, 3> c{1.7, -0.4, 0.6};
    auto a = vector_field(ChartId::C1, c, p, C1Form::ChartTime);
    auto b = vector_field(ChartId::C1, c, p, C1Form::RadialScaled);
    const double r13 = c[0] * c[0] * c[0];
    for (int i = 0; i < 3; ++i)
        CHECK(b.dcdtau[i] == doctest::Approx(a.dcdtau[i] * r13).epsilon(1e-14));
    CHECK(b.dt_dtau == doctest::Approx(a.dt_dtau * r13).epsilon(1e-14));
}

TEST_CASE("invariants at the marked states") {
    Params p{1.0};
    // Circular point r1 = 1, v = 0 at any l > 0: zero eccentricity.
    PhysicalState s;
    s.l = 0.8;
    s.r = s.l * s.l;  // r1 = 1
    s.rdot = 0.0;
    auto q = invariants(s, p);
    CHECK(std::abs(q.ecc[0]) < 1e-15);
    CHECK(std::abs(q.ecc[1]) < 1e-15);
    CHECK(q.H == doctest::Approx(0.0));

    // r1 = 1/2, v = 0: |ecc| = 1, H = 1/2.
    s.r = 0.5 * s.l * s.l;
    q = invariants(s, p);
    CHECK(std::hypot(q.ecc[0], q.ecc[1]) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.H == doctest::Approx(0.5).epsilon(1e-14));

    // r1 = 2, v = 0: H = 1/8, |ecc| = 1/2.
    s.r = 2.0 * s.l * s.l;
    q = invariants(s, p);
    CHECK(q.H == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(std::hypot(q.ecc[0], q.ecc[1]) == doctest::Approx(0.5).epsilon(1e-14));

    // E = K + P by construction; H2 equals H whenever both exist.
    CHECK(q.E == doctest::Approx(q.K + q.P));
    CHECK(q.H2 == doctest::Approx(q.H).epsilon(1e-12));

    // l = 0 leaves H undefined but the rest intact.
    s.l = 0.0;
    s.rdot = -0.3;
    q = invariants(s, p);
    CHECK(std::isnan(q.H));
    CHECK(std::isnan(q.H1));
    CHECK(std::isfinite(q.E));
    CHECK(std::hypot(q.ecc[0], q.ecc[1]) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("H equals half the squared eccentricity over random states") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Params p{1.0};
    for (int k = 0; k < 10000; ++k) {
        PhysicalState s;
        s.r = 0.05 + 4.0 * u(rng);
        s.rdot = -2.0 + 4.0 * u(rng);
        s.l = 0.01 + 1.5 * u(rng);
        s.theta = -6.0 + 12.0 * u(rng);
        auto q = invariants(s, p);
        const double e2 = q.ecc[0] * q.ecc[0] + q.ecc[1] * q.ecc[1];
        REQUIRE(std::abs(q.H - 0.5 * e2) < 1e-12 * (1.0 + q.H));
    }
}

TEST_CASE("Lie derivative of H1: exact gradient matches the cubic closed form") {
    // Worked values.
    Params p1{1.0};
    auto d = lie_derivative_H1(1.0, 0.0, 0.0, p1);
    CHECK(d.numeric == doctest::Approx(0.0));
    CHECK(d.closed_form == doctest::Approx(0.0));
    d = lie_derivative_H1(1.0, 0.3, 0.2, p1);
    CHECK(d.closed_form == doctest::Approx(-0.048).epsilon(1e-15));
    CHECK(d.numeric == doctest::Approx(-0.048).epsilon(1e-12));
    Params ph{0.5};
    d = lie_derivative_H1(2.0, -0.1, 0.1, ph);
    CHECK(d.closed_form == doctest::Approx(-0.003).epsilon(1e-15));
    CHECK(d.numeric == doctest::Approx(-0.003).epsilon(1e-12));

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        Params p{0.25 + 2.0 * u(rng)};
        const double r1 = 0.2 + 3.0 * u(rng);
        const double v = -1.0 + 2.0 * u(rng);
        const double x = -0.2 + 0.5 * u(rng);
        auto ld = lie_derivative_H1(r1, v, x, p);
        const double scale = std::max({1e-30, std::abs(ld.closed_form)});
        REQUIRE(std::abs(ld.numeric - ld.closed_form) < 1e-10 * (1.0 + scale));
    }
}

TEST_CASE("equilibria and spectra") {
    for (double delta : {0.5, 1.0, 2.0}) {
        Params p{delta};

        auto c1 = equilibria(ChartId::C1, p);
        REQUIRE(c1.size() == 1);
        CHECK(c1[0].name == "q1");
        CHECK(c1[0].coords[0] == 1.0);
        // {+i, -i, 0} up to ordering by (re, im).
        std::array<std::complex<double>, 3> expect{{{0.0, -1.0}, {0.0, 0.0}, {0.0, 1.0}}};
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(c1[0].eigenvalues[i] - expect[i]) < 1e-8);
        }

        auto c21 = equilibria(ChartId::C21, p);
        REQUIRE(c21.size() == 2);
        CHECK(c21[0].coords[1] == doctest::Approx(std::sqrt(2.0)));
        CHECK(c21[1].coords[1] == doctest::Approx(-std::sqrt(2.0)));
        // Full spectra {v1/2, v1, -v1/2}: hyperbolic saddles.
        const double s2 = std::sqrt(2.0);
        for (auto& e : c21) {
            double reals[3];
            for (int i = 0; i < 3; ++i) {
                CHECK(std::abs(e.eigenvalues[i].imag()) < 1e-9);
                reals[i] = e.eigenvalues[i].real();
            }
            const double v1 = e.coords[1];
            std::array<double, 3> want{-std::abs(v1) / 2, std::abs(v1) / 2, v1};
            std::sort(want.begin(), want.end());
            for (int i = 0; i < 3; ++i) CHECK(std::abs(reals[i] - want[i]) < 1e-8);
            CHECK(std::abs(std::abs(v1) - s2) < 1e-12);
        }

        auto inf = equilibria(ChartId::C21INF, p);
        REQUIRE(inf.size() == 2);
        CHECK(inf[0].name == "p21+");
        REQUIRE(inf[0].has_inplane);
        CHECK(inf[0].inplane[0] == doctest::Approx(-delta).epsilon(1e-8));
        CHECK(inf[0].inplane[1] == doctest::Approx(-delta).epsilon(1e-8));
        CHECK(inf[1].name == "p21-");
        CHECK(inf[1].coords[1] == doctest::Approx(-delta));
        REQUIRE(inf[1].has_inplane);
        CHECK(inf[1].inplane[0] == doctest::Approx(delta).epsilon(1e-8));
        CHECK(inf[1].inplane[1] == doctest::Approx(-2.0 * delta).epsilon(1e-8));

        // Every reported equilibrium really is one.
        for (ChartId id : {ChartId::C1, ChartId::C2, ChartId::C21, ChartId::C22, ChartId::C23,
                           ChartId::C21INF, ChartId::C23INF}) {
            for (const auto& e : equilibria(id, p)) {
                auto fo = vector_field(id, e.coords, p);
                for (int i = 0; i < 3; ++i)
                    REQUIRE_MESSAGE(std::abs(fo.dcdtau[i]) < 1e-13,
                                    chart_name(id) << " " << e.name);
            }
        }
    }
}

TEST_CASE("hand-coded Jacobians match finite differences") {
    Params p{0.8};
    struct Case {
        ChartId id;
        std::array<double, 3> c;
    } cases[] = {
        {ChartId::C1, {1.3, -0.2, 0.5}},
        {ChartId::C21, {0.4, 1.1, 0.3}},
        {ChartId::C21INF, {0.5, -0.6, 0.2}},
    };
    for (const auto& cs : cases) {
        auto J = jacobian(cs.id, cs.c, p);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6 * (1.0 + std::abs(cs.c[j]));
            auto cp = cs.c, cm = cs.c;
            cp[j] += h;
            cm[j] -= h;
            auto fp = vector_field(cs.id, cp, p).dcdtau;
            auto fm = vector_field(cs.id, cm, p).dcdtau;
            for (int i = 0; i < 3; ++i) {
                const double fd = (fp[i] - fm[i]) / (2 * h);
                REQUIRE(std::abs(J[i][j] - fd) < 1e-6 * (1.0 + std::abs(fd)));
            }
        }
    }
}
