#include "keplerdrag/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "quad_internal.hpp"

namespace kepler {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double H_of(double r1, double v) {
    return 0.5 * v * v + (r1 - 1.0) * (r1 - 1.0) / (2.0 * r1 * r1);
}

// Drag-corrected H at a chart point; the correction cancels the O(x)
// oscillation of raw H about its limit, x = l^3.  The correction terms go
// through r1 x = r l, so it is only applied where that product is small
// (the oscillatory regime); far-out coasting states use raw H.
double H1_at(const ChartPoint& pt, const Params& p) {
    const double r = radius(pt);
    const double l = angular_momentum(pt);
    const double v = v_of(pt);
    const double r1 = r / (l * l);
    const double x = l * l * l;
    const double H = H_of(r1, v);
    if (!(r * l < 0.01 && r1 < 100.0)) return H;
    return H + 2.0 * p.delta * r1 * v * x + 3.0 * p.delta * p.delta * r1 * r1 * x * x;
}

ChartPoint c1_point(double r1, double v, double l) {
    ChartPoint p;
    p.chart = ChartId::C1;
    p.c = {r1, v, l};
    return p;
}

double analytic_period(double h) { return 2.0 * M_PI * std::pow(1.0 - 2.0 * h, -1.5); }

}  // namespace

PeriodicOrbitData gamma1(double h) {
    if (!(h > 0.0 && h < 0.5)) throw DomainError("gamma1: h must lie in (0, 1/2)");
    PeriodicOrbitData orb;
    orb.h = h;
    const double s = std::sqrt(2.0 * h);
    orb.r1_minus = 1.0 / (1.0 + s);
    orb.r1_plus = 1.0 / (1.0 - s);

    IntegratorControls ctl;
    ctl.chart_switching = false;
    const double budget = 1.2 * analytic_period(h) + 10.0;
    auto tr = integrate(c1_point(orb.r1_minus, 0.0, 0.0), Params{1.0}, ctl,
                        {v_section_event(0, false)}, budget);
    if (tr.events.size() < 2)
        throw NonConvergence("gamma1: section return not found", double(tr.events.size()), h);
    orb.period = tr.events[1].tau;
    const double r1_plus_meas = tr.events[0].state.c[0];
    const double r1_minus_meas = tr.events[1].state.c[0];
    if (std::abs(r1_plus_meas - orb.r1_plus) > 1e-7 * (1.0 + orb.r1_plus) ||
        std::abs(r1_minus_meas - orb.r1_minus) > 1e-7)
        throw NonConvergence("gamma1: section crossings disagree with turning points",
                             r1_plus_meas, orb.r1_plus);
    // Keep one revolution of samples.
    orb.samples.reserve(tr.samples.size());
    for (size_t i = 0; i < tr.samples.size() && tr.taus[i] <= orb.period; ++i)
        orb.samples.push_back(tr.samples[i]);
    return orb;
}

std::array<double, 2> point_on_orbit(double h, double phi) {
    if (!(h > 0.0 && h < 0.5)) throw DomainError("point_on_orbit: h must lie in (0, 1/2)");
    phi = phi - 2.0 * M_PI * std::floor(phi / (2.0 * M_PI));
    const double s = std::sqrt(2.0 * h);
    const double r1m = 1.0 / (1.0 + s);
    if (phi == 0.0) return {r1m, 0.0};
    // The angle advances uniformly in orbit time; measure the period first.
    PeriodicOrbitData orb = gamma1(h);
    const double tau_target = phi / (2.0 * M_PI) * orb.period;
    IntegratorControls ctl;
    ctl.chart_switching = false;
    ctl.sample_stride = 1 << 30;
    auto tr = integrate(c1_point(r1m, 0.0, 0.0), Params{1.0}, ctl, {}, tau_target);
    return {tr.last().c[0], tr.last().c[1]};
}

ActionFrequency action_and_frequency(double h) {
    if (!(h > 0.0 && h < 0.5)) throw DomainError("action_and_frequency: h in (0, 1/2)");
    const double s = std::sqrt(2.0 * h);
    const double ra = 1.0 / (1.0 + s), rb = 1.0 / (1.0 - s);
    // 2h - (r-1)^2/r^2 = (1-2h)(rb - r)(r - ra)/r^2; substituting
    // r = ra + (rb - ra) sin^2(t) removes both square-root endpoints.
    const double w = std::sqrt(1.0 - 2.0 * h);
    const double span = rb - ra;
    auto integrand = [&](double t) {
        const double st = std::sin(t), ct = std::cos(t);
        const double r = ra + span * st * st;
        return 2.0 * w * span * span * st * st * ct * ct / r;
    };
    ActionFrequency af;
    af.A = 2.0 * detail::adaptive_quad(integrand, 0.0, 0.5 * M_PI, 1e-14, 1e-12);
    af.Omega0 = 2.0 * M_PI / gamma1(h).period;
    return af;
}

namespace {

HInfinityEstimate h_infinity_impl(const ChartPoint& start, const Params& p, double l_cut,
                                  double ratio, const IntegratorControls& base) {
    if (!(l_cut > 0.0) || !(ratio > 1.0))
        throw DomainError("h_infinity: need l_cut > 0 and ratio > 1");
    const double l0 = angular_momentum(start);
    HInfinityEstimate est;
    est.l_cuts = {l_cut, l_cut / ratio};
    if (l0 == 0.0) {
        // The l = 0 plane is invariant and H is conserved along it.
        if (start.chart != ChartId::C1)
            throw DomainError("h_infinity: l = 0 start supported in the C1 chart only");
        est.value = H_of(start.c[0], start.c[1]);
        est.h_at_cuts = {est.value, est.value};
        est.drift_rate = kNaN;
        return est;
    }
    if (l0 <= l_cut) throw DomainError("h_infinity: start already below l_cut");

    IntegratorControls ctl = base;
    ctl.sample_stride = 1 << 30;
    ctl.record_invariants = false;
    const double l_mid = l_cut / std::sqrt(ratio);
    std::vector<Event> evs{l_below_event(l_cut, false, "cut_a"),
                           l_below_event(l_mid, false, "cut_mid"),
                           l_below_event(l_cut / ratio, true, "cut_b")};
    auto tr = integrate(start, p, ctl, evs, 1e15);
    est.n_steps = tr.n_accepted;
    if (tr.status != IntegrationStatus::TerminalEvent)
        throw NonConvergence(std::string("h_infinity: integration ended early: ") + tr.message,
                             kNaN, kNaN);
    double Ha = kNaN, Hm = kNaN, Hb = kNaN;
    for (const auto& ev : tr.events) {
        if (ev.name == "cut_a") Ha = H1_at(ev.state, p);
        if (ev.name == "cut_mid") Hm = H1_at(ev.state, p);
        if (ev.name == "cut_b") Hb = H1_at(ev.state, p);
    }
    est.h_at_cuts = {Ha, Hb};
    if (std::abs(Ha - Hb) > 0.05)
        throw NonConvergence("h_infinity: cutoff values disagree beyond 0.05", Ha, Hb);
    // Richardson step assuming H1(l) = H_inf + C l^3.
    const double r3 = ratio * ratio * ratio;
    est.value = (r3 * Hb - Ha) / (r3 - 1.0);
    est.error_bound = std::abs(Ha - Hb) + 1e-10 + 1e-12 * std::sqrt(double(est.n_steps));
    const double d1 = Ha - Hm, d2 = Hm - Hb;
    est.drift_rate = (std::abs(d1) > 1e-14 && std::abs(d2) > 1e-14 && d1 * d2 > 0.0)
                         ? std::log(d1 / d2) / std::log(std::sqrt(ratio))
                         : kNaN;
    return est;
}

}  // namespace

HInfinityEstimate h_infinity(const ChartPoint& start, const Params& p, double l_cut, double ratio,
                             const IntegratorControls& base) {
    return h_infinity_impl(start, p, l_cut, ratio, base);
}

HInfinityEstimate h_infinity(const PhysicalState& start, const Params& p, double l_cut,
                             double ratio, const IntegratorControls& base) {
    return h_infinity_impl(from_physical(start, ChartId::C2), p, l_cut, ratio, base);
}

FiberPoint stable_fiber(double h, double phi, double l0, const Params& p, double l_cut) {
    if (!(h > 0.05 && h < 0.45)) throw DomainError("stable_fiber: h in (0.05, 0.45)");
    if (!(l0 >= 0.0 && l0 <= 0.3)) throw DomainError("stable_fiber: l0 in [0, 0.3]");
    FiberPoint fp;
    if (l0 == 0.0) {
        // The fiber root collapses onto the orbit itself.
        auto pt = point_on_orbit(h, phi);
        fp.r1 = pt[0];
        fp.v = pt[1];
        fp.s = h;
        fp.residual = 0.0;
        return fp;
    }
    auto F = [&](double s) {
        auto pt = point_on_orbit(s, phi);
        auto est = h_infinity(c1_point(pt[0], pt[1], l0), p, l_cut, 2.0);
        return est.value - h;
    };
    // Bracket in s around h, widening inside (0.01, 0.49).
    double lo = std::max(0.01, h - 0.05), hi = std::min(0.49, h + 0.05);
    double flo = F(lo), fhi = F(hi);
    for (int grow = 0; flo * fhi > 0.0; ++grow) {
        if (grow >= 5 || (lo == 0.01 && hi == 0.49))
            throw RootBracketError("stable_fiber: no sign change in s on (0.01, 0.49)");
        lo = std::max(0.01, lo - 0.07);
        hi = std::min(0.49, hi + 0.07);
        flo = F(lo);
        fhi = F(hi);
    }
    // Illinois iteration on the bracket.
    double a = lo, b = hi, fa = flo, fb = fhi;
    double s_best = 0.5 * (a + b), f_best = kNaN;
    int side = 0;
    for (int it = 0; it < 60; ++it) {
        double m = (fb != fa) ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
        if (!(m > a && m < b)) m = 0.5 * (a + b);
        const double fm = F(m);
        s_best = m;
        f_best = fm;
        fp.iterations = it + 1;
        if (std::abs(fm) < 5e-7 || b - a < 1e-11) break;
        if ((fm > 0.0) == (fb > 0.0)) {
            b = m;
            fb = fm;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = m;
            fa = fm;
            if (side == +1) fb *= 0.5;
            side = +1;
        }
    }
    if (!(std::abs(f_best) < 1e-6))
        throw NonConvergence("stable_fiber: |h_infinity - h| above 1e-6", f_best + h, h);
    auto pt = point_on_orbit(s_best, phi);
    fp.r1 = pt[0];
    fp.v = pt[1];
    fp.s = s_best;
    fp.residual = std::abs(f_best);
    return fp;
}

ShootResult ws_q1_shoot(const Params& p, double l0, double l_cut) {
    if (!(l0 > 0.0 && l0 <= 0.3)) throw DomainError("ws_q1_shoot: l0 in (0, 0.3]");
    if (l_cut <= 0.0) l_cut = std::min(0.02, 0.25 * l0);
    auto sc = compute_coefficients(p, 40);
    // Endpoint condition: meet the local graph at l_cut, where the truncated
    // series is accurate far below the solver tolerance.
    auto tgt = evaluate_manifold(sc, l_cut, SummationMode::TruncatedOptimal);
    auto seed = evaluate_manifold(sc, l0, SummationMode::BorelPadeLaplace);

    IntegratorControls ctl;
    ctl.chart_switching = false;
    ctl.sample_stride = 1 << 30;
    auto endpoint = [&](double r1, double v) {
        auto tr = integrate(c1_point(r1, v, l0), p, ctl, {l_below_event(l_cut, true)}, 1e12);
        if (tr.status != IntegrationStatus::TerminalEvent)
            throw NonConvergence(std::string("ws_q1_shoot: flow ended early: ") + tr.message, r1,
                                 v);
        return std::array<double, 2>{tr.last().c[0] - tgt.r1, tr.last().c[1] - tgt.v};
    };

    double r1 = seed.r1, v = seed.v;
    auto Fv = endpoint(r1, v);
    double fn = std::hypot(Fv[0], Fv[1]);
    ShootResult out;
    for (int it = 0; it < 10 && fn > 1e-11; ++it) {
        const double eps = 1e-7;
        auto Fr = endpoint(r1 + eps, v);
        auto Fu = endpoint(r1, v + eps);
        const double j11 = (Fr[0] - Fv[0]) / eps, j12 = (Fu[0] - Fv[0]) / eps;
        const double j21 = (Fr[1] - Fv[1]) / eps, j22 = (Fu[1] - Fv[1]) / eps;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-14) break;
        const double dr = (-Fv[0] * j22 + Fv[1] * j12) / det;
        const double dv = (-j11 * Fv[1] + j21 * Fv[0]) / det;
        double step = 1.0;
        for (int back = 0; back < 5; ++back) {
            auto Ft = endpoint(r1 + step * dr, v + step * dv);
            const double ft = std::hypot(Ft[0], Ft[1]);
            if (ft < fn) {
                r1 += step * dr;
                v += step * dv;
                Fv = Ft;
                fn = ft;
                break;
            }
            step *= 0.5;
        }
        out.iterations = it + 1;
    }
    if (!(fn < 1e-8))
        throw NonConvergence("ws_q1_shoot: endpoint residual did not converge", fn, 0.0);
    out.r1 = r1;
    out.v = v;
    out.residual = fn;
    out.H_end = H_of(tgt.r1 + Fv[0], tgt.v + Fv[1]);
    return out;
}

CenterFit center_manifold_fit(const Params& p, double nu_min, double nu_max) {
    if (!(nu_min > 0.0 && nu_min < nu_max && nu_max <= 0.3))
        throw DomainError("center_manifold_fit: need 0 < nu_min < nu_max <= 0.3");
    const double d = p.delta;
    const double nu_seed = 0.8 * nu_min;
    const double nu6 = std::pow(nu_seed, 6);
    // Two-term local graph as the seed; the forward flow contracts onto the
    // manifold at rate delta while nu creeps outward.
    ChartPoint start;
    start.chart = ChartId::C21INF;
    start.c = {nu_seed, -nu6 / d - 2.0 * nu6 * nu6 / (d * d * d), 0.0};

    IntegratorControls ctl;
    ctl.chart_switching = false;
    ctl.sample_stride = 1 << 30;
    const int n_grid = 12;
    std::vector<Event> evs;
    for (int i = 0; i < n_grid; ++i) {
        const double nu_i = nu_min * std::pow(nu_max / nu_min, double(i) / (n_grid - 1));
        Event ev;
        ev.name = "nu_" + std::to_string(i);
        ev.g = [nu_i](const ChartPoint& q) { return q.c[0] - nu_i; };
        ev.direction = +1;
        ev.terminal = (i == n_grid - 1);
        evs.push_back(ev);
    }
    // Outward drift is nu' ~ nu^7/(2 delta): budget the crawl from the seed.
    const double budget = 0.5 * d * (std::pow(nu_seed, -6.0) - std::pow(nu_max, -6.0)) + 1e4;
    auto tr = integrate(start, p, ctl, evs, budget);
    if (tr.status != IntegrationStatus::TerminalEvent)
        throw NonConvergence(std::string("center_manifold_fit: flow ended early: ") + tr.message,
                             kNaN, kNaN);

    CenterFit fit;
    for (const auto& ev : tr.events) fit.samples.push_back({ev.state.c[0], ev.state.c[1]});
    // Least squares of v11/nu^6 = c + c2 nu^6.
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (const auto& sm : fit.samples) {
        const double w = std::pow(sm[0], 6);
        const double y = sm[1] / w;
        s0 += 1;
        s1 += w;
        s2 += w * w;
        t0 += y;
        t1 += w * y;
    }
    const double det = s0 * s2 - s1 * s1;
    fit.c = (s2 * t0 - s1 * t1) / det;
    fit.c2 = (s0 * t1 - s1 * t0) / det;
    for (const auto& sm : fit.samples) {
        const double w = std::pow(sm[0], 6);
        fit.residual = std::max(fit.residual, std::abs(sm[1] / w - fit.c - fit.c2 * w));
    }
    if (fit.residual > 0.05 * std::abs(fit.c))
        throw FitError("center_manifold_fit: graph fit residual too large", fit.residual);
    return fit;
}

}  // namespace kepler
