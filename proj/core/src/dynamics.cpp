#include "keplerdrag/dynamics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace kepler {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_finite(ChartId id, const std::array<double, 3>& c) {
    for (double x : c) {
        if (!std::isfinite(x)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "vector_field(%s): non-finite coordinate",
                          chart_name(id));
            throw DomainError(buf);
        }
    }
}

}  // namespace

FieldOutput vector_field(ChartId id, const std::array<double, 3>& c, const Params& p,
                         C1Form c1_form) {
    check_finite(id, c);
    const double d = p.delta;
    FieldOutput out;
    switch (id) {
        case ChartId::PHYS: {
            const double r = c[0], rdot = c[1], l = c[2];
            if (r <= 0.0) throw DomainError("vector_field(PHYS): r <= 0");
            const double r2 = r * r;
            out.dcdtau = {rdot, -1.0 / r2 + l * l / (r2 * r) - d * rdot, -d * l};
            out.dt_dtau = 1.0;
            out.dtheta_dtau = l / r2;
            return out;
        }
        case ChartId::RVL: {
            const double r = c[0], v = c[1], l = c[2];
            const double r3 = r * r * r;
            out.dcdtau = {v * r3, l * (l * l * l - r * l - 2.0 * d * r3 * v), -d * r3 * l * l};
            out.dt_dtau = l * r3;
            out.dtheta_dtau = l * l * r;
            return out;
        }
        case ChartId::C1: {
            const double r1 = c[0], v = c[1], l = c[2];
            if (r1 <= 0.0) throw DomainError("vector_field(C1): r1 <= 0");
            const double l3 = l * l * l;
            if (c1_form == C1Form::ChartTime) {
                out.dcdtau = {v + 2.0 * d * r1 * l3, -(r1 - 1.0) / (r1 * r1 * r1) - 2.0 * d * v * l3,
                              -d * l3 * l};
                out.dt_dtau = l3;
                out.dtheta_dtau = 1.0 / (r1 * r1);
            } else {
                const double r13 = r1 * r1 * r1;
                out.dcdtau = {v * r13 + 2.0 * d * r13 * r1 * l3, (1.0 - r1) - 2.0 * d * v * r13 * l3,
                              -d * r13 * l3 * l};
                out.dt_dtau = l3 * r13;
                out.dtheta_dtau = r1;
            }
            return out;
        }
        case ChartId::C2: {
            const double rho2 = c[0], v = c[1], l2 = c[2];
            const double rho23 = rho2 * rho2 * rho2;
            out.dcdtau = {0.5 * rho2 * v, l2 * l2 * (l2 * l2 - 1.0) - 2.0 * d * rho23 * v * l2,
                          -0.5 * l2 * (v + 2.0 * d * rho23 * l2)};
            out.dt_dtau = rho23 * l2;
            out.dtheta_dtau = l2 * l2;
            return out;
        }
        case ChartId::C21: {
            const double rho2 = c[0], v1 = c[1], mu1 = c[2];
            const double rho23 = rho2 * rho2 * rho2;
            out.dcdtau = {0.5 * rho2 * v1, mu1 * mu1 + 0.5 * v1 * v1 - 1.0 - d * rho23 * v1,
                          -(0.5 * v1 + d * rho23) * mu1};
            out.dt_dtau = rho23;
            out.dtheta_dtau = mu1;
            return out;
        }
        case ChartId::C22: {
            const double rho2 = c[0], mu2 = c[1], l22 = c[2];
            const double rho23 = rho2 * rho2 * rho2;
            const double l22sq = l22 * l22;
            out.dcdtau = {0.5 * rho2,
                          l22 * mu2 * (l22 * l22sq * mu2 * mu2 - 2.0 * d * rho23 - l22),
                          -l22 * (l22sq * l22sq * mu2 * mu2 - d * l22 * rho23 - l22sq + 0.5)};
            out.dt_dtau = rho23 * l22;
            out.dtheta_dtau = mu2 * l22sq;
            return out;
        }
        case ChartId::C23: {
            // v < 0 side.  Dividing by +mu3 keeps the time orientation of the
            // flow, so rho2 decreases along infall as it must.
            const double rho2 = c[0], mu3 = c[1], l23 = c[2];
            const double rho23 = rho2 * rho2 * rho2;
            const double l23sq = l23 * l23;
            out.dcdtau = {-0.5 * rho2,
                          -mu3 * l23 * (mu3 * mu3 * l23 * l23sq - l23 + 2.0 * d * rho23),
                          -l23 * (l23sq - d * rho23 * l23 - 0.5 - mu3 * mu3 * l23sq * l23sq)};
            out.dt_dtau = rho23 * l23;
            out.dtheta_dtau = mu3 * l23sq;
            return out;
        }
        case ChartId::C21INF: {
            // Chart time coincides with physical time here.
            const double nu = c[0], v11 = c[1], mu11 = c[2];
            const double nu6 = nu * nu * nu * nu * nu * nu;
            out.dcdtau = {-0.5 * nu * v11, -v11 * (d + v11) + nu6 * (mu11 * mu11 * nu6 - 1.0),
                          mu11 * (v11 - d)};
            out.dt_dtau = 1.0;
            out.dtheta_dtau = nu6 * mu11;
            return out;
        }
        case ChartId::C22INF: {
            const double nu = c[0], mu2 = c[1], l222 = c[2];
            const double nu6 = nu * nu * nu * nu * nu * nu;
            const double a = nu6 * l222;                  // nu^6 l222
            const double b = nu6 * a * l222 * l222;       // nu^12 l222^3
            out.dcdtau = {-0.5 * nu, -mu2 * l222 * (2.0 * d + a - b * mu2 * mu2),
                          l222 * (1.0 + d * l222 + a * l222 - b * l222 * mu2 * mu2)};
            out.dt_dtau = l222;
            out.dtheta_dtau = mu2 * nu6 * l222 * l222;
            return out;
        }
        case ChartId::C23INF: {
            const double nu = c[0], mu3 = c[1], l233 = c[2];
            const double nu6 = nu * nu * nu * nu * nu * nu;
            const double a = nu6 * l233;
            const double b = nu6 * a * l233 * l233;
            out.dcdtau = {0.5 * nu, mu3 * l233 * (a - 2.0 * d - b * mu3 * mu3),
                          l233 * (d * l233 - 1.0 - a * l233 + b * l233 * mu3 * mu3)};
            out.dt_dtau = l233;
            out.dtheta_dtau = mu3 * nu6 * l233 * l233;
            return out;
        }
    }
    throw DomainError("vector_field: bad chart id");
}

std::array<std::array<double, 3>, 3> jacobian(ChartId id, const std::array<double, 3>& c,
                                              const Params& p) {
    const double d = p.delta;
    std::array<std::array<double, 3>, 3> J{};
    switch (id) {
        case ChartId::C1: {
            const double r1 = c[0], v = c[1], l = c[2];
            const double l2 = l * l, l3 = l2 * l;
            J[0] = {2.0 * d * l3, 1.0, 6.0 * d * r1 * l2};
            J[1] = {(2.0 * r1 - 3.0) / (r1 * r1 * r1 * r1), -2.0 * d * l3, -6.0 * d * v * l2};
            J[2] = {0.0, 0.0, -4.0 * d * l3};
            return J;
        }
        case ChartId::C21: {
            const double rho2 = c[0], v1 = c[1], mu1 = c[2];
            const double rho22 = rho2 * rho2, rho23 = rho22 * rho2;
            J[0] = {0.5 * v1, 0.5 * rho2, 0.0};
            J[1] = {-3.0 * d * rho22 * v1, v1 - d * rho23, 2.0 * mu1};
            J[2] = {-3.0 * d * rho22 * mu1, -0.5 * mu1, -(0.5 * v1 + d * rho23)};
            return J;
        }
        case ChartId::C21INF: {
            const double nu = c[0], v11 = c[1], mu11 = c[2];
            const double nu5 = nu * nu * nu * nu * nu;
            const double nu6 = nu5 * nu, nu11 = nu5 * nu6, nu12 = nu6 * nu6;
            J[0] = {-0.5 * v11, -0.5 * nu, 0.0};
            J[1] = {12.0 * mu11 * mu11 * nu11 - 6.0 * nu5, -d - 2.0 * v11, 2.0 * mu11 * nu12};
            J[2] = {0.0, mu11, v11 - d};
            return J;
        }
        default: {
            // Central differences; exact Jacobians are coded only where the
            // spectra are checked against closed-form values.
            for (int j = 0; j < 3; ++j) {
                const double h = 1e-6 * (1.0 + std::abs(c[j]));
                auto cp = c, cm = c;
                cp[j] += h;
                cm[j] -= h;
                const auto fp = vector_field(id, cp, p).dcdtau;
                const auto fm = vector_field(id, cm, p).dcdtau;
                for (int i = 0; i < 3; ++i) J[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
            return J;
        }
    }
}

Invariants invariants(const PhysicalState& s, const Params& p) {
    if (!(s.r > 0.0)) throw DomainError("invariants: requires r > 0");
    if (s.l < 0.0) throw DomainError("invariants: requires l >= 0");
    Invariants q;
    q.K = 0.5 * (s.rdot * s.rdot + s.l * s.l / (s.r * s.r));
    q.P = -1.0 / s.r;
    q.E = q.K + q.P;
    q.l = s.l;

    // ecc = e^{i theta} [ (l^2/r - 1) - i l rdot ]  in the orbital plane.
    const double a = s.l * s.l / s.r - 1.0;
    const double b = -s.l * s.rdot;
    const double ct = std::cos(s.theta), st = std::sin(s.theta);
    q.ecc = {ct * a - st * b, st * a + ct * b};

    const double l2 = s.l / std::sqrt(s.r);
    q.H2 = 0.5 * (s.l * s.rdot) * (s.l * s.rdot) + 0.5 - l2 * l2 + 0.5 * l2 * l2 * l2 * l2;

    if (s.l > 0.0) {
        const double r1 = s.r / (s.l * s.l);
        const double v = s.l * s.rdot;
        const double x = s.l * s.l * s.l;
        q.H = 0.5 * v * v + (r1 - 1.0) * (r1 - 1.0) / (2.0 * r1 * r1);
        q.H1 = q.H + 2.0 * p.delta * r1 * v * x + 3.0 * p.delta * p.delta * r1 * r1 * x * x;
    } else {
        q.H = kNaN;
        q.H1 = kNaN;
    }
    return q;
}

Invariants invariants_at(const ChartPoint& pt, const Params& params) {
    const double r = radius(pt);
    if (r > 0.0 && std::isfinite(r)) {
        PhysicalState s;
        s.r = r;
        s.l = angular_momentum(pt);
        s.theta = pt.theta;
        s.t = pt.t_phys;
        // rdot = v/l fails on blowup sets; recover it chart-wise when possible.
        bool have_rdot = true;
        switch (pt.chart) {
            case ChartId::PHYS: s.rdot = pt.c[1]; break;
            case ChartId::C21: s.rdot = pt.c[0] > 0.0 ? pt.c[1] / pt.c[0] : kNaN;
                have_rdot = pt.c[0] > 0.0;
                break;
            case ChartId::C22: s.rdot = (pt.c[0] * pt.c[2] > 0.0) ? 1.0 / (pt.c[0] * pt.c[2]) : kNaN;
                have_rdot = pt.c[0] * pt.c[2] > 0.0;
                break;
            case ChartId::C23:
                s.rdot = (pt.c[0] * pt.c[2] > 0.0) ? -1.0 / (pt.c[0] * pt.c[2]) : kNaN;
                have_rdot = pt.c[0] * pt.c[2] > 0.0;
                break;
            case ChartId::C21INF: s.rdot = pt.c[1] * r; break;
            case ChartId::C22INF:
                s.rdot = pt.c[2] > 0.0 ? r / pt.c[2] : kNaN;
                have_rdot = pt.c[2] > 0.0;
                break;
            case ChartId::C23INF:
                s.rdot = pt.c[2] > 0.0 ? -r / pt.c[2] : kNaN;
                have_rdot = pt.c[2] > 0.0;
                break;
            default: {
                const double l = angular_momentum(pt);
                const double v = v_of(pt);
                if (l > 0.0) {
                    s.rdot = v / l;
                } else {
                    have_rdot = false;
                }
                break;
            }
        }
        if (have_rdot) return invariants(s, params);
    }
    // Blowup state: only the H2-form value survives, through (l2, v).
    Invariants q;
    q.E = kNaN;
    q.K = kNaN;
    q.P = kNaN;
    q.l = angular_momentum(pt);
    q.ecc = {kNaN, kNaN};
    q.H = kNaN;
    q.H1 = kNaN;
    double l2 = kNaN;
    switch (pt.chart) {
        case ChartId::C2: l2 = pt.c[2]; break;
        case ChartId::C21: l2 = pt.c[2]; break;
        case ChartId::C22: l2 = pt.c[1] * pt.c[2]; break;
        case ChartId::C23: l2 = pt.c[1] * pt.c[2]; break;
        case ChartId::C21INF: l2 = pt.c[0] * pt.c[0] * pt.c[0] * pt.c[2] * pt.c[1]; break;
        default: break;
    }
    if (std::isfinite(l2)) {
        const double v = v_of(pt);
        q.H2 = 0.5 * v * v + 0.5 - l2 * l2 + 0.5 * l2 * l2 * l2 * l2;
    } else {
        q.H2 = kNaN;
    }
    return q;
}

LieDerivativeH1 lie_derivative_H1(double r1, double v, double x, const Params& p) {
    if (!(r1 > 0.0)) throw DomainError("lie_derivative_H1: requires r1 > 0");
    const double d = p.delta;
    // Field of the (r1, v, x) system, x = l^3.
    const double f0 = v + 2.0 * d * r1 * x;
    const double f1 = -(r1 - 1.0) / (r1 * r1 * r1) - 2.0 * d * v * x;
    const double f2 = -3.0 * d * x * x;
    // Exact gradient of H1 = H + 2 d r1 v x + 3 d^2 r1^2 x^2.
    const double dH_dr1 = (r1 - 1.0) / (r1 * r1 * r1) + 2.0 * d * v * x + 6.0 * d * d * r1 * x * x;
    const double dH_dv = v + 2.0 * d * r1 * x;
    const double dH_dx = 2.0 * d * r1 * v + 6.0 * d * d * r1 * r1 * x;
    LieDerivativeH1 out;
    out.numeric = dH_dr1 * f0 + dH_dv * f1 + dH_dx * f2;
    out.closed_form = -6.0 * d * d * d * r1 * r1 * x * x * x;
    return out;
}

namespace {

std::array<std::complex<double>, 3> spectrum(ChartId id, const std::array<double, 3>& c,
                                             const Params& p) {
    const auto J = jacobian(id, c, p);
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = J[i][j];
    Eigen::EigenSolver<Eigen::Matrix3d> es(m);
    std::array<std::complex<double>, 3> ev;
    for (int i = 0; i < 3; ++i) ev[i] = es.eigenvalues()[i];
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return ev;
}

Equilibrium make_eq(const char* name, ChartId id, std::array<double, 3> c, const Params& p) {
    Equilibrium e;
    e.name = name;
    e.coords = c;
    e.eigenvalues = spectrum(id, c, p);
    return e;
}

}  // namespace

std::vector<Equilibrium> equilibria(ChartId id, const Params& p) {
    const double d = p.delta;
    const double s2 = std::sqrt(2.0);
    std::vector<Equilibrium> out;
    switch (id) {
        case ChartId::C1:
            out.push_back(make_eq("q1", id, {1.0, 0.0, 0.0}, p));
            break;
        case ChartId::C2:
            out.push_back(make_eq("gamma2", id, {0.0, 0.0, 0.0}, p));
            out.push_back(make_eq("q2", id, {0.0, 0.0, 1.0}, p));
            break;
        case ChartId::C21:
            out.push_back(make_eq("gamma21+", id, {0.0, s2, 0.0}, p));
            out.push_back(make_eq("gamma21-", id, {0.0, -s2, 0.0}, p));
            break;
        case ChartId::C22:
            out.push_back(make_eq("gamma22+", id, {0.0, 0.0, 1.0 / s2}, p));
            break;
        case ChartId::C23:
            out.push_back(make_eq("gamma23-", id, {0.0, 0.0, 1.0 / s2}, p));
            break;
        case ChartId::C21INF: {
            Equilibrium plus = make_eq("p21+", id, {0.0, 0.0, 0.0}, p);
            plus.has_inplane = true;
            plus.inplane = {-d, -d};  // nu = 0 subsystem, semi-simple node
            out.push_back(plus);
            Equilibrium minus = make_eq("p21-", id, {0.0, -d, 0.0}, p);
            minus.has_inplane = true;
            minus.inplane = {d, -2.0 * d};  // nu = 0 subsystem, saddle
            out.push_back(minus);
            break;
        }
        case ChartId::C23INF:
            if (d > 0.0) out.push_back(make_eq("p23-", id, {0.0, 0.0, 1.0 / d}, p));
            break;
        default: break;
    }
    return out;
}

}  // namespace kepler
