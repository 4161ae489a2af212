#include "keplerdrag/series.hpp"

#include "quad_internal.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>

namespace kepler {

namespace {

using boost::multiprecision::cpp_int;

// --- truncated series helpers (index = power of x) --------------------------

template <class T>
std::vector<T> series_mul(const std::vector<T>& a, const std::vector<T>& b, int order) {
    std::vector<T> c(size_t(order) + 1, T(0));
    for (int i = 0; i <= order; ++i) {
        if (a[size_t(i)] == T(0)) continue;
        for (int j = 0; i + j <= order; ++j) c[size_t(i + j)] += a[size_t(i)] * b[size_t(j)];
    }
    return c;
}

// (1 + s)^(-3) - 1 for a series s with s_0 = s_1 = 0, through `order`.
template <class T>
std::vector<T> inv_cube_minus_one(const std::vector<T>& s, int order) {
    std::vector<T> inv(size_t(order) + 1, T(0));
    inv[0] = T(1);
    for (int m = 1; m <= order; ++m) {
        T acc(0);
        for (int j = 2; j <= m; ++j) acc += s[size_t(j)] * inv[size_t(m - j)];
        inv[size_t(m)] = -acc;
    }
    auto sq = series_mul(inv, inv, order);
    auto cube = series_mul(sq, inv, order);
    cube[0] -= T(1);
    return cube;
}

// Coefficient recurrence.  Matching powers of x in x^2 y' = A y + f(x, y)
// and eliminating A gives two scalar relations per order:
//   (Y_n)_2 = -d (3n + 2) (Y_{n-1})_1
//   (Y_n)_1 =  d (3n - 2) (Y_{n-1})_2 - 2 d^2 [n = 1] - C_n
// with C_n the order-n coefficient of r11(x) ((1 + x r11(x))^-3 - 1), which
// only involves orders <= n - 2.
template <class T>
void run_recurrence(const T& d, int N, std::vector<std::array<T, 2>>& Y,
                    const std::function<bool(const T&)>& in_range) {
    Y.assign(size_t(N), {T(0), T(0)});
    std::vector<T> r11(size_t(N) + 1, T(0));  // r11[k] = (Y_k)_1, r11[0] = 0
    std::vector<T> s(size_t(N) + 1, T(0));    // s = x r11(x)
    for (int n = 1; n <= N; ++n) {
        const T prev1 = n >= 2 ? Y[size_t(n - 2)][0] : T(0);
        const T prev2 = n >= 2 ? Y[size_t(n - 2)][1] : T(0);
        T Cn(0);
        if (n >= 3) {
            auto g = inv_cube_minus_one(s, n);  // starts at x^2
            for (int k = 1; k <= n - 2; ++k) Cn += r11[size_t(k)] * g[size_t(n - k)];
        }
        T y1 = d * T(3 * n - 2) * prev2 - Cn;
        if (n == 1) y1 -= T(2) * d * d;
        const T y2 = -d * T(3 * n + 2) * prev1;
        if (!in_range(y1) || !in_range(y2))
            throw OverflowError("series coefficients left the floating-point range", n - 1);
        Y[size_t(n - 1)] = {y1, y2};
        r11[size_t(n)] = y1;
        if (n + 1 <= N) s[size_t(n + 1)] = y1;
    }
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

// Exact decimal string when the denominator is 2^a 5^b, else "p/q".
std::string rational_string(const Rational& q) {
    cpp_int num = boost::multiprecision::numerator(q);
    cpp_int den = boost::multiprecision::denominator(q);
    bool neg = num < 0;
    if (neg) num = -num;
    cpp_int d = den;
    int twos = 0, fives = 0;
    while (d % 2 == 0) {
        d /= 2;
        ++twos;
    }
    while (d % 5 == 0) {
        d /= 5;
        ++fives;
    }
    if (d != 1) {
        std::string s = num.str() + "/" + den.str();
        return neg ? "-" + s : s;
    }
    const int k = std::max(twos, fives);
    for (int i = 0; i < k - twos; ++i) num *= 2;
    for (int i = 0; i < k - fives; ++i) num *= 5;
    std::string digits = num.str();
    std::string out;
    if (k == 0) {
        out = digits;
    } else {
        if (int(digits.size()) <= k) digits.insert(0, size_t(k + 1 - int(digits.size())), '0');
        out = digits.substr(0, digits.size() - size_t(k)) + "." +
              digits.substr(digits.size() - size_t(k));
        while (out.back() == '0') out.pop_back();
        if (out.back() == '.') out.pop_back();
    }
    return neg ? "-" + out : out;
}

double norm_of(const std::array<double, 2>& y) { return std::hypot(y[0], y[1]); }

// --- Pade -------------------------------------------------------------------

struct PadeRational {
    std::vector<double> p;  // numerator, ascending powers
    std::vector<double> q;  // denominator, q[0] = 1
    double eval(double w) const {
        double num = 0.0, den = 0.0;
        for (size_t i = p.size(); i-- > 0;) num = num * w + p[i];
        for (size_t i = q.size(); i-- > 0;) den = den * w + q[i];
        return num / den;
    }
};

PadeRational pade_diagonal(const std::vector<double>& c) {
    const int L = int(c.size()) - 1;  // highest available power
    const int n = L / 2;              // denominator degree
    const int m = L - n;              // numerator degree
    PadeRational r;
    if (n == 0) {
        r.p = c;
        r.q = {1.0};
        return r;
    }
    Eigen::MatrixXd T(n, n);
    Eigen::VectorXd rhs(n);
    auto cc = [&](int k) { return (k >= 0 && k <= L) ? c[size_t(k)] : 0.0; };
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) T(i - 1, j - 1) = cc(m + i - j);
        rhs(i - 1) = -cc(m + i);
    }
    Eigen::VectorXd qs = T.colPivHouseholderQr().solve(rhs);
    r.q.assign(size_t(n) + 1, 0.0);
    r.q[0] = 1.0;
    for (int j = 1; j <= n; ++j) r.q[size_t(j)] = qs(j - 1);
    r.p.assign(size_t(m) + 1, 0.0);
    for (int k = 0; k <= m; ++k) {
        double acc = 0.0;
        for (int j = 0; j <= std::min(k, n); ++j) acc += cc(k - j) * r.q[size_t(j)];
        r.p[size_t(k)] = acc;
    }
    return r;
}

// Smallest real root of the denominator inside (0, wmax]; NaN when none.
double pole_on_path(const PadeRational& r, double wmax) {
    int deg = int(r.q.size()) - 1;
    while (deg > 0 && r.q[size_t(deg)] == 0.0) --deg;
    if (deg == 0) return std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 0; i < deg; ++i) comp(0, i) = -r.q[size_t(deg - 1 - i)] / r.q[size_t(deg)];
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < deg; ++i) {
        const std::complex<double> z = es.eigenvalues()[i];
        if (std::abs(z.imag()) < 1e-9 * (1.0 + std::abs(z.real())) && z.real() > 0.0 &&
            z.real() <= wmax) {
            if (std::isnan(best) || z.real() < best) best = z.real();
        }
    }
    return best;
}

ManifoldPoint sum_truncated_optimal(const SeriesCoefficients& sc, double x, double delta) {
    // Stop at the index of smallest term magnitude.
    int n_opt = sc.N;
    double best = std::numeric_limits<double>::infinity();
    double xn = x;
    for (int n = 1; n <= sc.N; ++n) {
        const double term = norm_of(sc.Y[size_t(n - 1)]) * std::abs(xn);
        if (term > 0.0 && term < best) {
            best = term;
            n_opt = n;
        }
        xn *= x;
    }
    double y1 = 0.0, y2 = 0.0;
    xn = x;
    for (int n = 1; n <= n_opt; ++n) {
        y1 += sc.Y[size_t(n - 1)][0] * xn;
        y2 += sc.Y[size_t(n - 1)][1] * xn;
        xn *= x;
    }
    ManifoldPoint mp;
    mp.r1 = 1.0 + x * y1;
    mp.v = x * (y2 - 2.0 * delta);
    mp.est_error = std::isfinite(best) ? best * std::abs(x) : 0.0;
    mp.n_opt = n_opt;
    mp.mode_used = SummationMode::TruncatedOptimal;
    return mp;
}

}  // namespace

SeriesCoefficients compute_coefficients(const Params& p, int N, int exact_cap) {
    if (N < 1) throw DomainError("compute_coefficients: N >= 1 required");
    if (!(p.delta > 0.0)) throw DomainError("compute_coefficients: delta > 0 required");
    SeriesCoefficients sc;
    sc.params = p;
    sc.N = N;
    sc.exact_order = std::min(N, std::max(0, exact_cap));

    if (sc.exact_order > 0) {
        const Rational d(p.delta);
        std::function<bool(const Rational&)> ok = [](const Rational&) { return true; };
        run_recurrence<Rational>(d, sc.exact_order, sc.Y_exact, ok);
    }
    if (N > sc.exact_order) {
        std::function<bool(const double&)> ok = [](const double& v) {
            return std::isfinite(v) && std::abs(v) < 1e305;
        };
        run_recurrence<double>(p.delta, N, sc.Y, ok);
        for (int n = 1; n <= sc.exact_order; ++n)
            sc.Y[size_t(n - 1)] = {to_double(sc.Y_exact[size_t(n - 1)][0]),
                                   to_double(sc.Y_exact[size_t(n - 1)][1])};
    } else {
        sc.Y.resize(size_t(N));
        for (int n = 1; n <= N; ++n)
            sc.Y[size_t(n - 1)] = {to_double(sc.Y_exact[size_t(n - 1)][0]),
                                   to_double(sc.Y_exact[size_t(n - 1)][1])};
    }
    return sc;
}

std::pair<double, double> gevrey_fit(SeriesCoefficients& sc) {
    if (sc.N < 10) throw DomainError("gevrey_fit: needs N >= 10");
    const int first = sc.N - (sc.N + 1) / 2 + 1;  // last ceil(N/2) orders
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int n = first; n <= sc.N; ++n) {
        const double mag = norm_of(sc.Y[size_t(n - 1)]);
        if (mag <= 0.0) continue;
        const double yv = std::log(mag) - std::lgamma(double(n) + 1.0);
        sx += n;
        sy += yv;
        sxx += double(n) * n;
        sxy += n * yv;
        ++m;
    }
    if (m < 4) throw FitError("gevrey_fit: too few usable orders");
    const double det = m * sxx - sx * sx;
    const double slope = (m * sxy - sx * sy) / det;
    const double icept = (sy - slope * sx) / m;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / m;
    for (int n = first; n <= sc.N; ++n) {
        const double mag = norm_of(sc.Y[size_t(n - 1)]);
        if (mag <= 0.0) continue;
        const double yv = std::log(mag) - std::lgamma(double(n) + 1.0);
        ss_res += (yv - icept - slope * n) * (yv - icept - slope * n);
        ss_tot += (yv - ymean) * (yv - ymean);
    }
    const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (r2 < 0.99) throw FitError("gevrey_fit: |Y_n|/n! is not log-linear", r2);
    double b = std::exp(slope);
    double a = std::exp(icept);
    // Inflate a so the bound holds at every computed order.
    for (int n = 1; n <= sc.N; ++n) {
        const double mag = norm_of(sc.Y[size_t(n - 1)]);
        if (mag <= 0.0) continue;
        const double need =
            std::exp(std::log(mag) - std::lgamma(double(n) + 1.0) - double(n) * std::log(b));
        a = std::max(a, need * (1.0 + 1e-12));
    }
    sc.gevrey_a = a;
    sc.gevrey_b = b;
    sc.gevrey_r2 = r2;
    return {a, b};
}

ManifoldPoint evaluate_manifold(const SeriesCoefficients& sc, double l, SummationMode mode) {
    if (l < 0.0) throw DomainError("evaluate_manifold: l >= 0 required");
    const double delta = sc.params.delta;
    ManifoldPoint mp;
    mp.advisory = l > kManifoldLSmall;
    if (l == 0.0) {
        mp.r1 = 1.0;
        mp.v = 0.0;
        mp.mode_used = mode;
        return mp;
    }
    const double x = l * l * l;
    if (mode == SummationMode::TruncatedOptimal) {
        const bool adv = mp.advisory;
        mp = sum_truncated_optimal(sc, x, delta);
        mp.advisory = adv;
        return mp;
    }

    // Borel transform with the parity structure factored out:
    //   y1 has odd orders only:  B(y1)(u) = psi1(u^2)
    //   y2 has even orders only: B(y2)(u) = u psi2(u^2)
    std::vector<double> psi1, psi2;
    for (int nn = 1; nn <= sc.N; nn += 2)
        psi1.push_back(sc.Y[size_t(nn - 1)][0] / std::exp(std::lgamma(double(nn))));
    for (int nn = 2; nn <= sc.N; nn += 2)
        psi2.push_back(sc.Y[size_t(nn - 1)][1] / std::exp(std::lgamma(double(nn))));

    const PadeRational pr1 = pade_diagonal(psi1);
    const PadeRational pr2 = pade_diagonal(psi2);
    const double U = 10.0 * x;
    const double wmax = U * U * 1.2;
    for (const PadeRational* pr : {&pr1, &pr2}) {
        const double pole = pole_on_path(*pr, wmax);
        if (!std::isnan(pole)) {
            // Report-and-fall-back contract: the truncated sum is still valid.
            const bool adv = mp.advisory;
            mp = sum_truncated_optimal(sc, x, delta);
            mp.advisory = adv;
            return mp;
        }
    }

    auto phi1 = [&](double u) { return pr1.eval(u * u); };
    auto phi2 = [&](double u) { return u * pr2.eval(u * u); };
    auto integrand1 = [&](double u) { return phi1(u) * std::exp(-u / x); };
    auto integrand2 = [&](double u) { return phi2(u) * std::exp(-u / x); };
    const double tol_abs = 1e-18, tol_rel = 5e-14;
    double y1 = detail::adaptive_quad(integrand1, 0.0, U, tol_abs, tol_rel);
    double y2 = detail::adaptive_quad(integrand2, 0.0, U, tol_abs, tol_rel);

    // Analytic tail of the Laplace integral, integrand linearized at U:
    // integral_U^inf (c0 + c1 (u-U)) e^{-u/x} du = e^{-U/x}(c0 x + c1 x^2).
    const double du = 1e-4 * U;
    const double ex = std::exp(-U / x);
    const double c10 = phi1(U), c11 = (phi1(U + du) - phi1(U - du)) / (2 * du);
    const double c20 = phi2(U), c21 = (phi2(U + du) - phi2(U - du)) / (2 * du);
    y1 += ex * (c10 * x + c11 * x * x);
    y2 += ex * (c20 * x + c21 * x * x);

    mp.r1 = 1.0 + x * y1;
    mp.v = x * (y2 - 2.0 * delta);
    // Second-order tail remainder plus the quadrature target.
    const double tail2 = ex * x * x * x * (std::abs(c11) + std::abs(c21) + 1.0);
    mp.est_error = std::abs(x) * (tol_rel * (std::abs(y1) + std::abs(y2)) + tol_abs) + tail2;
    mp.n_opt = sc.N;
    mp.mode_used = SummationMode::BorelPadeLaplace;
    return mp;
}

void write_coefficients_csv(const SeriesCoefficients& sc, std::ostream& os) {
    os << "n,Y_n_1,Y_n_2\n";
    char buf[80];
    for (int n = 1; n <= sc.N; ++n) {
        if (n <= sc.exact_order) {
            os << n << "," << rational_string(sc.Y_exact[size_t(n - 1)][0]) << ","
               << rational_string(sc.Y_exact[size_t(n - 1)][1]) << "\n";
        } else {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g", n, sc.Y[size_t(n - 1)][0],
                          sc.Y[size_t(n - 1)][1]);
            os << buf << "\n";
        }
    }
}

}  // namespace kepler
