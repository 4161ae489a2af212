#ifndef KEPLERDRAG_QUAD_INTERNAL_HPP
#define KEPLERDRAG_QUAD_INTERNAL_HPP

// Adaptive Gauss-Kronrod 7(15) quadrature, shared by the summation and
// action-integral code.  Not part of the installed surface.

#include <cmath>
#include <vector>

#include "keplerdrag/errors.hpp"

namespace kepler::detail {

constexpr double kXgk[8] = {0.991455371120813, 0.949107912342759, 0.864864423359769,
                            0.741531185599394, 0.586087235467691, 0.405845151377397,
                            0.207784955007898, 0.0};
constexpr double kWgk[8] = {0.022935322010529, 0.063092092629979, 0.104790010322250,
                            0.140653259715525, 0.169004726639267, 0.190350578064785,
                            0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                           0.417959183673469};

template <class F>
void qk15(const F& f, double a, double b, double& result, double& abserr) {
    const double hl = 0.5 * (b - a), mid = 0.5 * (a + b);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(mid - hl * kXgk[i]);
        fv[14 - i] = f(mid + hl * kXgk[i]);
    }
    fv[7] = f(mid);
    double resk = kWgk[7] * fv[7];
    double resg = kWg[3] * fv[7];
    for (int i = 0; i < 7; ++i) resk += kWgk[i] * (fv[i] + fv[14 - i]);
    for (int i = 0; i < 3; ++i) resg += kWg[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    result = resk * hl;
    abserr = std::abs((resk - resg) * hl);
}

template <class F>
double adaptive_quad(const F& f, double a, double b, double abs_tol, double rel_tol) {
    struct Seg {
        double a, b, val, err;
    };
    std::vector<Seg> segs;
    Seg s0{a, b, 0.0, 0.0};
    qk15(f, a, b, s0.val, s0.err);
    segs.push_back(s0);
    for (int iter = 0; iter < 2000; ++iter) {
        double total = 0.0, err = 0.0;
        size_t worst = 0;
        for (size_t i = 0; i < segs.size(); ++i) {
            total += segs[i].val;
            err += segs[i].err;
            if (segs[i].err > segs[worst].err) worst = i;
        }
        if (err <= abs_tol + rel_tol * std::abs(total)) return total;
        Seg w = segs[worst];
        const double m = 0.5 * (w.a + w.b);
        Seg left{w.a, m, 0, 0}, right{m, w.b, 0, 0};
        qk15(f, left.a, left.b, left.val, left.err);
        qk15(f, right.a, right.b, right.val, right.err);
        segs[worst] = left;
        segs.push_back(right);
    }
    throw QuadratureError("adaptive Gauss-Kronrod did not converge");
}

}  // namespace kepler::detail

#endif
