#include "keplerdrag/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <queue>

namespace kepler {

namespace {

[[noreturn]] void domain_fail(const char* where, const ChartPoint& p, const char* why) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %s [chart=%s c=(%.17g, %.17g, %.17g)]", where, why,
                  chart_name(p.chart), p.c[0], p.c[1], p.c[2]);
    throw DomainError(buf);
}

[[noreturn]] void domain_fail_phys(const char* where, const PhysicalState& s, const char* why) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %s [r=%.17g rdot=%.17g l=%.17g]", where, why, s.r, s.rdot,
                  s.l);
    throw DomainError(buf);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const char* chart_name(ChartId id) {
    switch (id) {
        case ChartId::PHYS: return "PHYS";
        case ChartId::RVL: return "RVL";
        case ChartId::C1: return "C1";
        case ChartId::C2: return "C2";
        case ChartId::C21: return "C21";
        case ChartId::C22: return "C22";
        case ChartId::C23: return "C23";
        case ChartId::C21INF: return "C21INF";
        case ChartId::C22INF: return "C22INF";
        case ChartId::C23INF: return "C23INF";
    }
    return "?";
}

ChartId chart_from_name(const std::string& name) {
    static const std::map<std::string, ChartId> table = {
        {"PHYS", ChartId::PHYS},     {"RVL", ChartId::RVL},       {"C1", ChartId::C1},
        {"C2", ChartId::C2},         {"C21", ChartId::C21},       {"C22", ChartId::C22},
        {"C23", ChartId::C23},       {"C21INF", ChartId::C21INF}, {"C22INF", ChartId::C22INF},
        {"C23INF", ChartId::C23INF},
    };
    auto it = table.find(name);
    if (it == table.end()) throw DomainError("unknown chart name: " + name);
    return it->second;
}

std::array<const char*, 3> chart_coord_names(ChartId id) {
    switch (id) {
        case ChartId::PHYS: return {"r", "rdot", "l"};
        case ChartId::RVL: return {"r", "v", "l"};
        case ChartId::C1: return {"r1", "v", "rho1"};
        case ChartId::C2: return {"rho2", "v", "l2"};
        case ChartId::C21: return {"rho2", "v1", "mu1"};
        case ChartId::C22: return {"rho2", "mu2", "l22"};
        case ChartId::C23: return {"rho2", "mu3", "l23"};
        case ChartId::C21INF: return {"nu", "v11", "mu11"};
        case ChartId::C22INF: return {"nu", "mu2", "l222"};
        case ChartId::C23INF: return {"nu", "mu3", "l233"};
    }
    return {"?", "?", "?"};
}

const DomainLimits& domain_limits() {
    static const DomainLimits lim{};
    return lim;
}

bool in_domain(ChartId id, const std::array<double, 3>& c) {
    const DomainLimits& lim = domain_limits();
    for (double x : c)
        if (!std::isfinite(x)) return false;
    switch (id) {
        case ChartId::PHYS: return c[0] > 0.0 && c[2] >= 0.0;
        case ChartId::RVL: return c[0] >= 0.0 && c[2] >= 0.0;
        case ChartId::C1: return c[0] > 0.0 && c[0] <= lim.r1_max && c[2] >= 0.0;
        case ChartId::C2: return c[0] >= 0.0 && c[2] >= 0.0 && c[2] <= lim.l2_max;
        case ChartId::C21: return c[0] >= 0.0 && c[2] >= 0.0;
        case ChartId::C22:
        case ChartId::C23: return c[0] >= 0.0 && c[1] >= 0.0 && c[2] >= 0.0 && c[2] <= lim.l22_max;
        case ChartId::C21INF: return c[0] >= 0.0 && c[0] <= lim.nu_max && c[2] >= 0.0;
        case ChartId::C22INF:
        case ChartId::C23INF:
            return c[0] >= 0.0 && c[0] <= lim.nu_max && c[1] >= 0.0 && c[2] >= 0.0 &&
                   c[2] <= lim.l22_max;
    }
    return false;
}

double radius(const ChartPoint& p) {
    const auto& c = p.c;
    switch (p.chart) {
        case ChartId::PHYS:
        case ChartId::RVL: return c[0];
        case ChartId::C1: return c[2] * c[2] * c[0];
        case ChartId::C2:
        case ChartId::C21:
        case ChartId::C22:
        case ChartId::C23: return c[0] * c[0];
        case ChartId::C21INF:
        case ChartId::C22INF:
        case ChartId::C23INF: return c[0] > 0.0 ? 1.0 / (c[0] * c[0]) : kInf;
    }
    return 0.0;
}

double angular_momentum(const ChartPoint& p) {
    const auto& c = p.c;
    switch (p.chart) {
        case ChartId::PHYS:
        case ChartId::RVL:
        case ChartId::C1: return c[2];
        case ChartId::C2:
        case ChartId::C21: return c[0] * c[2];
        case ChartId::C22:
        case ChartId::C23: return c[0] * c[1] * c[2];
        case ChartId::C21INF: return c[0] * c[0] * c[2];
        case ChartId::C22INF:
        case ChartId::C23INF: return c[0] * c[0] * c[1] * c[2];
    }
    return 0.0;
}

double v_of(const ChartPoint& p) {
    const auto& c = p.c;
    switch (p.chart) {
        case ChartId::PHYS: return c[2] * c[1];
        case ChartId::RVL:
        case ChartId::C1:
        case ChartId::C2: return c[1];
        case ChartId::C21: return c[2] * c[1];
        case ChartId::C22: return c[1];
        case ChartId::C23: return -c[1];
        case ChartId::C21INF: return c[2] * c[1];
        case ChartId::C22INF: return c[1];
        case ChartId::C23INF: return -c[1];
    }
    return 0.0;
}

PhysicalState to_physical(const ChartPoint& p) {
    const auto& c = p.c;
    PhysicalState s;
    s.theta = p.theta;
    s.t = p.t_phys;
    switch (p.chart) {
        case ChartId::PHYS:
            s.r = c[0];
            s.rdot = c[1];
            s.l = c[2];
            break;
        case ChartId::RVL:
            if (c[2] <= 0.0) domain_fail("to_physical", p, "l = 0: rdot = v/l undefined");
            s.r = c[0];
            s.l = c[2];
            s.rdot = c[1] / c[2];
            break;
        case ChartId::C1:
            if (c[2] <= 0.0) domain_fail("to_physical", p, "rho1 = 0: rdot = v/l undefined");
            s.r = c[2] * c[2] * c[0];
            s.l = c[2];
            s.rdot = c[1] / c[2];
            break;
        case ChartId::C2:
            if (c[0] <= 0.0 || c[2] <= 0.0)
                domain_fail("to_physical", p, "rho2*l2 = 0: rdot = v/l undefined");
            s.r = c[0] * c[0];
            s.l = c[0] * c[2];
            s.rdot = c[1] / (c[0] * c[2]);
            break;
        case ChartId::C21:
            if (c[0] <= 0.0) domain_fail("to_physical", p, "rho2 = 0: rdot = v1/rho2 undefined");
            s.r = c[0] * c[0];
            s.l = c[0] * c[2];
            s.rdot = c[1] / c[0];
            break;
        case ChartId::C22:
            if (c[0] <= 0.0 || c[2] <= 0.0)
                domain_fail("to_physical", p, "rho2*l22 = 0: rdot undefined");
            s.r = c[0] * c[0];
            s.l = c[0] * c[1] * c[2];
            s.rdot = 1.0 / (c[0] * c[2]);
            break;
        case ChartId::C23:
            if (c[0] <= 0.0 || c[2] <= 0.0)
                domain_fail("to_physical", p, "rho2*l23 = 0: rdot undefined");
            s.r = c[0] * c[0];
            s.l = c[0] * c[1] * c[2];
            s.rdot = -1.0 / (c[0] * c[2]);
            break;
        case ChartId::C21INF:
            if (c[0] <= 0.0) domain_fail("to_physical", p, "nu = 0: r infinite");
            s.r = 1.0 / (c[0] * c[0]);
            s.rdot = c[1] * s.r;
            s.l = c[2] * c[0] * c[0];
            break;
        case ChartId::C22INF:
            if (c[0] <= 0.0 || c[2] <= 0.0) domain_fail("to_physical", p, "nu*l222 = 0");
            s.r = 1.0 / (c[0] * c[0]);
            s.rdot = 1.0 / (c[0] * c[0] * c[2]);
            s.l = c[1] * c[0] * c[0] * c[2];
            break;
        case ChartId::C23INF:
            if (c[0] <= 0.0 || c[2] <= 0.0) domain_fail("to_physical", p, "nu*l233 = 0");
            s.r = 1.0 / (c[0] * c[0]);
            s.rdot = -1.0 / (c[0] * c[0] * c[2]);
            s.l = c[1] * c[0] * c[0] * c[2];
            break;
    }
    if (!(s.r > 0.0) || !std::isfinite(s.r)) domain_fail("to_physical", p, "r not in (0, inf)");
    return s;
}

ChartPoint from_physical(const PhysicalState& s, ChartId target) {
    if (!(s.r > 0.0)) domain_fail_phys("from_physical", s, "requires r > 0");
    if (s.l < 0.0) domain_fail_phys("from_physical", s, "requires l >= 0");
    ChartPoint p;
    p.chart = target;
    p.theta = s.theta;
    p.t_phys = s.t;
    const double sqrt_r = std::sqrt(s.r);
    const double v = s.l * s.rdot;
    switch (target) {
        case ChartId::PHYS: p.c = {s.r, s.rdot, s.l}; break;
        case ChartId::RVL: p.c = {s.r, v, s.l}; break;
        case ChartId::C1:
            if (s.l <= 0.0) domain_fail_phys("from_physical(C1)", s, "requires l > 0");
            p.c = {s.r / (s.l * s.l), v, s.l};
            break;
        case ChartId::C2: p.c = {sqrt_r, v, s.l / sqrt_r}; break;
        case ChartId::C21: p.c = {sqrt_r, sqrt_r * s.rdot, s.l / sqrt_r}; break;
        case ChartId::C22:
            if (s.rdot <= 0.0) domain_fail_phys("from_physical(C22)", s, "requires v > 0");
            p.c = {sqrt_r, v, 1.0 / (sqrt_r * s.rdot)};
            break;
        case ChartId::C23:
            if (s.rdot >= 0.0) domain_fail_phys("from_physical(C23)", s, "requires v < 0");
            p.c = {sqrt_r, -v, -1.0 / (sqrt_r * s.rdot)};
            break;
        case ChartId::C21INF: p.c = {1.0 / sqrt_r, s.rdot / s.r, s.l * s.r}; break;
        case ChartId::C22INF:
            if (s.rdot <= 0.0) domain_fail_phys("from_physical(C22INF)", s, "requires rdot > 0");
            p.c = {1.0 / sqrt_r, v, s.r / s.rdot};
            break;
        case ChartId::C23INF:
            if (s.rdot >= 0.0) domain_fail_phys("from_physical(C23INF)", s, "requires rdot < 0");
            p.c = {1.0 / sqrt_r, -v, -s.r / s.rdot};
            break;
    }
    return p;
}

namespace {

// One-step coordinate change between directly connected charts.  Formulas
// stay valid on the blowup sets where PhysicalState is undefined.
std::array<double, 3> step_coords(ChartId src, ChartId dst, const std::array<double, 3>& c,
                                  const ChartPoint& orig) {
    auto need = [&](bool ok, const char* why) {
        if (!ok) domain_fail("transition", orig, why);
    };
    using I = ChartId;
    if (src == I::RVL && dst == I::C1) {
        need(c[2] > 0.0, "RVL->C1 needs l > 0");
        return {c[0] / (c[2] * c[2]), c[1], c[2]};
    }
    if (src == I::C1 && dst == I::RVL) return {c[2] * c[2] * c[0], c[1], c[2]};
    if (src == I::RVL && dst == I::C2) {
        need(c[0] > 0.0, "RVL->C2 needs r > 0");
        const double rho2 = std::sqrt(c[0]);
        return {rho2, c[1], c[2] / rho2};
    }
    if (src == I::C2 && dst == I::RVL) return {c[0] * c[0], c[1], c[0] * c[2]};
    if (src == I::C1 && dst == I::C2) {
        need(c[0] > 0.0, "C1->C2 needs r1 > 0");
        const double sq = std::sqrt(c[0]);
        return {c[2] * sq, c[1], 1.0 / sq};
    }
    if (src == I::C2 && dst == I::C1) {
        need(c[2] > 0.0, "C2->C1 needs l2 > 0");
        return {1.0 / (c[2] * c[2]), c[1], c[0] * c[2]};
    }
    if (src == I::C2 && dst == I::C21) {
        need(c[2] > 0.0, "C2->C21 needs l2 > 0");
        return {c[0], c[1] / c[2], c[2]};
    }
    if (src == I::C21 && dst == I::C2) return {c[0], c[2] * c[1], c[2]};
    if (src == I::C2 && dst == I::C22) {
        need(c[1] > 0.0, "C2->C22 needs v > 0");
        return {c[0], c[1], c[2] / c[1]};
    }
    if (src == I::C22 && dst == I::C2) return {c[0], c[1], c[1] * c[2]};
    if (src == I::C2 && dst == I::C23) {
        need(c[1] < 0.0, "C2->C23 needs v < 0");
        return {c[0], -c[1], -c[2] / c[1]};
    }
    if (src == I::C23 && dst == I::C2) return {c[0], -c[1], c[1] * c[2]};
    if (src == I::C21 && dst == I::C22) {
        need(c[1] > 0.0, "C21->C22 needs v1 > 0");
        return {c[0], c[2] * c[1], 1.0 / c[1]};
    }
    if (src == I::C22 && dst == I::C21) {
        need(c[2] > 0.0, "C22->C21 needs l22 > 0");
        return {c[0], 1.0 / c[2], c[1] * c[2]};
    }
    if (src == I::C21 && dst == I::C23) {
        need(c[1] < 0.0, "C21->C23 needs v1 < 0");
        return {c[0], -c[2] * c[1], -1.0 / c[1]};
    }
    if (src == I::C23 && dst == I::C21) {
        need(c[2] > 0.0, "C23->C21 needs l23 > 0");
        return {c[0], -1.0 / c[2], c[1] * c[2]};
    }
    if (src == I::C21 && dst == I::C21INF) {
        need(c[0] > 0.0, "C21->C21INF needs rho2 > 0");
        const double r3 = c[0] * c[0] * c[0];
        return {1.0 / c[0], c[1] / r3, c[2] * r3};
    }
    if (src == I::C21INF && dst == I::C21) {
        need(c[0] > 0.0, "C21INF->C21 needs nu > 0");
        const double nu3 = c[0] * c[0] * c[0];
        return {1.0 / c[0], c[1] / nu3, nu3 * c[2]};
    }
    if (src == I::C22 && dst == I::C22INF) {
        need(c[0] > 0.0, "C22->C22INF needs rho2 > 0");
        return {1.0 / c[0], c[1], c[2] * c[0] * c[0] * c[0]};
    }
    if (src == I::C22INF && dst == I::C22) {
        need(c[0] > 0.0, "C22INF->C22 needs nu > 0");
        return {1.0 / c[0], c[1], c[0] * c[0] * c[0] * c[2]};
    }
    if (src == I::C23 && dst == I::C23INF) {
        need(c[0] > 0.0, "C23->C23INF needs rho2 > 0");
        return {1.0 / c[0], c[1], c[2] * c[0] * c[0] * c[0]};
    }
    if (src == I::C23INF && dst == I::C23) {
        need(c[0] > 0.0, "C23INF->C23 needs nu > 0");
        return {1.0 / c[0], c[1], c[0] * c[0] * c[0] * c[2]};
    }
    if (src == I::C21INF && dst == I::C22INF) {
        need(c[1] > 0.0, "C21INF->C22INF needs v11 > 0");
        return {c[0], c[2] * c[1], 1.0 / c[1]};
    }
    if (src == I::C22INF && dst == I::C21INF) {
        need(c[2] > 0.0, "C22INF->C21INF needs l222 > 0");
        return {c[0], 1.0 / c[2], c[1] * c[2]};
    }
    if (src == I::C21INF && dst == I::C23INF) {
        need(c[1] < 0.0, "C21INF->C23INF needs v11 < 0");
        return {c[0], -c[2] * c[1], -1.0 / c[1]};
    }
    if (src == I::C23INF && dst == I::C21INF) {
        need(c[2] > 0.0, "C23INF->C21INF needs l233 > 0");
        return {c[0], -1.0 / c[2], c[1] * c[2]};
    }
    domain_fail("transition", orig, "charts not directly connected");
}

const std::vector<ChartId>& adjacency(ChartId id) {
    using I = ChartId;
    static const std::map<ChartId, std::vector<ChartId>> adj = {
        {I::RVL, {I::C1, I::C2}},
        {I::C1, {I::RVL, I::C2}},
        {I::C2, {I::RVL, I::C1, I::C21, I::C22, I::C23}},
        {I::C21, {I::C2, I::C22, I::C23, I::C21INF}},
        {I::C22, {I::C2, I::C21, I::C22INF}},
        {I::C23, {I::C2, I::C21, I::C23INF}},
        {I::C21INF, {I::C21, I::C22INF, I::C23INF}},
        {I::C22INF, {I::C22, I::C21INF}},
        {I::C23INF, {I::C23, I::C21INF}},
        {I::PHYS, {}},
    };
    return adj.at(id);
}

// Shortest chart path, trying each one-step hop; the hop itself may still
// reject a point outside the pairwise overlap.
std::vector<ChartId> route(ChartId src, ChartId dst) {
    std::map<ChartId, ChartId> parent;
    std::queue<ChartId> q;
    q.push(src);
    parent[src] = src;
    while (!q.empty()) {
        ChartId u = q.front();
        q.pop();
        if (u == dst) break;
        for (ChartId w : adjacency(u)) {
            if (!parent.count(w)) {
                parent[w] = u;
                q.push(w);
            }
        }
    }
    if (!parent.count(dst)) return {};
    std::vector<ChartId> path{dst};
    while (path.back() != src) path.push_back(parent[path.back()]);
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

std::vector<ChartId> adjacent_charts(ChartId id) { return adjacency(id); }

ChartPoint transition(const ChartPoint& p, ChartId target) {
    if (p.chart == target) return p;
    // PHYS has no blowup-set states, so the physical detour is exact there.
    if (p.chart == ChartId::PHYS) return from_physical(to_physical(p), target);
    if (target == ChartId::PHYS) {
        PhysicalState s = to_physical(p);
        return from_physical(s, ChartId::PHYS);
    }
    auto path = route(p.chart, target);
    if (path.empty()) domain_fail("transition", p, "no route to target chart");
    ChartPoint out = p;
    for (size_t i = 1; i < path.size(); ++i) {
        out.c = step_coords(out.chart, path[i], out.c, p);
        out.chart = path[i];
    }
    return out;
}

}  // namespace kepler
