#include "keplerdrag/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace kepler {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

double rdot_of(const ChartPoint& p) {
    const auto& c = p.c;
    switch (p.chart) {
        case ChartId::PHYS: return c[1];
        case ChartId::RVL: return c[2] > 0.0 ? c[1] / c[2] : kNaN;
        case ChartId::C1: return c[2] > 0.0 ? c[1] / c[2] : kNaN;
        case ChartId::C2: return c[0] * c[2] > 0.0 ? c[1] / (c[0] * c[2]) : kNaN;
        case ChartId::C21: return c[0] > 0.0 ? c[1] / c[0] : kNaN;
        case ChartId::C22: return c[0] * c[2] > 0.0 ? 1.0 / (c[0] * c[2]) : kNaN;
        case ChartId::C23: return c[0] * c[2] > 0.0 ? -1.0 / (c[0] * c[2]) : kNaN;
        case ChartId::C21INF: return c[0] > 0.0 ? c[1] / (c[0] * c[0]) : kNaN;
        case ChartId::C22INF:
            return c[0] * c[0] * c[2] > 0.0 ? 1.0 / (c[0] * c[0] * c[2]) : kNaN;
        case ChartId::C23INF:
            return c[0] * c[0] * c[2] > 0.0 ? -1.0 / (c[0] * c[0] * c[2]) : kNaN;
    }
    return kNaN;
}

double h1_corrected(const ChartPoint& pt, const Params& p) {
    const double r = radius(pt);
    const double l = angular_momentum(pt);
    const double v = v_of(pt);
    if (!(l > 0.0) || !(r > 0.0) || !std::isfinite(r)) return kNaN;
    const double r1 = r / (l * l);
    const double x = l * l * l;
    const double H = 0.5 * v * v + (r1 - 1.0) * (r1 - 1.0) / (2.0 * r1 * r1);
    // The corrector runs through r1 x = r l; apply it only in the bounded
    // oscillatory regime, where it cancels the O(l^3) phase wobble of raw H.
    // Coasting states (huge r1) keep raw H: there the quadratic term would
    // swamp the E l^2 deviation the estimate is after.
    if (!(r * l < 0.01 && r1 < 100.0)) return H;
    return H + 2.0 * p.delta * r1 * v * x + 3.0 * p.delta * p.delta * r1 * r1 * x * x;
}

// --- strict config parsing ---------------------------------------------------

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

double get_num(const json& j, const std::string& where, const char* key, double def, double lo,
               double hi) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_number())
        throw ConfigError(std::string(key) + " in " + where + " must be a number");
    const double v = j.at(key).get<double>();
    if (!(v >= lo && v <= hi)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s in %s out of range [%g, %g]: %g", key, where.c_str(),
                      lo, hi, v);
        throw ConfigError(buf);
    }
    return v;
}

long get_int(const json& j, const std::string& where, const char* key, long def, long lo,
             long hi) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_number_integer())
        throw ConfigError(std::string(key) + " in " + where + " must be an integer");
    const long v = j.at(key).get<long>();
    if (v < lo || v > hi) throw ConfigError(std::string(key) + " in " + where + " out of range");
    return v;
}

std::array<double, 2> get_pair(const json& j, const std::string& where, const char* key,
                               std::array<double, 2> def) {
    if (!j.contains(key)) return def;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ConfigError(std::string(key) + " in " + where + " must be [number, number]");
    return {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");
    expect_keys(j, "config",
                {"schema_version", "mode", "delta", "seed", "tolerances", "initial_conditions",
                 "terminal", "hinf", "outputs", "classify", "portrait", "series", "manifold",
                 "verify"});
    ScenarioConfig cfg;
    cfg.schema_version = int(get_int(j, "config", "schema_version", 1, 1, 1));
    if (!j.contains("mode") || !j.at("mode").is_string())
        throw ConfigError("config requires a string \"mode\"");
    cfg.mode = j.at("mode").get<std::string>();
    const char* modes[] = {"simulate", "portrait", "series", "manifold", "verify"};
    if (std::find_if(std::begin(modes), std::end(modes),
                     [&](const char* m) { return cfg.mode == m; }) == std::end(modes))
        throw ConfigError("mode must be one of simulate|portrait|series|manifold|verify");
    cfg.delta = get_num(j, "config", "delta", 1.0, 0.0, 100.0);
    cfg.seed = static_cast<unsigned long long>(get_int(j, "config", "seed", 0, 0, (1L << 62)));

    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        expect_keys(t, "tolerances", {"rtol", "atol", "max_steps", "tau_budget"});
        cfg.rtol = get_num(t, "tolerances", "rtol", cfg.rtol, 1e-15, 1e-2);
        cfg.atol = get_num(t, "tolerances", "atol", cfg.atol, 1e-15, 1e-2);
        cfg.max_steps = get_int(t, "tolerances", "max_steps", cfg.max_steps, 1000, 100000000000L);
        cfg.tau_budget = get_num(t, "tolerances", "tau_budget", cfg.tau_budget, 1.0, 1e15);
    }
    if (j.contains("initial_conditions")) {
        const auto& ic = j.at("initial_conditions");
        expect_keys(ic, "initial_conditions", {"explicit", "level_set"});
        if (ic.contains("explicit")) {
            for (const auto& e : ic.at("explicit")) {
                expect_keys(e, "initial_conditions.explicit[]", {"chart", "c", "theta", "t"});
                if (!e.contains("chart") || !e.contains("c"))
                    throw ConfigError("explicit initial condition needs chart and c");
                ChartPoint pnt;
                pnt.chart = chart_from_name(e.at("chart").get<std::string>());
                const auto& c = e.at("c");
                if (!c.is_array() || c.size() != 3)
                    throw ConfigError("initial condition c must have 3 entries");
                for (size_t i = 0; i < 3; ++i) pnt.c[i] = c[i].get<double>();
                pnt.theta = get_num(e, "initial_conditions.explicit[]", "theta", 0.0, -1e9, 1e9);
                pnt.t_phys = get_num(e, "initial_conditions.explicit[]", "t", 0.0, -1e12, 1e12);
                if (!in_domain(pnt.chart, pnt.c))
                    throw ConfigError("explicit initial condition off the chart domain");
                cfg.explicit_ics.push_back(pnt);
            }
        }
        if (ic.contains("level_set")) {
            const auto& ls = ic.at("level_set");
            expect_keys(ls, "level_set", {"h2", "count", "rho2_range", "l_scale"});
            LevelSetSampler s;
            s.h2 = get_num(ls, "level_set", "h2", s.h2, 1e-6, 4.5);
            s.count = int(get_int(ls, "level_set", "count", s.count, 1, 100000));
            s.rho2_range = get_pair(ls, "level_set", "rho2_range", s.rho2_range);
            if (!(s.rho2_range[0] > 0.0 && s.rho2_range[0] < s.rho2_range[1]))
                throw ConfigError("rho2_range must satisfy 0 < lo < hi");
            s.l_scale = get_num(ls, "level_set", "l_scale", 1.0, 1e-6, 1.0);
            cfg.level_set = s;
        }
    }
    if (j.contains("terminal")) {
        const auto& t = j.at("terminal");
        expect_keys(t, "terminal", {"l"});
        cfg.l_terminal = get_num(t, "terminal", "l", cfg.l_terminal, 1e-12, 1.0);
    }
    if (j.contains("hinf")) {
        const auto& t = j.at("hinf");
        expect_keys(t, "hinf", {"cutoffs"});
        cfg.hinf_cutoffs = get_pair(t, "hinf", "cutoffs", cfg.hinf_cutoffs);
        if (!(cfg.hinf_cutoffs[0] > cfg.hinf_cutoffs[1] && cfg.hinf_cutoffs[1] > 0.0))
            throw ConfigError("hinf.cutoffs must be decreasing and positive");
    }
    if (j.contains("outputs")) {
        const auto& o = j.at("outputs");
        expect_keys(o, "outputs", {"trajectories", "sample_stride"});
        if (o.contains("trajectories")) cfg.write_trajectories = o.at("trajectories").get<bool>();
        cfg.sample_stride = int(get_int(o, "outputs", "sample_stride", 1, 1, 1000000));
    }
    if (j.contains("classify")) {
        const auto& c = j.at("classify");
        expect_keys(c, "classify",
                    {"nu_band", "wc_factor", "peri_l2_enter", "peri_l2_exit", "osc_r_ratio"});
        cfg.classify.nu_band = get_num(c, "classify", "nu_band", 1.0, 0.01, 2.0);
        cfg.classify.wc_factor = get_num(c, "classify", "wc_factor", 3.0, 1.1, 100.0);
        cfg.classify.peri_l2_enter = get_num(c, "classify", "peri_l2_enter", 0.8, 0.1, 1.4);
        cfg.classify.peri_l2_exit = get_num(c, "classify", "peri_l2_exit", 0.4, 0.01, 1.0);
        cfg.classify.osc_r_ratio = get_num(c, "classify", "osc_r_ratio", 5.0, 1.0, 1e6);
    }
    if (j.contains("portrait")) {
        const auto& pj = j.at("portrait");
        expect_keys(pj, "portrait", {"h_list", "points"});
        if (pj.contains("h_list"))
            for (const auto& h : pj.at("h_list")) cfg.h_list.push_back(h.get<double>());
        cfg.portrait_points = int(get_int(pj, "portrait", "points", 400, 8, 100000));
    }
    if (j.contains("series")) {
        const auto& sj = j.at("series");
        expect_keys(sj, "series", {"N"});
        cfg.series_N = int(get_int(sj, "series", "N", 40, 1, 200));
    }
    if (j.contains("manifold")) {
        const auto& mj = j.at("manifold");
        expect_keys(mj, "manifold", {"l_values", "fiber", "center_fit"});
        if (mj.contains("l_values")) {
            cfg.manifold_l.clear();
            for (const auto& l : mj.at("l_values")) {
                const double lv = l.get<double>();
                if (!(lv >= 0.0 && lv <= 1.0)) throw ConfigError("manifold l_values in [0, 1]");
                cfg.manifold_l.push_back(lv);
            }
        }
        if (mj.contains("fiber")) {
            const auto& fj = mj.at("fiber");
            expect_keys(fj, "manifold.fiber", {"h_list", "phi_count", "l0", "l_cut"});
            if (fj.contains("h_list"))
                for (const auto& h : fj.at("h_list")) cfg.fiber_h.push_back(h.get<double>());
            cfg.fiber_phi_count = int(get_int(fj, "manifold.fiber", "phi_count", 8, 1, 1024));
            cfg.fiber_l0 = get_num(fj, "manifold.fiber", "l0", 0.1, 0.0, 0.3);
            cfg.fiber_l_cut = get_num(fj, "manifold.fiber", "l_cut", 0.04, 1e-4, 0.2);
        }
        if (mj.contains("center_fit")) {
            const auto& cj = mj.at("center_fit");
            expect_keys(cj, "manifold.center_fit", {"enabled", "nu_range"});
            cfg.do_center_fit = cj.contains("enabled") ? cj.at("enabled").get<bool>() : true;
            cfg.center_nu_range = get_pair(cj, "center_fit", "nu_range", cfg.center_nu_range);
        }
    }
    if (j.contains("verify")) {
        const auto& vj = j.at("verify");
        expect_keys(vj, "verify", {"inject_fault"});
        if (vj.contains("inject_fault")) cfg.inject_fault = vj.at("inject_fault").get<bool>();
    }
    return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::vector<ChartPoint> scenario_initial_conditions(const ScenarioConfig& cfg) {
    std::vector<ChartPoint> ics = cfg.explicit_ics;
    if (cfg.level_set) {
        const LevelSetSampler& s = *cfg.level_set;
        // H2(l2, 0) = 1/2 - l2^2 + l2^4/2 = h2 has the always-present root
        // l2^2 = 1 + sqrt(2 h2); rho2 runs over midpoints of the open range.
        const double l20 = std::sqrt(1.0 + std::sqrt(2.0 * s.h2));
        for (int i = 0; i < s.count; ++i) {
            const double rho2 =
                s.l_scale * (s.rho2_range[0] + (i + 0.5) * (s.rho2_range[1] - s.rho2_range[0]) /
                                                   double(s.count));
            ChartPoint p;
            p.chart = ChartId::C2;
            p.c = {rho2, 0.0, l20};
            ics.push_back(p);
        }
    }
    return ics;
}

Itinerary classify_itinerary(const Trajectory& tr, const Params& p, const ClassifyConfig& cfg) {
    Itinerary it;
    const size_t n = tr.samples.size();
    if (n < 8) return it;
    std::vector<double> r(n), l2(n);
    for (size_t i = 0; i < n; ++i) {
        r[i] = radius(tr.samples[i]);
        const double l = angular_momentum(tr.samples[i]);
        l2[i] = std::isfinite(r[i]) && r[i] > 0.0 ? l / std::sqrt(r[i]) : 0.0;
        if (!std::isfinite(r[i])) r[i] = std::numeric_limits<double>::max();
    }
    // Capture apex: the global radius maximum.
    size_t apex = 0;
    for (size_t i = 1; i < n; ++i)
        if (r[i] > r[apex]) apex = i;
    it.r_apex = r[apex];
    it.t_apex = tr.samples[apex].t_phys;

    const double far_r = 1.0 / (cfg.nu_band * cfg.nu_band);
    const bool reaches_far = r[apex] >= far_r;

    // Monotone climb into the apex, traced back to a fifth of the apex radius.
    bool monotone = true;
    {
        double hi = r[apex];
        for (size_t i = apex; i-- > 0;) {
            if (r[i] > hi * (1.0 + 1e-9)) {
                monotone = false;
                break;
            }
            hi = std::min(hi, r[i]);
            if (r[i] <= 0.2 * r[apex]) break;
        }
    }

    // The infall leg after the apex should ride the center-manifold band:
    // v11 = rdot/r within a factor of -nu^6/delta.  Judged on the half-decade
    // of radius below the apex, where the graph approximation is meaningful.
    std::vector<double> ratios;
    for (size_t i = apex; i < n; ++i) {
        if (r[i] == std::numeric_limits<double>::max()) continue;
        if (r[i] < 0.45 * it.r_apex) break;  // infall leg over
        const double rdot = rdot_of(tr.samples[i]);
        if (!(rdot < 0.0)) continue;
        const double nu6 = std::pow(r[i], -3.0);
        ratios.push_back((rdot / r[i]) / (-nu6 / p.delta));
    }
    if (!ratios.empty()) {
        std::nth_element(ratios.begin(), ratios.begin() + ptrdiff_t(ratios.size() / 2),
                         ratios.end());
        it.wc_ratio_median = ratios[ratios.size() / 2];
    }
    const bool on_band = !ratios.empty() && it.wc_ratio_median >= 1.0 / cfg.wc_factor &&
                         it.wc_ratio_median <= cfg.wc_factor;
    it.capture_phase = reaches_far && monotone && on_band;

    // Ejection-collision swings after the apex: far excursions bounded by
    // deep periapsis passes, detected as l2 = l/sqrt(r) spiking to the
    // blowup scale with hysteresis.
    bool in_peri = false;
    bool have_prev_peri = false;
    double r_peri_entry = 0.0, r_seg_max = 0.0;
    for (size_t i = apex; i < n; ++i) {
        if (!in_peri && l2[i] >= cfg.peri_l2_enter) {
            in_peri = true;
            if (have_prev_peri && r_seg_max >= cfg.osc_r_ratio * r_peri_entry)
                ++it.ejection_collision_oscillations;
            have_prev_peri = true;
            r_peri_entry = r[i];
            r_seg_max = 0.0;
        } else if (in_peri && l2[i] <= cfg.peri_l2_exit) {
            in_peri = false;
        }
        if (!in_peri && have_prev_peri && r[i] != std::numeric_limits<double>::max())
            r_seg_max = std::max(r_seg_max, r[i]);
    }
    return it;
}

namespace {

void write_trajectory_csv(const Trajectory& tr, const Params& p, const std::string& path) {
    std::ofstream os(path);
    os << "tau,t_phys,chart,c1,c2,c3,r,rdot,l,theta,E,H_or_H2,ecc_norm\n";
    for (size_t i = 0; i < tr.samples.size(); ++i) {
        const ChartPoint& s = tr.samples[i];
        const Invariants q = invariants_at(s, p);
        const double h2 = q.H2;
        const double ecc = h2 >= 0.0 ? std::sqrt(2.0 * h2) : kNaN;
        os << fmt(tr.taus[i]) << ',' << fmt(s.t_phys) << ',' << chart_name(s.chart) << ','
           << fmt(s.c[0]) << ',' << fmt(s.c[1]) << ',' << fmt(s.c[2]) << ',' << fmt(radius(s))
           << ',' << fmt(rdot_of(s)) << ',' << fmt(angular_momentum(s)) << ',' << fmt(s.theta)
           << ',' << fmt(q.E) << ',' << fmt(h2) << ',' << fmt(ecc) << '\n';
    }
}

OrbitResult simulate_one(int index, const ChartPoint& ic, const ScenarioConfig& cfg,
                         const std::string& out_dir) {
    OrbitResult res;
    res.index = index;
    res.ic = ic;
    const Params p{cfg.delta};
    IntegratorControls ctl;
    ctl.rtol = cfg.rtol;
    ctl.atol = cfg.atol;
    ctl.max_steps = cfg.max_steps;
    ctl.sample_stride = cfg.sample_stride;

    const double l0 = angular_momentum(ic);
    const double cut_a = cfg.hinf_cutoffs[0];
    const double cut_b = cfg.hinf_cutoffs[1];
    std::vector<Event> evs;
    if (cut_a < l0) evs.push_back(l_below_event(cut_a, false, "hinf_cut_a"));
    const double cut_mid = std::sqrt(cut_a * cut_b);
    if (cut_mid < l0 && cut_mid > cfg.l_terminal)
        evs.push_back(l_below_event(cut_mid, false, "hinf_cut_mid"));
    if (cut_b > cfg.l_terminal * (1.0 + 1e-12) && cut_b < l0)
        evs.push_back(l_below_event(cut_b, false, "hinf_cut_b"));
    evs.push_back(l_below_event(cfg.l_terminal, true, "l_terminal"));

    Trajectory tr;
    try {
        tr = integrate(ic, p, ctl, evs, cfg.tau_budget);
    } catch (const std::exception& e) {
        res.exit_status = "exception";
        res.message = e.what();
        return res;
    }
    res.exit_status = status_name(tr.status);
    res.message = tr.message;
    res.completed = tr.status == IntegrationStatus::TerminalEvent;
    res.n_steps = tr.n_accepted;
    res.t_final = tr.last().t_phys;
    res.theta_final = tr.last().theta;
    res.l_final = angular_momentum(tr.last());

    // Forward H limit from the recorded cutoff passages; the terminal state
    // doubles as the lower cutoff when the two coincide.
    double Ha = kNaN, Hm = kNaN, Hb = kNaN;
    for (const auto& ev : tr.events) {
        if (ev.name == "hinf_cut_a") Ha = h1_corrected(ev.state, p);
        if (ev.name == "hinf_cut_mid") Hm = h1_corrected(ev.state, p);
        if (ev.name == "hinf_cut_b") Hb = h1_corrected(ev.state, p);
    }
    double cut_b_eff = cut_b;
    if (std::isnan(Hb) && res.completed) {
        Hb = h1_corrected(tr.last(), p);
        cut_b_eff = res.l_final;
    }
    res.hinf_cuts = {cut_a, cut_b_eff};
    res.h_at_cuts = {Ha, Hb};
    if (std::isfinite(Ha) && std::isfinite(Hb) && cut_b_eff > 0.0) {
        const double ratio = cut_a / cut_b_eff;
        const double r3 = ratio * ratio * ratio;
        res.hinf_value = (r3 * Hb - Ha) / (r3 - 1.0);
        res.hinf_error = std::abs(Ha - Hb) + 1e-10 + 1e-12 * std::sqrt(double(res.n_steps));
        if (std::isfinite(Hm)) {
            const double d1 = Ha - Hm, d2 = Hm - Hb;
            res.drift_rate = (std::abs(d1) > 1e-14 && std::abs(d2) > 1e-14 && d1 * d2 > 0.0)
                                 ? std::log(d1 / d2) / std::log(std::sqrt(ratio))
                                 : kNaN;
        } else {
            res.drift_rate = kNaN;
        }
    } else {
        res.hinf_value = std::isfinite(Hb) ? Hb : kNaN;
        res.hinf_error = kNaN;
        res.drift_rate = kNaN;
    }

    res.itinerary = classify_itinerary(tr, p, cfg.classify);

    if (cfg.write_trajectories) {
        char name[64];
        std::snprintf(name, sizeof name, "orbit_%03d.csv", index);
        res.trajectory_file = name;
        write_trajectory_csv(tr, p, (fs::path(out_dir) / name).string());
    }
    return res;
}

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    if (const char* env = std::getenv("KEPLERDRAG_JOBS")) {
        const int j = std::atoi(env);
        if (j > 0) return j;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? int(hc) : 1;
}

}  // namespace

RunSummary run_simulate(const ScenarioConfig& cfg, const std::string& out_dir, int jobs) {
    const auto ics = scenario_initial_conditions(cfg);
    if (ics.empty()) throw ConfigError("no initial conditions");
    fs::create_directories(out_dir);

    RunSummary sum;
    sum.config = cfg;
    sum.orbits.resize(ics.size());

    const int nthreads = int(std::min<size_t>(size_t(resolve_jobs(jobs)), ics.size()));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= ics.size()) return;
            sum.orbits[i] = simulate_one(int(i), ics[i], cfg, out_dir);
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& o : sum.orbits)
        if (!o.completed) ++sum.n_failed;

    std::ofstream js(fs::path(out_dir) / "summary.json");
    js << summary_to_json(sum) << "\n";
    return sum;
}

void run_portrait(const ScenarioConfig& cfg, const std::string& out_dir) {
    for (double h : cfg.h_list)
        if (!(h >= 0.0 && h <= 1.0))
            throw DomainError("portrait: level " + std::to_string(h) + " outside [0, 1]");
    fs::create_directories(out_dir);
    std::ofstream r1v(fs::path(out_dir) / "portrait_r1v.csv");
    std::ofstream l2v(fs::path(out_dir) / "portrait_l2v.csv");
    r1v << "h,branch,r1,v\n";
    l2v << "h,branch,l2,v\n";
    const int n = cfg.portrait_points;
    auto vof = [](double h, double r1) {
        const double s = 2.0 * h - (r1 - 1.0) * (r1 - 1.0) / (r1 * r1);
        return std::sqrt(std::max(0.0, s));
    };
    auto vof2 = [](double h, double l2) {
        const double s = 2.0 * h - 1.0 + 2.0 * l2 * l2 - l2 * l2 * l2 * l2;
        return std::sqrt(std::max(0.0, s));
    };
    for (double h : cfg.h_list) {
        if (h == 0.0) {
            r1v << fmt(h) << ",point," << fmt(1.0) << ',' << fmt(0.0) << '\n';
            l2v << fmt(h) << ",point," << fmt(1.0) << ',' << fmt(0.0) << '\n';
            continue;
        }
        const double s = std::sqrt(2.0 * h);
        const double ra = 1.0 / (1.0 + s);
        const double rb = h < 0.5 ? 1.0 / (1.0 - s) : 20.0;
        for (const char* branch : {"upper", "lower"}) {
            const double sign = branch[0] == 'u' ? 1.0 : -1.0;
            for (int i = 0; i < n; ++i) {
                const double u = std::sin(0.5 * M_PI * double(i) / double(n - 1));
                const double r1 = ra + (rb - ra) * u * u;
                r1v << fmt(h) << ',' << branch << ',' << fmt(r1) << ','
                    << fmt(sign * vof(h, r1)) << '\n';
            }
        }
        const double l2b = std::sqrt(1.0 + s);
        const double l2a = h < 0.5 ? std::sqrt(1.0 - s) : 0.0;
        for (const char* branch : {"upper", "lower"}) {
            const double sign = branch[0] == 'u' ? 1.0 : -1.0;
            for (int i = 0; i < n; ++i) {
                const double u = std::sin(0.5 * M_PI * double(i) / double(n - 1));
                const double l2 = l2a + (l2b - l2a) * u * u;
                l2v << fmt(h) << ',' << branch << ',' << fmt(l2) << ','
                    << fmt(sign * vof2(h, l2)) << '\n';
            }
        }
    }
}

void run_series(const ScenarioConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Params p{cfg.delta};
    auto sc = compute_coefficients(p, cfg.series_N);
    if (cfg.series_N >= 10) gevrey_fit(sc);
    std::ofstream cs(fs::path(out_dir) / "coefficients.csv");
    write_coefficients_csv(sc, cs);
    json j;
    j["schema_version"] = 1;
    j["delta"] = cfg.delta;
    j["N"] = sc.N;
    j["exact_order"] = sc.exact_order;
    j["gevrey_a"] = sc.gevrey_a;
    j["gevrey_b"] = sc.gevrey_b;
    j["gevrey_r2"] = sc.gevrey_r2;
    std::ofstream js(fs::path(out_dir) / "series_summary.json");
    js << j.dump(1) << "\n";
}

void run_manifold(const ScenarioConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Params p{cfg.delta};
    auto sc = compute_coefficients(p, cfg.series_N);

    std::ofstream mp(fs::path(out_dir) / "manifold_points.csv");
    mp << "l,x,r1_truncated,v_truncated,n_opt,est_error_truncated,r1_bpl,v_bpl,est_error_bpl,"
          "advisory,bpl_fell_back\n";
    for (double l : cfg.manifold_l) {
        auto to = evaluate_manifold(sc, l, SummationMode::TruncatedOptimal);
        auto bp = evaluate_manifold(sc, l, SummationMode::BorelPadeLaplace);
        mp << fmt(l) << ',' << fmt(l * l * l) << ',' << fmt(to.r1) << ',' << fmt(to.v) << ','
           << to.n_opt << ',' << fmt(to.est_error) << ',' << fmt(bp.r1) << ',' << fmt(bp.v) << ','
           << fmt(bp.est_error) << ',' << (to.advisory ? 1 : 0) << ','
           << (bp.mode_used != SummationMode::BorelPadeLaplace ? 1 : 0) << '\n';
    }

    if (!cfg.fiber_h.empty() && cfg.fiber_phi_count > 0) {
        std::ofstream fb(fs::path(out_dir) / "fibers.csv");
        fb << "h,phi,l0,s,r1,v,residual,iterations\n";
        for (double h : cfg.fiber_h) {
            for (int k = 0; k < cfg.fiber_phi_count; ++k) {
                const double phi = 2.0 * M_PI * double(k) / double(cfg.fiber_phi_count);
                auto fp = stable_fiber(h, phi, cfg.fiber_l0, p, cfg.fiber_l_cut);
                fb << fmt(h) << ',' << fmt(phi) << ',' << fmt(cfg.fiber_l0) << ',' << fmt(fp.s)
                   << ',' << fmt(fp.r1) << ',' << fmt(fp.v) << ',' << fmt(fp.residual) << ','
                   << fp.iterations << '\n';
            }
        }
    }

    if (cfg.do_center_fit) {
        auto fit = center_manifold_fit(p, cfg.center_nu_range[0], cfg.center_nu_range[1]);
        json j;
        j["schema_version"] = 1;
        j["delta"] = cfg.delta;
        j["c"] = fit.c;
        j["c2"] = fit.c2;
        j["residual"] = fit.residual;
        j["nu_range"] = {cfg.center_nu_range[0], cfg.center_nu_range[1]};
        std::ofstream js(fs::path(out_dir) / "center_fit.json");
        js << j.dump(1) << "\n";
    }
}

VerifyReport run_verify(const Params& p, bool inject_fault) {
    VerifyReport rep;
    auto add = [&](const std::string& name, double residual, double threshold,
                   const std::string& detail = "") {
        VerifyCheck c;
        c.name = name;
        c.residual = residual;
        c.threshold = threshold;
        c.pass = residual < threshold;
        c.detail = detail;
        rep.checks.push_back(c);
    };

    {
        std::mt19937_64 rng(20260809);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            PhysicalState s;
            s.r = 0.05 + 4.0 * u(rng);
            s.rdot = -2.0 + 4.0 * u(rng);
            s.l = 0.01 + 1.5 * u(rng);
            s.theta = -6.0 + 12.0 * u(rng);
            auto q = invariants(s, p);
            const double e2 = q.ecc[0] * q.ecc[0] + q.ecc[1] * q.ecc[1];
            worst = std::max(worst, std::abs(q.H - 0.5 * e2) / (1.0 + q.H));
        }
        add("H_vs_eccentricity", worst, 1e-12);
    }
    {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            const double r1 = 0.2 + 3.0 * u(rng);
            const double v = -1.0 + 2.0 * u(rng);
            const double x = 0.001 + 0.5 * u(rng);
            auto ld = lie_derivative_H1(r1, v, x, p);
            double closed = ld.closed_form;
            if (inject_fault) closed = -closed;  // negative control
            worst = std::max(worst, std::abs(ld.numeric - closed) / (1.0 + std::abs(closed)));
        }
        add("H1_drift_identity", worst, 1e-10, inject_fault ? "fault injected" : "");
    }
    {
        IntegratorControls ctl;
        PhysicalState s;
        s.r = 1.0;
        s.rdot = 0.0;
        s.l = 0.5;
        auto tr = integrate_physical(s, p, ctl, {}, 1.0);
        const double want = 0.5 * std::exp(-p.delta);
        add("l_exponential_decay", std::abs(tr.last().c[2] - want), 1e-10);
    }
    {
        double worst = 0.0;
        auto c1 = equilibria(ChartId::C1, p);
        const std::array<std::complex<double>, 3> want{{{0, -1}, {0, 0}, {0, 1}}};
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst, std::abs(c1[0].eigenvalues[size_t(i)] - want[size_t(i)]));
        auto c21 = equilibria(ChartId::C21, p);
        worst = std::max(worst, std::abs(c21[0].coords[1] - std::sqrt(2.0)));
        worst = std::max(worst, std::abs(c21[1].coords[1] + std::sqrt(2.0)));
        auto inf = equilibria(ChartId::C21INF, p);
        worst = std::max(worst, std::abs(inf[0].inplane[0] + p.delta));
        worst = std::max(worst, std::abs(inf[0].inplane[1] + p.delta));
        worst = std::max(worst, std::abs(inf[1].inplane[0] - p.delta));
        worst = std::max(worst, std::abs(inf[1].inplane[1] + 2.0 * p.delta));
        add("equilibrium_spectra", worst, 1e-8);
    }
    {
        double worst = 0.0;
        for (double h : {0.05, 0.125, 0.3, 0.45}) {
            auto orb = gamma1(h);
            IntegratorControls ctl;
            ctl.chart_switching = false;
            ChartPoint start;
            start.chart = ChartId::C1;
            start.c = {orb.r1_minus, 0.0, 0.0};
            auto tr = integrate(start, Params{1.0}, ctl, {v_section_event(0, false)},
                                1.1 * orb.period + 5.0);
            worst = std::max(worst, std::abs(tr.events[0].state.c[0] - orb.r1_plus));
            worst = std::max(worst, std::abs(tr.events[1].state.c[0] - orb.r1_minus));
        }
        add("turning_points", worst, 1e-8);
    }
    {
        auto orb = gamma1(1e-4);
        add("period_harmonic_limit", std::abs(orb.period - 2.0 * M_PI), 1e-2);
    }
    {
        auto sc = compute_coefficients(p, 2);
        const Rational dr(p.delta);
        const bool ok = sc.Y_exact[0][0] == Rational(-2) * dr * dr && sc.Y_exact[0][1] == 0 &&
                        sc.Y_exact[1][0] == 0 && sc.Y_exact[1][1] == Rational(16) * dr * dr * dr;
        add("series_leading_coefficients", ok ? 0.0 : 1.0, 0.5);
    }
    {
        auto sc = compute_coefficients(p, 40);
        bool ok = true;
        for (int n = 1; n <= 40; ++n)
            ok = ok && sc.Y_exact[size_t(n - 1)][n % 2 == 1 ? 1 : 0] == 0;
        add("series_parity", ok ? 0.0 : 1.0, 0.5);
    }
    rep.all_pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                               [](const VerifyCheck& c) { return c.pass; });
    return rep;
}

std::string summary_to_json(const RunSummary& sum) {
    json j;
    j["schema_version"] = 1;
    j["mode"] = sum.config.mode;
    j["delta"] = sum.config.delta;
    j["seed"] = sum.config.seed;
    j["n_orbits"] = sum.orbits.size();
    j["n_failed"] = sum.n_failed;
    j["l_terminal"] = sum.config.l_terminal;
    j["hinf_cutoffs"] = {sum.config.hinf_cutoffs[0], sum.config.hinf_cutoffs[1]};
    j["classifier"] = {{"nu_band", sum.config.classify.nu_band},
                       {"wc_factor", sum.config.classify.wc_factor},
                       {"peri_l2_enter", sum.config.classify.peri_l2_enter},
                       {"peri_l2_exit", sum.config.classify.peri_l2_exit},
                       {"osc_r_ratio", sum.config.classify.osc_r_ratio}};
    json orbits = json::array();
    for (const auto& o : sum.orbits) {
        json jo;
        jo["index"] = o.index;
        jo["ic"] = {{"chart", chart_name(o.ic.chart)},
                    {"c", {o.ic.c[0], o.ic.c[1], o.ic.c[2]}},
                    {"theta", o.ic.theta},
                    {"t", o.ic.t_phys}};
        jo["exit_status"] = o.exit_status;
        if (!o.message.empty()) jo["message"] = o.message;
        jo["completed"] = o.completed;
        jo["hinf"] = {{"value", o.hinf_value},
                      {"error_bound", o.hinf_error},
                      {"l_cuts", {o.hinf_cuts[0], o.hinf_cuts[1]}},
                      {"h_at_cuts", {o.h_at_cuts[0], o.h_at_cuts[1]}},
                      {"drift_rate", o.drift_rate}};
        jo["itinerary"] = {
            {"capture_phase", o.itinerary.capture_phase},
            {"ejection_collision_oscillations", o.itinerary.ejection_collision_oscillations},
            {"r_apex", o.itinerary.r_apex},
            {"t_apex", o.itinerary.t_apex},
            {"wc_ratio_median", o.itinerary.wc_ratio_median}};
        jo["t_final"] = o.t_final;
        jo["theta_final"] = o.theta_final;
        jo["l_final"] = o.l_final;
        jo["n_steps"] = o.n_steps;
        if (!o.trajectory_file.empty()) jo["trajectory_file"] = o.trajectory_file;
        orbits.push_back(jo);
    }
    j["orbits"] = orbits;
    return j.dump(1);
}

}  // namespace kepler
