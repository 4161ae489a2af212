#ifndef KEPLERDRAG_SCENARIO_HPP
#define KEPLERDRAG_SCENARIO_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "keplerdrag/manifolds.hpp"

namespace kepler {

// Declarative description of one experiment, parsed from a JSON document.
// Unknown keys are rejected and numeric fields are range-checked.
struct LevelSetSampler {
    double h2 = 0.8;                           // level of the H2 form at v = 0
    int count = 50;                            // equispaced midpoints
    std::array<double, 2> rho2_range{0.15, 0.25};  // open interval
    double l_scale = 1.0;  // scales rho2 (hence the initial l) keeping h2
};

struct ClassifyConfig {
    // Bands of the itinerary classifier; see classify_itinerary.
    double nu_band = 1.0;      // capture needs an apex with nu = 1/sqrt(r) below this
    double wc_factor = 3.0;    // v11 within this factor of -nu^6/delta on the infall
    double peri_l2_enter = 0.8;  // l/sqrt(r) above this marks a collision pass
    double peri_l2_exit = 0.4;
    double osc_r_ratio = 5.0;  // segment max over periapsis r to count a swing
};

struct ScenarioConfig {
    int schema_version = 1;
    std::string mode;  // simulate | portrait | series | manifold | verify
    double delta = 1.0;
    unsigned long long seed = 0;

    double rtol = 1e-12;
    double atol = 1e-12;
    long max_steps = 100000000;
    double tau_budget = 1e9;

    std::vector<ChartPoint> explicit_ics;
    std::optional<LevelSetSampler> level_set;
    double l_terminal = 1e-4;
    std::array<double, 2> hinf_cutoffs{1e-3, 1e-4};
    bool write_trajectories = true;
    int sample_stride = 1;
    ClassifyConfig classify;

    std::vector<double> h_list;   // portrait levels
    int portrait_points = 400;

    int series_N = 40;

    std::vector<double> manifold_l{0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> fiber_h;
    int fiber_phi_count = 0;
    double fiber_l0 = 0.1;
    double fiber_l_cut = 0.04;
    std::array<double, 2> center_nu_range{0.15, 0.3};
    bool do_center_fit = false;

    bool inject_fault = false;  // negative-control hook for the verify battery
};

// Parse and validate a config document.  Throws ConfigError on unknown keys,
// bad types or out-of-range values.
ScenarioConfig parse_config_text(const std::string& json_text);
ScenarioConfig load_config_file(const std::string& path);

// Initial conditions of a scenario: the explicit list, or the level-set
// sampler (points on H2(l20, 0) = h2 in the C2 chart with rho2 at `count`
// midpoints of the open interval).
std::vector<ChartPoint> scenario_initial_conditions(const ScenarioConfig& cfg);

struct Itinerary {
    bool capture_phase = false;
    int ejection_collision_oscillations = 0;
    double r_apex = 0.0;
    double t_apex = 0.0;
    double wc_ratio_median = 0.0;  // v11 / (-nu^6/delta) during the infall leg
};

// Classify one trajectory against the capture / ejection-collision pattern.
Itinerary classify_itinerary(const Trajectory& tr, const Params& p, const ClassifyConfig& cfg);

struct OrbitResult {
    int index = 0;
    ChartPoint ic;
    std::string exit_status;
    std::string message;
    bool completed = false;
    double hinf_value = 0.0;
    double hinf_error = 0.0;
    std::array<double, 2> hinf_cuts{0.0, 0.0};
    std::array<double, 2> h_at_cuts{0.0, 0.0};
    double drift_rate = 0.0;
    Itinerary itinerary;
    double t_final = 0.0;
    double theta_final = 0.0;
    double l_final = 0.0;
    long n_steps = 0;
    std::string trajectory_file;
};

struct RunSummary {
    ScenarioConfig config;
    std::vector<OrbitResult> orbits;
    int n_failed = 0;
};

// Batch simulation: one trajectory CSV per orbit plus summary.json under
// out_dir.  Orbits run in parallel over `jobs` threads; per-orbit failures
// are recorded and the batch continues.
RunSummary run_simulate(const ScenarioConfig& cfg, const std::string& out_dir, int jobs = 0);

// Level-set polylines of H in (r1, v) and of the H2 form in (l2, v), written
// as portrait_r1v.csv and portrait_l2v.csv.
void run_portrait(const ScenarioConfig& cfg, const std::string& out_dir);

// Coefficient table plus growth-fit metadata (coefficients.csv,
// series_summary.json).
void run_series(const ScenarioConfig& cfg, const std::string& out_dir);

// Manifold evaluations, optional fiber sweep and center-manifold fit
// (manifold_points.csv, fibers.csv, center_fit.json).
void run_manifold(const ScenarioConfig& cfg, const std::string& out_dir);

struct VerifyCheck {
    std::string name;
    bool pass = false;
    double residual = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool all_pass = false;
};

// Analytic-identity battery across the modules.  inject_fault flips a sign
// in the drift-identity check so the battery can prove it detects failures.
VerifyReport run_verify(const Params& p, bool inject_fault = false);

// Serialize a summary to the schema-versioned JSON document.
std::string summary_to_json(const RunSummary& summary);

}  // namespace kepler

#endif
