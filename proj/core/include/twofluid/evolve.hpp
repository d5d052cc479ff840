#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "twofluid/fields.hpp"
#include "twofluid/modes.hpp"
#include "twofluid/spectral.hpp"

namespace twofluid {

// The four scaled fields of the reformulated system on a common grid.
struct State {
    ScalarField n_plus;
    VectorField u_plus;
    ScalarField n_minus;
    VectorField u_minus;
    double t = 0.0;

    const BoxGrid& grid() const { return n_plus.grid; }
};

State make_state(const ModeState& m, double scale = 1.0);

// Component L2 (or H^k) norms; totals follow the sum-of-group-norms
// convention for multi-component functions.
struct ComponentNorms {
    double n_plus = 0.0, u_plus = 0.0, n_minus = 0.0, u_minus = 0.0;
    double total() const { return n_plus + u_plus + n_minus + u_minus; }
};
ComponentNorms state_norms(const State& s, int k = 0);

// Exact per-mode linear update: the compressible 4-vector advances with the
// symbol propagator, the incompressible remainders with the heat factors
// exp(-nu1 r^2 dt). No time-step error beyond the eigensolve tolerance.
State evolve_linear(const State& s, const ModelCoefficients& c, double dt);

// Tendency of the scaled system: transport divergences plus the quadratic
// coefficient-function terms, evaluated through the pointwise closure and
// dealiased by the 2/3 rule.
State nonlinear_rhs(const State& s, const PhaseLaw& phase, const CapillaryLaw& cap,
                    const Viscosities& visc, const ModelCoefficients& c);

struct SeriesRow {
    double t = 0.0;
    double l2_total = 0.0, h4_total = 0.0;
    double l2_n_plus = 0.0, l2_u_plus = 0.0, l2_n_minus = 0.0, l2_u_minus = 0.0;
    double guard_min_R = 0.0;
};

// Time-series CSV: t,l2_total,h4_total,l2_n_plus,l2_u_plus,l2_n_minus,l2_u_minus,guard_min_R
void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows);

struct EvolveOptions {
    double t_end = 0.0; // evolve_nonlinear requires > t0; escape fills a default
    double dt = 0.0;    // evolve_nonlinear requires > 0; escape fills a default
    int record_stride = 1;        // record state/tendency every this many steps
    bool record_states = false;   // keep full states (and tendencies) at records
    bool zero_nonlinear = false;  // integrate the bare linear system (testing)
    double guard_threshold = 1e-6;
    double stop_l2_above = 0.0;   // stop once l2_total and h4_total exceed this (0: off)
};

struct Trajectory {
    std::vector<SeriesRow> series;       // one row per step
    std::vector<double> record_times;
    std::vector<State> states;           // present when record_states
    std::vector<State> tendencies;       // scaled-system tendencies at records
    bool truncated = false;              // positivity guard tripped
    std::string note;
};

// Integrating-factor RK4: the cached per-shell propagator absorbs the linear
// part exactly, the nonlinear tendency is advanced explicitly. dt must not
// exceed 1/max_i |lambda_i| at the grid's largest radius.
Trajectory evolve_nonlinear(const State& s0, const PhaseLaw& phase, const CapillaryLaw& cap,
                            const Viscosities& visc, const ModelCoefficients& c,
                            const EvolveOptions& opts);

double max_stable_dt(const BoxGrid& grid, const ModelCoefficients& c);

struct EscapeConfig {
    double eps = 0.0;
    double eps0 = 0.0;
    double theta = 0.0;
    double vartheta = 0.0; // 1 / t_pred
    double t_pred = 0.0;   // (1/theta) ln(2 eps0 / eps)
    double monitor_h4 = true;
};
EscapeConfig make_escape_config(double eps, double eps0, double theta);

struct EscapeResult {
    bool escaped_l2 = false, escaped_h4 = false;
    double t_escape_l2 = 0.0, t_escape_h4 = 0.0;
    double growth_fit = 0.0;  // least-squares rate of ln l2 over the linear window
    double m0 = 0.0;          // L2 total of the unit-H4 mode
    double delta0 = 0.0;      // eps0 * m0 / e (the crossing threshold)
    double delta0_cap = 0.0;  // the other proof candidate, eps0
    double eta = 0.0;
    std::vector<SeriesRow> series;
    Trajectory trajectory;    // records kept only if requested via options
};

// Integrates eps x (unit-H4 growing mode) and reports the first crossing of
// delta0 in L2 (and H4), the fitted early-phase growth rate, and the series.
// dt = 0 or t_end = 0 in opts picks defaults from the stability cap and
// t_pred.
EscapeResult escape_experiment(const EscapeConfig& cfg, const PhaseLaw& phase,
                               const CapillaryLaw& cap, const Viscosities& visc,
                               const ModelCoefficients& c, const BoxGrid& grid, double eta,
                               EvolveOptions opts = {});

// ||U(t_k) - U_lin(t_k) - trapezoid_k exp((t_k - tau) A) F(tau) dtau|| in L2
// for every recorded time; second-order in the record spacing.
std::vector<double> duhamel_residual(const Trajectory& traj, const ModelCoefficients& c);

} // namespace twofluid
