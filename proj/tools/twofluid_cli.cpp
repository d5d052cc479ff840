// Batch front door: subcommands wiring run configurations to the library and
// emitting JSON / CSV / field files with deterministic formatting.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twofluid/config.hpp"
#include "twofluid/evolve.hpp"
#include "twofluid/format.hpp"
#include "twofluid/modes.hpp"
#include "twofluid/spectral.hpp"

namespace fs = std::filesystem;
using namespace twofluid;
using nlohmann::json;

namespace {

json coefficients_json(const ModelCoefficients& c) {
    json j;
    j["alpha1"] = c.alpha1;
    j["alpha2"] = c.alpha2;
    j["alpha3"] = c.alpha3;
    j["alpha4"] = c.alpha4;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["beta3"] = c.beta3;
    j["beta4"] = c.beta4;
    j["beta_plus"] = c.beta_plus;
    j["beta_minus"] = c.beta_minus;
    j["nu1_plus"] = c.nu1_plus;
    j["nu1_minus"] = c.nu1_minus;
    j["nu2_plus"] = c.nu2_plus;
    j["nu2_minus"] = c.nu2_minus;
    j["nu_plus"] = c.nu_plus;
    j["nu_minus"] = c.nu_minus;
    j["theta"] = c.theta;
    j["kappa1"] = c.kappa1;
    j["kappa2"] = c.kappa2;
    j["kappa3"] = c.kappa3;
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec && !fs::exists(dir))
        throw ConfigError("cannot create output directory '" + cfg.out_dir + "'");
    return dir;
}

double default_vartheta(const RunConfig& cfg, const ModelCoefficients& c) {
    if (cfg.vartheta > 0.0) return cfg.vartheta;
    return c.theta / 10.0;
}

double mode_eta(const RunConfig& cfg, const ModelCoefficients& c) {
    if (cfg.eta > 0.0) return cfg.eta;
    return eta_threshold(c, default_vartheta(cfg, c));
}

// Linear work resolves the full shell comfortably; nonlinear work must also
// keep 4 eta inside the 2/3 dealias band, which caps the box size.
BoxGrid grid_for(const RunConfig& cfg, double eta, bool nonlinear) {
    double box = cfg.box;
    if (box <= 0.0)
        box = nonlinear ? std::numbers::pi * cfg.n / (6.0 * eta)
                        : 12.0 * std::numbers::pi / eta;
    return BoxGrid(cfg.n, box);
}

State initial_mode_state(const RunConfig& cfg, const ModelCoefficients& c, double eta,
                         const BoxGrid& grid) {
    const GrowingMode mode = build_mode(eta, c, grid);
    const ModeState raw = mode_to_state(mode, grid);
    const double h4 = state_norms(make_state(raw), 4).total();
    return make_state(raw, cfg.eps / h4);
}

void write_state_snapshot(const fs::path& path, const State& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    ModeState m{s.n_plus, s.u_plus, s.n_minus, s.u_minus};
    write_mode_state(f, m);
}

int cmd_coeffs(const RunConfig& cfg) {
    const json j = coefficients_json(cfg.coefficients());
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    write_text_file(ensure_out_dir(cfg) / "coeffs.json", text);
    return 0;
}

int cmd_dispersion(const RunConfig& cfg, double rmin, double rmax, int samples) {
    const ModelCoefficients c = cfg.coefficients();
    std::ostringstream csv;
    write_dispersion_csv(csv, c, rmin, rmax, samples);
    const fs::path out = ensure_out_dir(cfg) / "dispersion.csv";
    write_text_file(out, csv.str());
    std::cout << "wrote " << out.string() << " (" << samples << " samples)\n";
    return 0;
}

int cmd_theta(const RunConfig& cfg, double vartheta_flag) {
    const ModelCoefficients c = cfg.coefficients();
    const double vt = vartheta_flag > 0.0 ? vartheta_flag : default_vartheta(cfg, c);
    json j;
    j["theta"] = c.theta;
    j["vartheta"] = vt;
    j["eta1"] = eta_threshold(c, vt);
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    write_text_file(ensure_out_dir(cfg) / "theta.json", text);
    return 0;
}

int cmd_mode(const RunConfig& cfg) {
    const ModelCoefficients c = cfg.coefficients();
    const double eta = mode_eta(cfg, c);
    const BoxGrid grid = grid_for(cfg, eta, false);
    const GrowingMode mode = build_mode(eta, c, grid);
    const ModeState state = mode_to_state(mode, grid);
    const fs::path out = ensure_out_dir(cfg) / "mode.field";
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + out.string() + "'");
    write_mode_state(f, state);
    std::cout << "wrote " << out.string() << " (eta = " << format_double(eta)
              << ", shells = " << mode.shells
              << ", max residual = " << format_double(mode.max_residual) << ")\n";
    return 0;
}

int cmd_evolve_linear(const RunConfig& cfg) {
    const ModelCoefficients c = cfg.coefficients();
    const double eta = mode_eta(cfg, c);
    const BoxGrid grid = grid_for(cfg, eta, false);
    const State s0 = initial_mode_state(cfg, c, eta, grid);

    const double t_end = cfg.t_end > 0.0 ? cfg.t_end : 10.0 / c.theta;
    const int samples = 50;
    const fs::path dir = ensure_out_dir(cfg);
    std::vector<SeriesRow> rows;
    for (int k = 0; k <= samples; ++k) {
        const double t = t_end * k / samples;
        const State st = evolve_linear(s0, c, t); // exact jump from t = 0
        const ComponentNorms l2 = state_norms(st, 0);
        SeriesRow row;
        row.t = t;
        row.l2_total = l2.total();
        row.h4_total = state_norms(st, 4).total();
        row.l2_n_plus = l2.n_plus;
        row.l2_u_plus = l2.u_plus;
        row.l2_n_minus = l2.n_minus;
        row.l2_u_minus = l2.u_minus;
        double guard = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < st.n_plus.v.size(); ++i)
            guard = std::min(guard, std::min(1.0 + st.n_plus.v[i] / c.alpha1,
                                             1.0 + st.n_minus.v[i] / c.alpha4));
        row.guard_min_R = guard;
        rows.push_back(row);
        if (cfg.stride > 0 && k % cfg.stride == 0) {
            std::ostringstream name;
            name << "linear_" << std::setw(6) << std::setfill('0') << k << ".field";
            write_state_snapshot(dir / name.str(), st);
        }
    }
    std::ostringstream csv;
    write_series_csv(csv, rows);
    write_text_file(dir / "linear_series.csv", csv.str());
    std::cout << "wrote " << (dir / "linear_series.csv").string() << "\n";
    return 0;
}

int cmd_evolve_nonlinear(const RunConfig& cfg) {
    if (cfg.direct)
        throw ConfigError("nonlinear evolution needs physical laws, not the beta override");
    const ModelCoefficients c = cfg.coefficients();
    const double eta = cfg.eta > 0.0 ? cfg.eta : mode_eta(cfg, c) / 3.0;
    const BoxGrid grid = grid_for(cfg, eta, true);
    const State s0 = initial_mode_state(cfg, c, eta, grid);

    EvolveOptions opt;
    opt.t_end = cfg.t_end > 0.0 ? cfg.t_end : 2.0 / c.theta;
    opt.dt = cfg.dt > 0.0 ? cfg.dt : 0.5 * max_stable_dt(grid, c);
    opt.record_states = true;
    opt.record_stride = std::max(1, cfg.stride);
    const Trajectory traj = evolve_nonlinear(s0, cfg.phase, cfg.cap, cfg.visc, c, opt);

    const fs::path dir = ensure_out_dir(cfg);
    std::ostringstream csv;
    write_series_csv(csv, traj.series);
    write_text_file(dir / "nonlinear_series.csv", csv.str());
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        std::ostringstream name;
        name << "nonlinear_" << std::setw(6) << std::setfill('0') << k << ".field";
        write_state_snapshot(dir / name.str(), traj.states[k]);
    }
    std::cout << "wrote " << (dir / "nonlinear_series.csv").string() << " ("
              << traj.series.size() << " rows"
              << (traj.truncated ? ", truncated: " + traj.note : std::string()) << ")\n";
    return traj.truncated ? 3 : 0;
}

int cmd_escape(const RunConfig& cfg) {
    if (cfg.direct)
        throw ConfigError("the escape experiment needs physical laws, not the beta override");
    const ModelCoefficients c = cfg.coefficients();
    const EscapeConfig ecfg = make_escape_config(cfg.eps, cfg.eps0, c.theta);
    // default shell: the cutoff plateau tops out where the rate certificate
    // theta - vartheta is attained
    const double eta = cfg.eta > 0.0 ? cfg.eta : eta_threshold(c, ecfg.vartheta) / 3.0;
    const BoxGrid grid = grid_for(cfg, eta, true);

    EvolveOptions opt;
    opt.t_end = cfg.t_end;
    opt.dt = cfg.dt;
    const EscapeResult res =
        escape_experiment(ecfg, cfg.phase, cfg.cap, cfg.visc, c, grid, eta, opt);

    json j;
    j["eps"] = ecfg.eps;
    j["eps0"] = ecfg.eps0;
    j["theta"] = ecfg.theta;
    j["vartheta"] = ecfg.vartheta;
    j["t_pred"] = ecfg.t_pred;
    j["eta"] = res.eta;
    j["m0"] = res.m0;
    j["delta0"] = res.delta0;
    j["delta0_cap"] = res.delta0_cap;
    j["escaped_l2"] = res.escaped_l2;
    j["t_escape_l2"] = res.t_escape_l2;
    j["escaped_h4"] = res.escaped_h4;
    j["t_escape_h4"] = res.t_escape_h4;
    j["growth_fit"] = res.growth_fit;
    j["truncated"] = res.trajectory.truncated;
    const std::string text = j.dump(2) + "\n";
    std::cout << text;

    const fs::path dir = ensure_out_dir(cfg);
    write_text_file(dir / "escape.json", text);
    std::ostringstream csv;
    write_series_csv(csv, res.series);
    write_text_file(dir / "escape_series.csv", csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// verify: the aggregated invariant battery; one PASS/FAIL line per check
// ---------------------------------------------------------------------------

struct Verifier {
    int failures = 0;

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        std::cout << (ok ? "PASS " : "FAIL ") << name;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
        if (!ok) ++failures;
    }
};

int cmd_verify(const RunConfig& cfg) {
    Verifier v;
    const ModelCoefficients c = cfg.coefficients();
    std::mt19937_64 rng(cfg.seed);

    if (!cfg.direct) {
        const LocalClosure eq = solve_equilibrium(cfg.phase, cfg.cap);
        const double resid = cfg.phase.pressure_plus(eq.rho_plus) -
                             cfg.phase.pressure_minus(eq.rho_minus) - cfg.cap.value(1.0);
        v.check("closure.residual", std::abs(resid) < 1e-12, format_double(resid));
        double worst_part = 0.0;
        std::uniform_real_distribution<double> um(0.6, 1.5);
        for (int i = 0; i < 50; ++i) {
            const LocalClosure lc = closure_at(um(rng), um(rng), cfg.phase, cfg.cap);
            worst_part = std::max(worst_part, std::abs(lc.alpha_plus + lc.alpha_minus - 1.0));
        }
        v.check("closure.partition_of_unity", worst_part < 1e-14, format_double(worst_part));
        const double lhs = c.beta1 * c.beta4 - c.beta2 * c.beta3;
        const double rhs =
            -eq.c2 * cfg.cap.slope(1.0) / (std::sqrt(c.alpha1 * c.alpha4) * eq.rho_plus);
        v.check("closure.coefficient_identity",
                std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)),
                format_double(lhs - rhs));
    }

    v.check("spectral.theta_consistency",
            std::abs(growth_rate(c) - c.theta) <= 1e-12 * std::max(1.0, c.theta),
            format_double(c.theta));

    // dispersion sweep: Vieta residuals tie the roots to the coefficients
    {
        double worst = 0.0;
        for (int i = 0; i < 400; ++i) {
            const double r = 1e-3 * std::pow(1e6, i / 399.0);
            const QuarticCoeffs q = characteristic_coeffs(r, c);
            const auto l = eigenvalues(r, c);
            Cplx sum(0.0), prod(1.0);
            for (const Cplx& x : l) {
                sum += x;
                prod *= x;
            }
            worst = std::max(worst, std::abs(sum + q.c3) / std::max(1.0, std::abs(q.c3)));
            worst = std::max(worst, std::abs(prod - q.c0) / std::max(1.0, std::abs(q.c0)));
        }
        v.check("spectral.vieta_sweep", worst < 1e-9, format_double(worst));
    }

    if (c.unstable()) {
        const double bound = spectral_bound(1e-3, 1e3, c, 2000);
        v.check("spectral.growth_below_theta", bound <= c.theta + 1e-10,
                format_double(bound));
        double worst_l1 = -1.0;
        for (int i = 0; i < 200; ++i) {
            const double r = 1e-2 * std::pow(1e4, i / 199.0);
            worst_l1 = std::max(worst_l1, lambda1(r, c) - c.theta);
        }
        v.check("spectral.lambda1_below_theta", worst_l1 < 0.0, format_double(worst_l1));
    } else {
        const double bound = spectral_bound(1e-3, 1e3, c, 2000);
        v.check("spectral.no_unstable_root", bound <= 1e-12,
                "no unstable root, max Re = " + format_double(bound));
    }

    // projector identities and the propagator's two internal routes
    {
        double worst_id = 0.0, worst_prop = 0.0;
        std::uniform_real_distribution<double> ur(-1.5, 1.5), ut(0.0, 4.0);
        for (int i = 0; i < 25; ++i) {
            const double r = std::pow(10.0, ur(rng));
            const SpectralDecomposition d = projectors(r, c);
            if (d.degenerate) continue;
            Mat4c sum = Mat4c::Zero(), weighted = Mat4c::Zero();
            for (int k = 0; k < 4; ++k) {
                sum += d.projectors[k];
                weighted += d.lambdas[k] * d.projectors[k];
            }
            worst_id =
                std::max(worst_id, (sum - Mat4c::Identity()).cwiseAbs().maxCoeff());
            const double scale = std::max(1.0, weighted.cwiseAbs().maxCoeff());
            worst_id = std::max(
                worst_id,
                (weighted - symbol_matrix(r, c).cast<Cplx>()).cwiseAbs().maxCoeff() / scale);
            const double t = ut(rng);
            const Mat4c e = propagator(r, c, t);
            const Mat4 ref = expm(Mat4(t * symbol_matrix(r, c)));
            worst_prop = std::max(worst_prop, (e.real() - ref).cwiseAbs().maxCoeff() /
                                                  std::max(1.0, ref.cwiseAbs().maxCoeff()));
        }
        v.check("spectral.projector_identities", worst_id < 1e-8, format_double(worst_id));
        v.check("spectral.propagator_vs_expm", worst_prop < 1e-6, format_double(worst_prop));
    }

    if (c.unstable()) {
        // low-frequency expansion defect slope over a decade
        std::vector<double> xs, ys;
        for (double r = 1e-3; r < 1.05e-2; r *= std::pow(10.0, 0.5)) {
            xs.push_back(std::log(r));
            ys.push_back(std::log(low_freq_expansion(r, c).defect));
        }
        double sx = 0, sx2 = 0, sy = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sx2 += xs[i] * xs[i];
            sy += ys[i];
            sxy += xs[i] * ys[i];
        }
        const double n = double(xs.size());
        const double slope = (n * sxy - sx * sy) / (n * sx2 - sx * sx);
        v.check("spectral.low_freq_defect_slope", slope > 2.7, format_double(slope));
    }

    // fields: round trip, Plancherel, Hodge, file format
    {
        const BoxGrid g(16, 2.0 * std::numbers::pi);
        ScalarField f(g);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (double& x : f.v) x = nd(rng);
        auto s = transform(f);
        dealias(s);
        f = inverse(s);

        const ScalarField back = inverse(transform(f));
        double rt = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < f.v.size(); ++i) {
            rt = std::max(rt, std::abs(back.v[i] - f.v[i]));
            scale = std::max(scale, std::abs(f.v[i]));
        }
        v.check("fields.round_trip", rt <= 1e-12 * scale, format_double(rt));

        const double pl = std::abs(l2_physical(f) - sobolev_norm(f, 0));
        v.check("fields.plancherel", pl <= 1e-12 * l2_physical(f), format_double(pl));

        VectorField u;
        for (int a = 0; a < 3; ++a) {
            u.c[a] = ScalarField(g);
            for (double& x : u.c[a].v) x = nd(rng);
            auto us = transform(u.c[a]);
            dealias(us);
            u.c[a] = inverse(us);
        }
        const VectorField rec = hodge_reconstruct(hodge_split(u));
        double hod = 0.0, uscale = 0.0;
        for (int a = 0; a < 3; ++a)
            for (std::size_t i = 0; i < u.c[a].v.size(); ++i) {
                hod = std::max(hod, std::abs(rec.c[a].v[i] - u.c[a].v[i]));
                uscale = std::max(uscale, std::abs(u.c[a].v[i]));
            }
        v.check("fields.hodge_round_trip", hod <= 1e-10 * uscale, format_double(hod));

        std::stringstream buf;
        write_field_file(buf, g, {"f"}, {&f.v});
        const FieldFileData data = read_field_file(buf);
        const bool bitexact = data.components[0].size() == f.v.size() &&
                              std::memcmp(data.components[0].data(), f.v.data(),
                                          f.v.size() * sizeof(double)) == 0;
        v.check("fields.file_bit_exact", bitexact);
    }

    if (c.unstable()) {
        // growing mode and its two-sided linear growth
        const double vt = default_vartheta(cfg, c);
        const double eta = cfg.eta > 0.0 ? cfg.eta : eta_threshold(c, vt);
        const BoxGrid grid(std::min(cfg.n, 32), 12.0 * std::numbers::pi / eta);
        const GrowingMode mode = build_mode(eta, c, grid);
        v.check("modes.rate_system_residual", mode.max_residual < 1e-10,
                format_double(mode.max_residual));

        const State s0 = make_state(mode_to_state(mode, grid));
        const ComponentNorms n0 = state_norms(s0, 0);
        const double t = 4.0 / c.theta;
        const ComponentNorms nt = state_norms(evolve_linear(s0, c, t), 0);
        const double lo = std::exp((c.theta - vt) * t) * (1.0 - 1e-6);
        const double hi = std::exp(c.theta * t) * (1.0 + 1e-6);
        bool ok = true;
        for (auto [now, init] :
             {std::pair{nt.n_plus, n0.n_plus}, std::pair{nt.u_plus, n0.u_plus},
              std::pair{nt.n_minus, n0.n_minus}, std::pair{nt.u_minus, n0.u_minus}})
            ok = ok && now >= lo * init && now <= hi * init;
        v.check("evolve.two_sided_growth", ok);
    }

    std::cout << (v.failures == 0
                      ? "verify: all checks passed\n"
                      : "verify: " + std::to_string(v.failures) + " check(s) failed\n");
    return v.failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("TWOFLUID_THREADS")) {
        try {
            set_transform_threads(std::stoi(threads));
        } catch (const std::exception&) {
            std::cerr << "ConfigError: TWOFLUID_THREADS must be a positive integer\n";
            return 2;
        }
    }

    CLI::App app{"two-fluid instability laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    double rmin = 1e-3, rmax = 1e3, vartheta_flag = 0.0;
    int samples = 1000;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "run configuration file")->required();
    };

    CLI::App* coeffs = app.add_subcommand("coeffs", "emit the scaled model coefficients");
    add_config(coeffs);
    CLI::App* dispersion =
        app.add_subcommand("dispersion", "sweep the four dispersion branches");
    dispersion->add_option("--rmin", rmin, "lowest radial frequency");
    dispersion->add_option("--rmax", rmax, "highest radial frequency");
    dispersion->add_option("--samples", samples, "number of log-spaced samples");
    add_config(dispersion);
    CLI::App* theta = app.add_subcommand("theta", "growth rate and shell threshold");
    theta->add_option("--vartheta", vartheta_flag, "rate margin for the threshold");
    add_config(theta);
    CLI::App* mode = app.add_subcommand("mode", "write the growing-mode initial data");
    add_config(mode);
    CLI::App* evl = app.add_subcommand("evolve-linear", "exact linear evolution series");
    add_config(evl);
    CLI::App* evn = app.add_subcommand("evolve-nonlinear", "pseudo-spectral nonlinear run");
    add_config(evn);
    CLI::App* escape = app.add_subcommand("escape", "amplitude escape experiment");
    add_config(escape);
    CLI::App* verify = app.add_subcommand("verify", "run the invariant battery");
    add_config(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig cfg = load_config(config_path);
        if (coeffs->parsed()) return cmd_coeffs(cfg);
        if (dispersion->parsed()) return cmd_dispersion(cfg, rmin, rmax, samples);
        if (theta->parsed()) return cmd_theta(cfg, vartheta_flag);
        if (mode->parsed()) return cmd_mode(cfg);
        if (evl->parsed()) return cmd_evolve_linear(cfg);
        if (evn->parsed()) return cmd_evolve_nonlinear(cfg);
        if (escape->parsed()) return cmd_escape(cfg);
        if (verify->parsed()) return cmd_verify(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "ConfigError: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << e.name() << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
