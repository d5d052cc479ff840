#include "twofluid/evolve.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include "twofluid/format.hpp"

namespace twofluid {

namespace {

// Spectral mirror of a State: n+, u+ (3), n-, u- (3), x-half layout.
struct SpecState {
    BoxGrid grid;
    std::array<std::vector<Cplx>, 8> c;
    double t = 0.0;

    explicit SpecState(const BoxGrid& g) : grid(g) {
        for (auto& v : c) v.assign(g.spectral_size(), Cplx(0.0));
    }
};

SpecState to_spec(const State& s) {
    SpecState out(s.grid());
    const ScalarField* fields[8] = {&s.n_plus,         &s.u_plus.c[0], &s.u_plus.c[1],
                                    &s.u_plus.c[2],    &s.n_minus,     &s.u_minus.c[0],
                                    &s.u_minus.c[1],   &s.u_minus.c[2]};
    for (int j = 0; j < 8; ++j) {
        if (fields[j]->grid != s.grid()) throw GridMismatch("state components on mixed grids");
        out.c[j] = transform(*fields[j]).c;
    }
    out.t = s.t;
    return out;
}

State to_state(const SpecState& s) {
    State out;
    SpectralScalar tmp(s.grid);
    ScalarField* fields[8] = {&out.n_plus,       &out.u_plus.c[0], &out.u_plus.c[1],
                              &out.u_plus.c[2],  &out.n_minus,     &out.u_minus.c[0],
                              &out.u_minus.c[1], &out.u_minus.c[2]};
    for (int j = 0; j < 8; ++j) {
        tmp.c = s.c[j];
        *fields[j] = inverse(tmp);
    }
    out.t = s.t;
    return out;
}

// Per-shell linear update for one time increment.
struct ModeUpdate {
    Mat4 e = Mat4::Identity();
    double heat_p = 1.0, heat_m = 1.0;
};

struct DtTable {
    double dt = 0.0;
    std::unordered_map<long, ModeUpdate> shells;
};

DtTable build_table(const BoxGrid& grid, const ModelCoefficients& c, double dt) {
    DtTable t;
    t.dt = dt;
    const int nyq = grid.n / 2;
    const double dxi = grid.dxi();
    int k[3];
    for (std::size_t i = 0; i < grid.spectral_size(); ++i) {
        grid.wavenumbers(i, k[0], k[1], k[2]);
        long m2 = 0;
        for (int a = 0; a < 3; ++a)
            if (k[a] != nyq && k[a] != -nyq) m2 += long(k[a]) * k[a];
        if (m2 == 0 || t.shells.count(m2)) continue;
        const double r = dxi * std::sqrt(double(m2));
        ModeUpdate u;
        u.e = propagator(r, c, dt).real();
        u.heat_p = std::exp(-c.nu1_plus * r * r * dt);
        u.heat_m = std::exp(-c.nu1_minus * r * r * dt);
        t.shells.emplace(m2, u);
    }
    return t;
}

void apply_linear(SpecState& s, const ModelCoefficients&, const DtTable& table) {
    const BoxGrid& g = s.grid;
    const int nyq = g.n / 2;
    const double dxi = g.dxi();
    int k[3];
    for (std::size_t i = 0; i < g.spectral_size(); ++i) {
        g.wavenumbers(i, k[0], k[1], k[2]);
        double xt[3];
        long m2 = 0;
        for (int a = 0; a < 3; ++a) {
            const bool ny = (k[a] == nyq || k[a] == -nyq);
            xt[a] = ny ? 0.0 : dxi * k[a];
            if (!ny) m2 += long(k[a]) * k[a];
        }
        if (m2 == 0) continue; // symbol vanishes; nothing moves
        const ModeUpdate& u = table.shells.at(m2);
        const double rt = dxi * std::sqrt(double(m2));

        const Cplx up[3] = {s.c[1][i], s.c[2][i], s.c[3][i]};
        const Cplx um[3] = {s.c[5][i], s.c[6][i], s.c[7][i]};
        const Cplx I(0.0, 1.0);
        Cplx phi_p(0.0), phi_m(0.0);
        for (int a = 0; a < 3; ++a) {
            phi_p += xt[a] * up[a];
            phi_m += xt[a] * um[a];
        }
        phi_p *= I / rt;
        phi_m *= I / rt;

        Cplx v[4] = {s.c[0][i], phi_p, s.c[4][i], phi_m};
        Cplx w[4] = {};
        for (int r0 = 0; r0 < 4; ++r0)
            for (int c0 = 0; c0 < 4; ++c0) w[r0] += u.e(r0, c0) * v[c0];

        s.c[0][i] = w[0];
        s.c[4][i] = w[2];
        for (int a = 0; a < 3; ++a) {
            const Cplx dir = I * (xt[a] / rt);
            const Cplx wp = (up[a] + dir * phi_p) * u.heat_p; // incompressible part
            const Cplx wm = (um[a] + dir * phi_m) * u.heat_m;
            s.c[1 + a][i] = -dir * w[1] + wp;
            s.c[5 + a][i] = -dir * w[3] + wm;
        }
    }
}

double spec_group_norm(const BoxGrid& g, const std::vector<Cplx>* comps, int ncomp, int k) {
    const double dxi2 = g.dxi() * g.dxi();
    const int half = g.n / 2;
    double sum = 0.0;
    int kx, ky, kz;
    for (std::size_t i = 0; i < g.spectral_size(); ++i) {
        g.wavenumbers(i, kx, ky, kz);
        const double w = (kx == 0 || kx == half) ? 1.0 : 2.0;
        const double r2 = dxi2 * (double(kx) * kx + double(ky) * ky + double(kz) * kz);
        const double mult = k == 0 ? 1.0 : std::pow(1.0 + r2, k);
        double s = 0.0;
        for (int j = 0; j < ncomp; ++j) s += std::norm(comps[j][i]);
        sum += w * mult * s;
    }
    return std::sqrt(sum / g.volume());
}

ComponentNorms spec_norms(const SpecState& s, int k) {
    ComponentNorms n;
    n.n_plus = spec_group_norm(s.grid, &s.c[0], 1, k);
    n.u_plus = spec_group_norm(s.grid, &s.c[1], 3, k);
    n.n_minus = spec_group_norm(s.grid, &s.c[4], 1, k);
    n.u_minus = spec_group_norm(s.grid, &s.c[5], 3, k);
    return n;
}

void dealias_all(SpecState& s) {
    const int cut = s.grid.n / 3;
    int kx, ky, kz;
    for (std::size_t i = 0; i < s.grid.spectral_size(); ++i) {
        s.grid.wavenumbers(i, kx, ky, kz);
        if (std::abs(kx) > cut || std::abs(ky) > cut || std::abs(kz) > cut)
            for (auto& comp : s.c) comp[i] = Cplx(0.0);
    }
}

// All physical-space ingredients of the tendency, in unscaled variables.
struct TendencyWork {
    std::vector<double> np, nm;
    std::array<std::vector<double>, 3> up, um;
    std::array<std::vector<double>, 3> dnp, dnm;
    std::array<std::array<std::vector<double>, 3>, 3> dup, dum; // [j][i] = d_j u_i
    std::array<std::vector<double>, 3> lap_up, lap_um;
    std::array<std::vector<double>, 3> gdiv_up, gdiv_um;
    std::array<std::vector<double>, 3> f2, f4, prod_p, prod_m;
};

// guard_min is the smallest unscaled R over the grid; throws NonPositiveMass
// below the threshold so the caller can truncate the run cleanly.
SpecState nonlinear_tendency(const SpecState& s, const PhaseLaw& phase,
                             const CapillaryLaw& cap, const Viscosities& visc,
                             const LocalClosure& eq, const ModelCoefficients& c,
                             double guard_threshold, double& guard_min) {
    const BoxGrid& g = s.grid;
    const double sa1 = std::sqrt(c.alpha1), sa4 = std::sqrt(c.alpha4);
    const std::size_t np_phys = g.physical_size();
    const int nyq = g.n / 2;
    const double dxi = g.dxi();

    SpectralScalar scratch(g);
    auto inv = [&](const std::vector<Cplx>& spec) {
        scratch.c = spec;
        return inverse(scratch).v;
    };
    auto deriv = [&](const std::vector<Cplx>& spec, int axis) {
        std::vector<Cplx> out(spec.size());
        int k[3];
        for (std::size_t i = 0; i < spec.size(); ++i) {
            g.wavenumbers(i, k[0], k[1], k[2]);
            out[i] = (k[axis] == nyq || k[axis] == -nyq)
                         ? Cplx(0.0)
                         : spec[i] * Cplx(0.0, dxi * k[axis]);
        }
        return out;
    };

    // unscale to the physical variables of the original system
    std::array<std::vector<Cplx>, 8> un;
    const double inv_scale[8] = {1.0 / c.alpha1, 1.0 / sa1, 1.0 / sa1, 1.0 / sa1,
                                 1.0 / c.alpha4, 1.0 / sa4, 1.0 / sa4, 1.0 / sa4};
    for (int j = 0; j < 8; ++j) {
        un[j] = s.c[j];
        for (auto& z : un[j]) z *= inv_scale[j];
    }

    TendencyWork w;
    w.np = inv(un[0]);
    w.nm = inv(un[4]);
    for (int a = 0; a < 3; ++a) {
        w.up[a] = inv(un[1 + a]);
        w.um[a] = inv(un[5 + a]);
        w.dnp[a] = inv(deriv(un[0], a));
        w.dnm[a] = inv(deriv(un[4], a));
    }
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
            w.dup[j][i] = inv(deriv(un[1 + i], j));
            w.dum[j][i] = inv(deriv(un[5 + i], j));
        }
    // Laplacian and grad-div from the same lattice frequencies
    {
        std::vector<Cplx> divp(g.spectral_size(), Cplx(0.0)), divm(g.spectral_size(), Cplx(0.0));
        int k[3];
        for (std::size_t i = 0; i < g.spectral_size(); ++i) {
            g.wavenumbers(i, k[0], k[1], k[2]);
            for (int a = 0; a < 3; ++a) {
                if (k[a] == nyq || k[a] == -nyq) continue;
                const Cplx ik(0.0, dxi * k[a]);
                divp[i] += ik * un[1 + a][i];
                divm[i] += ik * un[5 + a][i];
            }
        }
        for (int a = 0; a < 3; ++a) {
            w.gdiv_up[a] = inv(deriv(divp, a));
            w.gdiv_um[a] = inv(deriv(divm, a));
            std::vector<Cplx> lp = un[1 + a], lm = un[5 + a];
            int kk[3];
            for (std::size_t i = 0; i < g.spectral_size(); ++i) {
                g.wavenumbers(i, kk[0], kk[1], kk[2]);
                double rt2 = 0.0;
                for (int b = 0; b < 3; ++b)
                    if (kk[b] != nyq && kk[b] != -nyq) rt2 += double(kk[b]) * kk[b];
                rt2 *= dxi * dxi;
                lp[i] *= -rt2;
                lm[i] *= -rt2;
            }
            w.lap_up[a] = inv(lp);
            w.lap_um[a] = inv(lm);
        }
    }

    for (int a = 0; a < 3; ++a) {
        w.f2[a].assign(np_phys, 0.0);
        w.f4[a].assign(np_phys, 0.0);
        w.prod_p[a].assign(np_phys, 0.0);
        w.prod_m[a].assign(np_phys, 0.0);
    }

    guard_min = std::numeric_limits<double>::infinity();
    const double mu_p = visc.mu_plus, mu_m = visc.mu_minus;
    const double la_p = visc.lambda_plus, la_m = visc.lambda_minus;
    double warm = eq.rho_plus;
    for (std::size_t i = 0; i < np_phys; ++i) {
        const double Rp = 1.0 + w.np[i], Rm = 1.0 + w.nm[i];
        guard_min = std::min(guard_min, std::min(Rp, Rm));
        if (!(Rp > guard_threshold) || !(Rm > guard_threshold))
            throw NonPositiveMass("positivity guard tripped: min R = " +
                                  format_double(std::min(Rp, Rm)));
        LocalClosure lc = closure_at(Rp, Rm, phase, cap, warm, 50);
        warm = lc.rho_plus;

        const double g_p = lc.c2 * lc.rho_minus / lc.rho_plus - c.alpha1;
        const double gbar_p =
            lc.c2 + lc.c2 * lc.alpha_minus * lc.fprime / lc.s2_minus - c.alpha2;
        const double g_m = lc.c2 * lc.rho_plus / lc.rho_minus -
                           lc.c2 * lc.alpha_plus * lc.fprime / lc.s2_plus - c.alpha4;
        const double gbar_m = lc.c2 - c.alpha3;
        // (d alpha± / dR+)/R± and (d alpha± / dR-)/R± through the closure
        const double h_p = lc.c2 * lc.alpha_minus / (Rp * lc.s2_minus);
        const double k_p = -(lc.c2 * lc.alpha_plus / (Rp * lc.s2_plus)) *
                           (1.0 + lc.alpha_minus * lc.fprime / lc.s2_minus);
        const double h_m = -lc.c2 / (lc.rho_minus * lc.s2_minus);
        const double k_m = (lc.c2 * lc.alpha_plus / (Rm * lc.s2_plus)) *
                           (1.0 + lc.alpha_minus * lc.fprime / lc.s2_minus);
        const double l_p = 1.0 / lc.rho_plus - 1.0 / eq.rho_plus;
        const double l_m = 1.0 / lc.rho_minus - 1.0 / eq.rho_minus;

        double divu_p = 0.0, divu_m = 0.0;
        for (int j = 0; j < 3; ++j) {
            divu_p += w.dup[j][j][i];
            divu_m += w.dum[j][j][i];
        }

        for (int a = 0; a < 3; ++a) {
            double adv_p = 0.0, adv_m = 0.0, mix_p = 0.0, mix_m = 0.0;
            for (int j = 0; j < 3; ++j) {
                adv_p += w.up[j][i] * w.dup[j][a][i];
                adv_m += w.um[j][i] * w.dum[j][a][i];
                const double grad_pair_p = w.dup[j][a][i] + w.dup[a][j][i];
                const double grad_pair_m = w.dum[j][a][i] + w.dum[a][j][i];
                mix_p += (h_p * w.dnp[j][i] + k_p * w.dnm[j][i]) * grad_pair_p;
                mix_m += (h_m * w.dnp[j][i] + k_m * w.dnm[j][i]) * grad_pair_m;
            }
            w.f2[a][i] = -g_p * w.dnp[a][i] - gbar_p * w.dnm[a][i] - adv_p + mu_p * mix_p +
                         la_p * (h_p * w.dnp[a][i] + k_p * w.dnm[a][i]) * divu_p +
                         mu_p * l_p * w.lap_up[a][i] + (mu_p + la_p) * l_p * w.gdiv_up[a][i];
            w.f4[a][i] = -g_m * w.dnm[a][i] - gbar_m * w.dnp[a][i] - adv_m + mu_m * mix_m +
                         la_m * (h_m * w.dnp[a][i] + k_m * w.dnm[a][i]) * divu_m +
                         mu_m * l_m * w.lap_um[a][i] + (mu_m + la_m) * l_m * w.gdiv_um[a][i];
            w.prod_p[a][i] = w.np[i] * w.up[a][i];
            w.prod_m[a][i] = w.nm[i] * w.um[a][i];
        }
    }

    SpecState out(g);
    out.t = s.t;
    ScalarField phys(g);
    auto fwd = [&](const std::vector<double>& v) {
        phys.v = v;
        return transform(phys).c;
    };
    std::array<std::vector<Cplx>, 3> prod_p_hat, prod_m_hat;
    for (int a = 0; a < 3; ++a) {
        prod_p_hat[a] = fwd(w.prod_p[a]);
        prod_m_hat[a] = fwd(w.prod_m[a]);
        out.c[1 + a] = fwd(w.f2[a]);
        out.c[5 + a] = fwd(w.f4[a]);
        for (auto& z : out.c[1 + a]) z *= sa1;
        for (auto& z : out.c[5 + a]) z *= sa4;
    }
    // F1 = -div(n+ u+), F3 = -div(n- u-), assembled spectrally
    out.c[0].assign(g.spectral_size(), Cplx(0.0));
    out.c[4].assign(g.spectral_size(), Cplx(0.0));
    {
        int k[3];
        for (std::size_t i = 0; i < g.spectral_size(); ++i) {
            g.wavenumbers(i, k[0], k[1], k[2]);
            for (int a = 0; a < 3; ++a) {
                if (k[a] == nyq || k[a] == -nyq) continue;
                const Cplx ik(0.0, dxi * k[a]);
                out.c[0][i] -= ik * prod_p_hat[a][i];
                out.c[4][i] -= ik * prod_m_hat[a][i];
            }
        }
        for (auto& z : out.c[0]) z *= c.alpha1;
        for (auto& z : out.c[4]) z *= c.alpha4;
    }
    dealias_all(out);
    return out;
}

void axpy(SpecState& y, double a, const SpecState& x) {
    for (int j = 0; j < 8; ++j)
        for (std::size_t i = 0; i < y.c[j].size(); ++i) y.c[j][i] += a * x.c[j][i];
}

SeriesRow make_row(const SpecState& s, double guard) {
    SeriesRow row;
    row.t = s.t;
    const ComponentNorms l2 = spec_norms(s, 0);
    row.l2_total = l2.total();
    row.h4_total = spec_norms(s, 4).total();
    row.l2_n_plus = l2.n_plus;
    row.l2_u_plus = l2.u_plus;
    row.l2_n_minus = l2.n_minus;
    row.l2_u_minus = l2.u_minus;
    row.guard_min_R = guard;
    return row;
}

double guard_of(const SpecState& s, const ModelCoefficients& c) {
    SpectralScalar tmp(s.grid);
    tmp.c = s.c[0];
    for (auto& z : tmp.c) z /= c.alpha1;
    const ScalarField np = inverse(tmp);
    tmp.c = s.c[4];
    for (auto& z : tmp.c) z /= c.alpha4;
    const ScalarField nm = inverse(tmp);
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < np.v.size(); ++i)
        g = std::min(g, std::min(1.0 + np.v[i], 1.0 + nm.v[i]));
    return g;
}

} // namespace

State make_state(const ModeState& m, double scale) {
    State s;
    s.n_plus = m.n_plus;
    s.u_plus = m.u_plus;
    s.n_minus = m.n_minus;
    s.u_minus = m.u_minus;
    if (scale != 1.0) {
        for (auto& x : s.n_plus.v) x *= scale;
        for (auto& x : s.n_minus.v) x *= scale;
        for (int a = 0; a < 3; ++a) {
            for (auto& x : s.u_plus.c[a].v) x *= scale;
            for (auto& x : s.u_minus.c[a].v) x *= scale;
        }
    }
    return s;
}

ComponentNorms state_norms(const State& s, int k) { return spec_norms(to_spec(s), k); }

State evolve_linear(const State& s, const ModelCoefficients& c, double dt) {
    if (!(dt >= 0.0)) throw OutOfRegime("evolve_linear requires dt >= 0");
    if (dt == 0.0) return s;
    SpecState spec = to_spec(s);
    const DtTable table = build_table(spec.grid, c, dt);
    apply_linear(spec, c, table);
    spec.t += dt;
    return to_state(spec);
}

State nonlinear_rhs(const State& s, const PhaseLaw& phase, const CapillaryLaw& cap,
                    const Viscosities& visc, const ModelCoefficients& c) {
    const LocalClosure eq = solve_equilibrium(phase, cap);
    double guard = 0.0;
    SpecState spec = to_spec(s);
    dealias_all(spec);
    return to_state(nonlinear_tendency(spec, phase, cap, visc, eq, c, 1e-6, guard));
}

double max_stable_dt(const BoxGrid& grid, const ModelCoefficients& c) {
    const double r_max = grid.dxi() * 0.5 * grid.n * std::sqrt(3.0);
    double m = 0.0;
    for (const Cplx& l : eigenvalues(r_max, c)) m = std::max(m, std::abs(l));
    return 1.0 / m;
}

Trajectory evolve_nonlinear(const State& s0, const PhaseLaw& phase, const CapillaryLaw& cap,
                            const Viscosities& visc, const ModelCoefficients& c,
                            const EvolveOptions& opts) {
    if (!(opts.dt > 0.0) || !(opts.t_end > s0.t))
        throw ConfigError("evolve_nonlinear requires dt > 0 and t_end > t0");
    const double cap_dt = max_stable_dt(s0.grid(), c);
    if (opts.dt > cap_dt * (1.0 + 1e-9))
        throw StepTooLarge("dt exceeds 1/max|lambda| = " + format_double(cap_dt));

    const LocalClosure eq = solve_equilibrium(phase, cap);
    const double span = opts.t_end - s0.t;
    const long nsteps = std::max(1L, std::lround(std::ceil(span / opts.dt - 1e-12)));
    const double dt = span / double(nsteps);

    SpecState u = to_spec(s0);
    dealias_all(u);
    const DtTable e_full = build_table(u.grid, c, dt);
    const DtTable e_half = build_table(u.grid, c, 0.5 * dt);

    Trajectory traj;
    auto tend_at = [&](const SpecState& state, double& guard) {
        return nonlinear_tendency(state, phase, cap, visc, eq, c, opts.guard_threshold, guard);
    };
    auto record = [&](const SpecState& state) {
        traj.record_times.push_back(state.t);
        if (opts.record_states) {
            traj.states.push_back(to_state(state));
            double guard = 0.0;
            if (opts.zero_nonlinear) {
                SpecState z(state.grid);
                z.t = state.t;
                traj.tendencies.push_back(to_state(z));
            } else {
                traj.tendencies.push_back(to_state(tend_at(state, guard)));
            }
        }
    };

    traj.series.push_back(make_row(u, guard_of(u, c)));
    record(u);

    for (long step = 0; step < nsteps; ++step) {
        try {
            if (opts.zero_nonlinear) {
                apply_linear(u, c, e_full);
            } else {
                double guard = 0.0;
                SpecState n1 = tend_at(u, guard);

                SpecState stage = u;
                axpy(stage, 0.5 * dt, n1);
                apply_linear(stage, c, e_half);
                SpecState n2 = tend_at(stage, guard);

                stage = u;
                apply_linear(stage, c, e_half);
                axpy(stage, 0.5 * dt, n2);
                SpecState n3 = tend_at(stage, guard);

                stage = u;
                apply_linear(stage, c, e_full);
                SpecState n3p = n3;
                apply_linear(n3p, c, e_half);
                axpy(stage, dt, n3p);
                SpecState n4 = tend_at(stage, guard);

                apply_linear(u, c, e_full);
                apply_linear(n1, c, e_full);
                axpy(u, dt / 6.0, n1);
                axpy(n2, 1.0, n3);
                apply_linear(n2, c, e_half);
                axpy(u, dt / 3.0, n2);
                axpy(u, dt / 6.0, n4);
            }
        } catch (const NonPositiveMass& err) {
            traj.truncated = true;
            traj.note = err.what();
            break;
        }
        u.t = s0.t + double(step + 1) * dt;
        traj.series.push_back(make_row(u, guard_of(u, c)));
        const bool at_record = ((step + 1) % opts.record_stride == 0) || step + 1 == nsteps;
        if (at_record) record(u);
        if (opts.stop_l2_above > 0.0 && traj.series.back().l2_total >= opts.stop_l2_above &&
            traj.series.back().h4_total >= opts.stop_l2_above)
            break;
    }
    return traj;
}

EscapeConfig make_escape_config(double eps, double eps0, double theta) {
    if (!(eps > 0.0) || !(eps < eps0))
        throw ConfigError("escape experiment requires 0 < eps < eps0");
    if (!(theta > 0.0)) throw ConfigError("escape experiment requires theta > 0");
    EscapeConfig cfg;
    cfg.eps = eps;
    cfg.eps0 = eps0;
    cfg.theta = theta;
    cfg.t_pred = std::log(2.0 * eps0 / eps) / theta;
    cfg.vartheta = 1.0 / cfg.t_pred;
    return cfg;
}

EscapeResult escape_experiment(const EscapeConfig& cfg, const PhaseLaw& phase,
                               const CapillaryLaw& cap, const Viscosities& visc,
                               const ModelCoefficients& c, const BoxGrid& grid, double eta,
                               EvolveOptions opts) {
    const GrowingMode mode = build_mode(eta, c, grid);
    const ModeState raw = mode_to_state(mode, grid);
    const double h4 = state_norms(make_state(raw), 4).total();
    const State normalized = make_state(raw, 1.0 / h4);

    EscapeResult res;
    res.eta = eta;
    res.m0 = state_norms(normalized, 0).total();
    res.delta0 = cfg.eps0 * res.m0 / std::numbers::e;
    res.delta0_cap = cfg.eps0;

    State s0 = make_state(raw, cfg.eps / h4);
    if (opts.dt <= 0.0)
        opts.dt = std::min(0.5 * max_stable_dt(grid, c), cfg.t_pred / 400.0);
    if (opts.t_end <= 0.0) opts.t_end = 1.6 * cfg.t_pred;
    opts.stop_l2_above = res.delta0 * 1.05;

    res.trajectory = evolve_nonlinear(s0, phase, cap, visc, c, opts);
    res.series = res.trajectory.series;

    auto crossing = [&](auto&& value_of, double target, bool& hit) {
        hit = false;
        for (std::size_t i = 1; i < res.series.size(); ++i) {
            const double a = value_of(res.series[i - 1]), b = value_of(res.series[i]);
            if (b >= target && a < target) {
                hit = true;
                const double f = (std::log(target) - std::log(a)) / (std::log(b) - std::log(a));
                return res.series[i - 1].t + f * (res.series[i].t - res.series[i - 1].t);
            }
        }
        return 0.0;
    };
    res.t_escape_l2 =
        crossing([](const SeriesRow& r) { return r.l2_total; }, res.delta0, res.escaped_l2);
    res.t_escape_h4 =
        crossing([](const SeriesRow& r) { return r.h4_total; }, res.delta0, res.escaped_h4);

    // least squares on ln(l2) while the norm is still inside the linear window
    const double window = std::pow(cfg.eps0, 2.0 / 3.0) * res.delta0;
    double st = 0, st2 = 0, sy = 0, sty = 0, n = 0;
    for (const SeriesRow& row : res.series) {
        if (!(row.l2_total > 0.0) || row.l2_total >= window) continue;
        const double y = std::log(row.l2_total);
        st += row.t;
        st2 += row.t * row.t;
        sy += y;
        sty += row.t * y;
        n += 1.0;
    }
    res.growth_fit = n > 1 ? (n * sty - st * sy) / (n * st2 - st * st) : 0.0;
    return res;
}

std::vector<double> duhamel_residual(const Trajectory& traj, const ModelCoefficients& c) {
    const std::size_t K = traj.states.size();
    if (K < 2 || traj.tendencies.size() != K)
        throw ConfigError("duhamel_residual needs recorded states and tendencies");
    const BoxGrid grid = traj.states[0].grid();
    const double spacing = traj.record_times[1] - traj.record_times[0];
    for (std::size_t k = 1; k < K; ++k) {
        const double d = traj.record_times[k] - traj.record_times[k - 1];
        if (std::abs(d - spacing) > 1e-9 * spacing)
            throw ConfigError("duhamel_residual requires uniform record spacing");
    }

    std::vector<SpecState> us, fs;
    us.reserve(K);
    fs.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        us.push_back(to_spec(traj.states[k]));
        fs.push_back(to_spec(traj.tendencies[k]));
    }

    std::vector<DtTable> tables(K); // gap g -> exp(g * spacing * A)
    for (std::size_t g = 1; g < K; ++g) tables[g] = build_table(grid, c, double(g) * spacing);

    std::vector<double> out(K, 0.0);
    for (std::size_t k = 1; k < K; ++k) {
        SpecState lin = us[0];
        apply_linear(lin, c, tables[k]);
        SpecState defect = us[k];
        axpy(defect, -1.0, lin);

        SpecState quad(grid);
        for (std::size_t j = 0; j <= k; ++j) {
            const double w = (j == 0 || j == k) ? 0.5 * spacing : spacing;
            SpecState term = fs[j];
            if (j < k) apply_linear(term, c, tables[k - j]);
            axpy(quad, w, term);
        }
        axpy(defect, -1.0, quad);
        out[k] = spec_norms(defect, 0).total();
    }
    return out;
}

void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows) {
    os << "t,l2_total,h4_total,l2_n_plus,l2_u_plus,l2_n_minus,l2_u_minus,guard_min_R\n";
    for (const SeriesRow& r : rows) {
        os << format_double(r.t) << ',' << format_double(r.l2_total) << ','
           << format_double(r.h4_total) << ',' << format_double(r.l2_n_plus) << ','
           << format_double(r.l2_u_plus) << ',' << format_double(r.l2_n_minus) << ','
           << format_double(r.l2_u_minus) << ',' << format_double(r.guard_min_R) << '\n';
    }
}

} // namespace twofluid
