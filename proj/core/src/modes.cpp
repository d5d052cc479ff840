#include "twofluid/modes.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <set>

namespace twofluid {

namespace {

double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double smooth_step(double t) {
    const double a = bump(t), b = bump(1.0 - t);
    return a / (a + b);
}

} // namespace

double cutoff(double r, double eta) {
    if (!(eta > 0.0)) throw OutOfRegime("cutoff requires eta > 0");
    if (r <= eta || r >= 4.0 * eta) return 0.0;
    return smooth_step((r - eta) / (0.5 * eta)) * smooth_step((4.0 * eta - r) / eta);
}

GrowingMode build_mode(double eta, const ModelCoefficients& c, const BoxGrid& grid) {
    if (!c.unstable()) throw StableParameters("growing mode needs beta1*beta4 < beta2*beta3");
    if (!(eta > 0.0)) throw OutOfRegime("build_mode requires eta > 0");

    GrowingMode m;
    m.eta = eta;
    m.nhat_plus = SpectralScalar(grid);
    m.phihat_plus = SpectralScalar(grid);
    m.nhat_minus = SpectralScalar(grid);
    m.phihat_minus = SpectralScalar(grid);

    const double dxi = grid.dxi();
    const double lo2 = (eta / dxi) * (eta / dxi);
    const double hi2 = (4.0 * eta / dxi) * (4.0 * eta / dxi);

    // distinct integer shells k^2 intersecting [eta, 4 eta]
    const int nyq = grid.n / 2;
    std::set<long> shells;
    std::map<long, double> rate_cache; // k^2 -> lambda1
    int kx, ky, kz;
    for (std::size_t i = 0; i < grid.spectral_size(); ++i) {
        grid.wavenumbers(i, kx, ky, kz);
        const long m2 = long(kx) * kx + long(ky) * ky + long(kz) * kz;
        if (m2 == 0 || double(m2) < lo2 || double(m2) > hi2) continue;
        shells.insert(m2);
    }
    m.shells = int(shells.size());
    if (m.shells < 6)
        throw GridTooCoarse("fewer than 6 lattice shells intersect [eta, 4 eta]");

    const double b1 = c.beta1, b2 = c.beta2, b4 = c.beta4, nup = c.nu_plus;
    for (std::size_t i = 0; i < grid.spectral_size(); ++i) {
        grid.wavenumbers(i, kx, ky, kz);
        // unpaired Nyquist planes cannot carry the odd velocity symmetry
        if (kx == nyq || std::abs(ky) == nyq || std::abs(kz) == nyq) continue;
        const long m2 = long(kx) * kx + long(ky) * ky + long(kz) * kz;
        if (m2 == 0) continue;
        const double r = dxi * std::sqrt(double(m2));
        const double a = cutoff(r, eta);
        if (a == 0.0) continue;

        auto it = rate_cache.find(m2);
        if (it == rate_cache.end()) it = rate_cache.emplace(m2, lambda1(r, c)).first;
        const double l1 = it->second;

        const double r2 = r * r;
        const double np = a;
        const double pp = -(l1 / (b1 * r)) * a;
        const double nm = -((l1 * l1 + b1 * b1 * r2 + nup * l1 * r2) / (b1 * b2 * r2)) * a;
        const double pm =
            ((l1 * l1 * l1 + b1 * b1 * l1 * r2 + nup * l1 * l1 * r2) / (b1 * b2 * b4 * r2 * r)) * a;
        m.nhat_plus.c[i] = np;
        m.phihat_plus.c[i] = pp;
        m.nhat_minus.c[i] = nm;
        m.phihat_minus.c[i] = pm;

        // residual of the four rate equations for this mode
        const double res1 = l1 * np + b1 * r * pp;
        const double res2 = l1 * pp - b1 * r * np - b2 * r * nm + c.nu_plus * r2 * pp;
        const double res3 = l1 * nm + b4 * r * pm;
        const double res4 = l1 * pm - c.beta3 * r * np - b4 * r * nm + c.nu_minus * r2 * pm;
        const double scale = std::max({std::abs(np), std::abs(pp), std::abs(nm), std::abs(pm)});
        const double res = std::max({std::abs(res1), std::abs(res2), std::abs(res3),
                                     std::abs(res4)}) / std::max(scale, 1e-300);
        m.max_residual = std::max(m.max_residual, res);
    }
    return m;
}

ModeState mode_to_state(const GrowingMode& m, const BoxGrid& grid) {
    if (m.nhat_plus.grid != grid) throw GridMismatch("mode was built on a different grid");
    ModeState s;
    s.n_plus = inverse(m.nhat_plus);
    s.n_minus = inverse(m.nhat_minus);

    auto velocity = [&](const SpectralScalar& phi) {
        SpectralVector u_hat(grid);
        const double dxi = grid.dxi();
        int kx, ky, kz;
        for (std::size_t i = 0; i < grid.spectral_size(); ++i) {
            if (phi.c[i] == Cplx(0.0)) continue;
            grid.wavenumbers(i, kx, ky, kz);
            const double r =
                dxi * std::sqrt(double(kx) * kx + double(ky) * ky + double(kz) * kz);
            const double k[3] = {dxi * kx, dxi * ky, dxi * kz};
            for (int a = 0; a < 3; ++a)
                u_hat.c[a].c[i] = Cplx(0.0, -k[a] / r) * phi.c[i];
        }
        return inverse(u_hat);
    };
    s.u_plus = velocity(m.phihat_plus);
    s.u_minus = velocity(m.phihat_minus);
    return s;
}

void write_mode_state(std::ostream& os, const ModeState& state) {
    write_field_file(os, state.n_plus.grid,
                     {"n_plus", "u_plus_x", "u_plus_y", "u_plus_z", "n_minus", "u_minus_x",
                      "u_minus_y", "u_minus_z"},
                     {&state.n_plus.v, &state.u_plus.c[0].v, &state.u_plus.c[1].v,
                      &state.u_plus.c[2].v, &state.n_minus.v, &state.u_minus.c[0].v,
                      &state.u_minus.c[1].v, &state.u_minus.c[2].v});
}

} // namespace twofluid
