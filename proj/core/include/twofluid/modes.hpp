#pragma once

#include "twofluid/fields.hpp"
#include "twofluid/spectral.hpp"

namespace twofluid {

// Smooth radial cutoff: exactly 1 on [3 eta/2, 3 eta], exactly 0 outside
// (eta, 4 eta), C^infinity in between (exp(-1/t) smooth step).
double cutoff(double r, double eta);

// Spectral amplitudes of the growing normal mode on the shell [eta, 4 eta].
struct GrowingMode {
    SpectralScalar nhat_plus;
    SpectralScalar phihat_plus;
    SpectralScalar nhat_minus;
    SpectralScalar phihat_minus;
    double eta = 0.0;
    double max_residual = 0.0; // worst per-mode residual of the rate system
    int shells = 0;            // distinct lattice shells intersecting the band
};

// Per lattice mode: amplitudes proportional to the lambda1 eigendirection of
// the symbol, cut off to the shell. Throws StableParameters outside the
// unstable regime and GridTooCoarse when fewer than 6 shells hit the band.
GrowingMode build_mode(double eta, const ModelCoefficients& c, const BoxGrid& grid);

struct ModeState {
    ScalarField n_plus;
    VectorField u_plus;
    ScalarField n_minus;
    VectorField u_minus;
};

// Physical initial data: densities by inverse transform, velocities as the
// pure-gradient fields -i xi / r * phihat per component.
ModeState mode_to_state(const GrowingMode& m, const BoxGrid& grid);

// Field file with components n_plus, u_plus_x/y/z, n_minus, u_minus_x/y/z.
void write_mode_state(std::ostream& os, const ModeState& state);

} // namespace twofluid
