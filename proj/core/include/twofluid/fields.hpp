#pragma once

#include <array>
#include <complex>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "twofluid/errors.hpp"

namespace twofluid {

using Cplx = std::complex<double>;

// Periodic box [0, L)^3 on n^3 points, n a power of two. Spectral data lives
// on the conjugate-symmetric half lattice kx in [0, n/2] (x fastest in both
// layouts). Radial quantities (norms, Lambda^s) use the full lattice
// frequency with the Nyquist index mapped to -n/2; direction-dependent
// operators (gradients, divergence, the Hodge split and the per-mode
// evolution) zero the unpaired Nyquist planes, which is what keeps them
// reality-preserving on a real lattice.
struct BoxGrid {
    int n = 0;
    double box = 0.0;

    BoxGrid() = default;
    BoxGrid(int n_, double box_);

    std::size_t physical_size() const { return std::size_t(n) * n * n; }
    std::size_t spectral_size() const { return std::size_t(n) * n * (n / 2 + 1); }
    double volume() const { return box * box * box; }
    double dxi() const;      // lattice spacing in frequency
    double nyquist() const;  // (2 pi / L) * n / 2

    // integer wavenumbers of a spectral index (kx in [0, n/2])
    void wavenumbers(std::size_t idx, int& kx, int& ky, int& kz) const;
    bool operator==(const BoxGrid& o) const { return n == o.n && box == o.box; }
    bool operator!=(const BoxGrid& o) const { return !(*this == o); }
};

struct ScalarField {
    BoxGrid grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const BoxGrid& g) : grid(g), v(g.physical_size(), 0.0) {}
};

struct VectorField {
    std::array<ScalarField, 3> c;

    VectorField() = default;
    explicit VectorField(const BoxGrid& g) : c{ScalarField(g), ScalarField(g), ScalarField(g)} {}
    const BoxGrid& grid() const { return c[0].grid; }
};

struct SpectralScalar {
    BoxGrid grid;
    std::vector<Cplx> c;

    SpectralScalar() = default;
    explicit SpectralScalar(const BoxGrid& g) : grid(g), c(g.spectral_size(), Cplx(0.0)) {}
};

struct SpectralVector {
    std::array<SpectralScalar, 3> c;

    SpectralVector() = default;
    explicit SpectralVector(const BoxGrid& g)
        : c{SpectralScalar(g), SpectralScalar(g), SpectralScalar(g)} {}
    const BoxGrid& grid() const { return c[0].grid; }
};

// Thread count for the transform engine; existing plans are re-created on the
// next use. No-op when FFTW was built without threading.
void set_transform_threads(int n);

// Forward transform with the integral normalization coef = (L/n)^3 sum f e^{-i x.xi};
// inverse applies 1/L^3. Plancherel then holds without extra factors.
SpectralScalar transform(const ScalarField& f);
ScalarField inverse(const SpectralScalar& s);
SpectralVector transform(const VectorField& f);
VectorField inverse(const SpectralVector& s);

// Coefficient-wise product with m(xi_x, xi_y, xi_z, |xi|). Throws
// UndefinedAtZero when m is not finite at the zero mode (or anywhere on the
// lattice).
SpectralScalar apply_multiplier(const SpectralScalar& s,
                                const std::function<Cplx(double, double, double, double)>& m);

// Lambda^power with the zero mode mapped to 0 for power != 0.
SpectralScalar apply_lambda(const SpectralScalar& s, double power);

// i xi_axis with the Nyquist planes of that axis zeroed.
SpectralScalar derivative(const SpectralScalar& s, int axis);

// Zeroes every mode with |k_axis| > n/3 on any axis (sharp 2/3-rule mask).
void dealias(SpectralScalar& s);

struct HodgeParts {
    SpectralScalar phi_hat;               // Lambda^{-1} div u (zero at xi = 0)
    SpectralVector psi_hat;               // divergence-free remainder
    std::array<double, 3> mean{0, 0, 0};  // zero mode, restored on reconstruct
};

HodgeParts hodge_split(const VectorField& u);
VectorField hodge_reconstruct(const HodgeParts& parts);

// Sobolev norm (sum_xi (1+r^2)^k |coef|^2 / L^3)^(1/2); k = 0 is the L2 norm.
double sobolev_norm(const SpectralScalar& s, int k);
double sobolev_norm(const ScalarField& f, int k);
double sobolev_norm(const SpectralVector& s, int k);

// Physical-space L2 quadrature, the independent route to sobolev_norm(.,0).
double l2_physical(const ScalarField& f);

// Field file: one JSON header line {"schema":"field/1",...} then raw
// little-endian doubles, x fastest, one component block after another.
void write_field_file(std::ostream& os, const BoxGrid& grid,
                      const std::vector<std::string>& names,
                      const std::vector<const std::vector<double>*>& components);

struct FieldFileData {
    BoxGrid grid;
    std::vector<std::string> names;
    std::vector<std::vector<double>> components;
};
FieldFileData read_field_file(std::istream& is);

} // namespace twofluid
