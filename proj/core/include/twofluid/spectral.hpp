#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "twofluid/closure.hpp"

namespace twofluid {

using Mat4 = Eigen::Matrix4d;
using Mat4c = Eigen::Matrix4cd;
using Cplx = std::complex<double>;

// Monic quartic det(lambda I - A(r)) = l^4 + c3 l^3 + c2 l^2 + c1 l + c0.
struct QuarticCoeffs {
    double c4 = 1.0;
    double c3 = 0.0;
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;

    Cplx eval(Cplx l) const { return (((l + c3) * l + c2) * l + c1) * l + c0; }
    Cplx deriv(Cplx l) const {
        return ((4.0 * l + 3.0 * c3) * l + 2.0 * c2) * l + c1;
    }
};

// Eigenvalues and Lagrange projectors of the compressible-part symbol at one
// radial frequency. When two eigenvalues nearly coincide the projector
// products lose all accuracy; the decomposition is then flagged degenerate
// and the projectors are withheld.
struct SpectralDecomposition {
    std::array<Cplx, 4> lambdas{};
    std::array<Mat4c, 4> projectors{};
    bool degenerate = false;
};

struct ExpansionReport {
    enum class Regime { low, high };
    Regime regime = Regime::low;
    std::array<Cplx, 4> predicted{};
    std::array<Cplx, 4> actual{}; // permuted into predicted order
    double defect = 0.0;          // max matched distance
};

struct ProjectorAsymptoticsReport {
    ExpansionReport::Regime regime = ExpansionReport::Regime::low;
    std::array<double, 4> defects{}; // max-entry distance per branch
};

// 4x4 symbol of the compressible subsystem; depends on xi only through |xi|.
Mat4 symbol_matrix(double r, const ModelCoefficients& c);

QuarticCoeffs characteristic_coeffs(double r, const ModelCoefficients& c);

// All four roots of the characteristic quartic: companion-matrix eigensolve
// on a rescaled polynomial, then Newton polish. Ordering: real roots first by
// descending real part, then conjugate pairs by descending real part with the
// positive-imaginary member first.
std::array<Cplx, 4> eigenvalues(double r, const ModelCoefficients& c);

// Unique positive real root, by bisection on (0, theta] where the quartic is
// strictly increasing. Requires the unstable regime b1 b4 < b2 b3.
double lambda1(double r, const ModelCoefficients& c);

SpectralDecomposition projectors(double r, const ModelCoefficients& c);

// exp(t A(r)); spectral sum over the projectors when the decomposition is
// clean, scaling-and-squaring otherwise. The result is real up to roundoff.
Mat4c propagator(double r, const ModelCoefficients& c, double t);

// Pade scaling-and-squaring exponential for the degenerate fallback.
Mat4 expm(const Mat4& a);

// Taylor predictions of the four branches near r = 0 (valid for r <= eta2)
// and for r large (valid for r >= eta1), matched against the computed
// eigenvalues. eta2 defaults to the module threshold 0.01; eta1 comes from
// eta_threshold.
ExpansionReport low_freq_expansion(double r, const ModelCoefficients& c,
                                   double eta2 = 0.01);
ExpansionReport high_freq_expansion(double r, const ModelCoefficients& c, double eta1);

// Leading-order constant projector matrices in each regime, compared branch
// by branch against the computed ones.
ProjectorAsymptoticsReport projector_asymptotics(double r, const ModelCoefficients& c,
                                                 double eta1, double eta2 = 0.01);

// Max over log-spaced samples of max_i Re lambda_i(r).
double spectral_bound(double r_lo, double r_hi, const ModelCoefficients& c, int samples);

// Smallest grid-searched eta with lambda1(r) >= theta - vartheta for every
// sampled r >= eta, the tail beyond the probe ceiling certified by the
// empirical high-frequency defect bound.
double eta_threshold(const ModelCoefficients& c, double vartheta);

// One row per log-spaced sample, eigenvalues in the fixed order above.
// Header: r,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,re_l4,im_l4,theta
void write_dispersion_csv(std::ostream& os, const ModelCoefficients& c, double r_lo,
                          double r_hi, int samples);

} // namespace twofluid
