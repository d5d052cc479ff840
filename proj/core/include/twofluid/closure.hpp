#pragma once

#include <optional>

#include "twofluid/errors.hpp"

namespace twofluid {

// Barotropic pressure law P(rho) = rho^gamma for each phase (unit amplitudes).
struct PhaseLaw {
    double gamma_plus = 2.0;
    double gamma_minus = 2.0;

    void validate() const;
    double pressure_plus(double rho) const;
    double pressure_minus(double rho) const;
    // squared sound speeds s^2 = dP/drho = gamma * rho^(gamma-1)
    double s2_plus(double rho) const;
    double s2_minus(double rho) const;
};

// Pressure-difference law as a cubic polynomial in (s - 1); keeps f and f'
// exact and reproducible.
struct CapillaryLaw {
    double f1 = 0.0; // f(1)
    double fp = 0.0; // f'(1)
    double c2 = 0.0;
    double c3 = 0.0;

    double value(double s) const {
        const double d = s - 1.0;
        return f1 + d * (fp + d * (c2 + d * c3));
    }
    double slope(double s) const {
        const double d = s - 1.0;
        return fp + d * (2.0 * c2 + d * 3.0 * c3);
    }
};

struct Viscosities {
    double mu_plus = 1.0;
    double mu_minus = 1.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;

    void validate() const; // mu > 0 and mu + lambda > 0
};

// Pointwise thermodynamic state at fraction densities (R+, R-).
struct LocalClosure {
    double rho_plus = 0.0;
    double rho_minus = 0.0;
    double alpha_plus = 0.0;
    double alpha_minus = 0.0;
    double s2_plus = 0.0;
    double s2_minus = 0.0;
    double c2 = 0.0; // pressure-coupling coefficient C^2
    double fval = 0.0;
    double fprime = 0.0;
};

// Scaled linear coefficients plus the derived rates and asymptotic constants.
struct ModelCoefficients {
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0, alpha4 = 0.0;
    double beta1 = 0.0, beta2 = 0.0, beta3 = 0.0, beta4 = 0.0;
    double beta_plus = 0.0, beta_minus = 0.0;
    double nu1_plus = 0.0, nu1_minus = 0.0;
    double nu2_plus = 0.0, nu2_minus = 0.0;
    double nu_plus = 0.0, nu_minus = 0.0;
    double theta = 0.0;
    double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;

    bool unstable() const { return beta1 * beta4 < beta2 * beta3; }
};

// Root of P+(rho) - P-(R- rho / (rho - R+)) - f(R-) = 0 on (R+, inf), plus
// every derived equilibrium quantity. The residual is strictly increasing in
// rho, so the bracketed Newton always converges for valid inputs.
LocalClosure closure_at(double R_plus, double R_minus, const PhaseLaw& phase,
                        const CapillaryLaw& cap,
                        std::optional<double> warm_start = std::nullopt,
                        int iteration_cap = 200);

// closure_at at the reference state (1, 1), with the residual and the
// positivity of d(residual)/drho re-verified at the root.
LocalClosure solve_equilibrium(const PhaseLaw& phase, const CapillaryLaw& cap);

// Linearization coefficients around the (1,1) equilibrium and their scaled
// form. Throws NegativeAlpha4 when f'(1) is too large for the chosen laws.
ModelCoefficients derive_coefficients(const LocalClosure& eq, const Viscosities& visc,
                                      const CapillaryLaw& cap);

// Largest real root of nu+ nu- s^2 + (nu+ b4^2 + nu- b1^2) s
//                      + (b1^2 b4^2 - b1 b2 b3 b4) = 0, clamped at zero.
double growth_rate(const ModelCoefficients& c);

// Coefficients filled directly from the scaled betas and total viscosities,
// for runs that bypass the physical laws. nu1 defaults to nu/2 per phase; it
// only enters the incompressible heat factors.
ModelCoefficients coefficients_from_betas(double beta1, double beta2, double beta3,
                                          double beta4, double nu_plus, double nu_minus,
                                          std::optional<double> nu1_plus = std::nullopt,
                                          std::optional<double> nu1_minus = std::nullopt);

} // namespace twofluid
