#include "twofluid/closure.hpp"

#include <cmath>
#include <limits>

namespace twofluid {

void PhaseLaw::validate() const {
    if (!(gamma_plus >= 1.0) || !(gamma_minus >= 1.0) ||
        !std::isfinite(gamma_plus) || !std::isfinite(gamma_minus))
        throw InvalidLaw("adiabatic exponents must satisfy gamma >= 1");
}

namespace {

// rho^g with fast paths for the common adiabatic exponents; pow dominates the
// pointwise closure otherwise
inline double pow_gamma(double rho, double g) {
    if (g == 2.0) return rho * rho;
    if (g == 1.0) return rho;
    if (g == 0.5) return std::sqrt(rho);
    if (g == 1.5) return rho * std::sqrt(rho);
    if (g == 3.0) return rho * rho * rho;
    return std::pow(rho, g);
}

} // namespace

double PhaseLaw::pressure_plus(double rho) const { return pow_gamma(rho, gamma_plus); }
double PhaseLaw::pressure_minus(double rho) const { return pow_gamma(rho, gamma_minus); }
double PhaseLaw::s2_plus(double rho) const {
    return gamma_plus * pow_gamma(rho, gamma_plus - 1.0);
}
double PhaseLaw::s2_minus(double rho) const {
    return gamma_minus * pow_gamma(rho, gamma_minus - 1.0);
}

void Viscosities::validate() const {
    if (!(mu_plus > 0.0) || !(mu_minus > 0.0))
        throw InvalidLaw("shear viscosities must be positive");
    if (!(mu_plus + lambda_plus > 0.0) || !(mu_minus + lambda_minus > 0.0))
        throw InvalidLaw("mu + lambda must be positive for each phase");
}

namespace {

struct Residual {
    double R_plus, R_minus, f_target;
    const PhaseLaw* phase;

    // phi(rho) = P+(rho) - P-(R- rho/(rho - R+)) - f(R-)
    double value(double rho) const {
        const double rho_m = R_minus * rho / (rho - R_plus);
        return phase->pressure_plus(rho) - phase->pressure_minus(rho_m) - f_target;
    }
    // dphi/drho = s+^2 + s-^2 R+ R- / (rho - R+)^2  > 0 on (R+, inf)
    double derivative(double rho) const {
        const double rho_m = R_minus * rho / (rho - R_plus);
        const double d = rho - R_plus;
        return phase->s2_plus(rho) + phase->s2_minus(rho_m) * R_plus * R_minus / (d * d);
    }
};

} // namespace

LocalClosure closure_at(double R_plus, double R_minus, const PhaseLaw& phase,
                        const CapillaryLaw& cap, std::optional<double> warm_start,
                        int iteration_cap) {
    phase.validate();
    if (!(R_plus > 0.0) || !(R_minus > 0.0))
        throw NonPositiveMass("fraction densities must be positive");

    const Residual res{R_plus, R_minus, cap.value(R_minus), &phase};

    // Bracket: phi -> -inf as rho -> R+^+ and -> +inf as rho -> inf.
    double lo = R_plus * (1.0 + 1e-12);
    double hi = std::max(R_plus + R_minus, 2.0 * R_plus);
    int doublings = 0;
    while (res.value(hi) < 0.0) {
        hi *= 2.0;
        if (++doublings > 200)
            throw NoConvergence("bracketing failed: residual never turns positive");
    }

    double rho = R_plus + R_minus; // exact for symmetric laws with f(R-) = 0
    if (warm_start && *warm_start > lo && *warm_start < hi) rho = *warm_start;
    if (rho <= lo || rho >= hi) rho = 0.5 * (lo + hi);

    bool converged = false;
    for (int it = 0; it < iteration_cap; ++it) {
        const double f = res.value(rho);
        if (f < 0.0) lo = rho; else hi = rho;
        const double df = res.derivative(rho);
        double next = rho - f / df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi); // bisection fallback
        const double step = std::abs(next - rho);
        rho = next;
        if (std::abs(res.value(rho)) < 1e-12 && step < 1e-13) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NoConvergence("closure root iteration exceeded its cap");
    if (!(res.derivative(rho) > 0.0))
        throw NoConvergence("residual slope not positive at the root");
    for (int k = 0; k < 2; ++k) { // polish to the correctly rounded root
        const double next = rho - res.value(rho) / res.derivative(rho);
        if (next > R_plus && std::isfinite(next)) rho = next;
    }

    LocalClosure out;
    out.rho_plus = rho;
    out.rho_minus = R_minus * rho / (rho - R_plus);
    out.alpha_plus = R_plus / rho;
    out.alpha_minus = R_minus / out.rho_minus;
    out.s2_plus = phase.s2_plus(out.rho_plus);
    out.s2_minus = phase.s2_minus(out.rho_minus);
    out.c2 = out.s2_plus * out.s2_minus /
             (out.alpha_minus * out.rho_plus * out.s2_plus +
              out.alpha_plus * out.rho_minus * out.s2_minus);
    out.fval = cap.value(R_minus);
    out.fprime = cap.slope(R_minus);
    return out;
}

LocalClosure solve_equilibrium(const PhaseLaw& phase, const CapillaryLaw& cap) {
    return closure_at(1.0, 1.0, phase, cap);
}

ModelCoefficients derive_coefficients(const LocalClosure& eq, const Viscosities& visc,
                                      const CapillaryLaw& cap) {
    visc.validate();
    const double fp = cap.slope(1.0);

    ModelCoefficients c;
    c.alpha1 = eq.c2 * eq.rho_minus / eq.rho_plus;
    c.alpha2 = eq.c2 + eq.c2 * eq.alpha_minus * fp / eq.s2_minus;
    c.alpha3 = eq.c2;
    c.alpha4 = eq.c2 * eq.rho_plus / eq.rho_minus - eq.c2 * eq.alpha_plus * fp / eq.s2_plus;
    if (!(c.alpha4 > 0.0))
        throw NegativeAlpha4("alpha4 <= 0: f'(1) too large for these laws");

    c.beta1 = std::sqrt(c.alpha1);
    c.beta2 = c.alpha2 * std::sqrt(c.alpha1) / c.alpha4;
    c.beta3 = c.alpha3 * std::sqrt(c.alpha4) / c.alpha1;
    c.beta4 = std::sqrt(c.alpha4);
    c.beta_plus = std::sqrt(c.beta1 / c.beta2);   // NaN when beta2 <= 0 (diagnostic)
    c.beta_minus = std::sqrt(c.beta4 / c.beta3);

    c.nu1_plus = visc.mu_plus / eq.rho_plus;
    c.nu1_minus = visc.mu_minus / eq.rho_minus;
    c.nu2_plus = (visc.mu_plus + visc.lambda_plus) / eq.rho_plus;
    c.nu2_minus = (visc.mu_minus + visc.lambda_minus) / eq.rho_minus;
    c.nu_plus = c.nu1_plus + c.nu2_plus;
    c.nu_minus = c.nu1_minus + c.nu2_minus;

    c.kappa1 = std::sqrt(0.25 * (c.beta1 * c.beta1 - c.beta4 * c.beta4) *
                                (c.beta1 * c.beta1 - c.beta4 * c.beta4) +
                         c.beta1 * c.beta2 * c.beta3 * c.beta4);
    c.kappa2 = 0.5 * (c.beta1 * c.beta1 + c.beta4 * c.beta4);

    // The constant term of the rate quadratic has the closed form
    // -C^2(1,1) f'(1) / rho+(1,1); evaluating it this way makes theta exactly
    // zero at f'(1) = 0 and keeps sign(theta) = sign(f'(1)).
    const double C0 = -eq.c2 * fp / eq.rho_plus;
    const double P = c.nu_plus * c.nu_minus;
    const double Q = c.nu_plus * c.beta4 * c.beta4 + c.nu_minus * c.beta1 * c.beta1;
    const double disc = Q * Q - 4.0 * P * C0;
    c.kappa3 = std::sqrt(disc);
    c.theta = (C0 < 0.0) ? -2.0 * C0 / (Q + std::sqrt(disc)) : 0.0;
    return c;
}

double growth_rate(const ModelCoefficients& c) {
    const double P = c.nu_plus * c.nu_minus;
    const double Q = c.nu_plus * c.beta4 * c.beta4 + c.nu_minus * c.beta1 * c.beta1;
    const double b14 = c.beta1 * c.beta4;
    const double C0 = b14 * (b14 - c.beta2 * c.beta3);
    if (!(C0 < 0.0)) return 0.0;
    const double disc = Q * Q - 4.0 * P * C0;
    return -2.0 * C0 / (Q + std::sqrt(disc));
}

ModelCoefficients coefficients_from_betas(double beta1, double beta2, double beta3,
                                          double beta4, double nu_plus, double nu_minus,
                                          std::optional<double> nu1_plus,
                                          std::optional<double> nu1_minus) {
    if (!(beta1 > 0.0) || !(beta4 > 0.0) || !(nu_plus > 0.0) || !(nu_minus > 0.0))
        throw InvalidLaw("beta1, beta4, nu+ and nu- must be positive");
    ModelCoefficients c;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.beta3 = beta3;
    c.beta4 = beta4;
    // invert the scaling block
    c.alpha1 = beta1 * beta1;
    c.alpha4 = beta4 * beta4;
    c.alpha2 = beta2 * c.alpha4 / beta1;
    c.alpha3 = beta3 * c.alpha1 / beta4;
    c.beta_plus = std::sqrt(beta1 / beta2);
    c.beta_minus = std::sqrt(beta4 / beta3);
    c.nu_plus = nu_plus;
    c.nu_minus = nu_minus;
    c.nu1_plus = nu1_plus.value_or(0.5 * nu_plus);
    c.nu1_minus = nu1_minus.value_or(0.5 * nu_minus);
    c.nu2_plus = nu_plus - c.nu1_plus;
    c.nu2_minus = nu_minus - c.nu1_minus;
    c.kappa1 = std::sqrt(0.25 * (beta1 * beta1 - beta4 * beta4) *
                                (beta1 * beta1 - beta4 * beta4) +
                         beta1 * beta2 * beta3 * beta4);
    c.kappa2 = 0.5 * (beta1 * beta1 + beta4 * beta4);
    const double P = nu_plus * nu_minus;
    const double Q = nu_plus * beta4 * beta4 + nu_minus * beta1 * beta1;
    const double b14 = beta1 * beta4;
    const double C0 = b14 * (b14 - beta2 * beta3);
    c.kappa3 = std::sqrt(Q * Q - 4.0 * P * C0);
    c.theta = growth_rate(c);
    return c;
}

} // namespace twofluid
