#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "twofluid/closure.hpp"
#include "twofluid/fields.hpp"

namespace twofluid {

// Plain-text key = value run configuration. Either the physical laws
// (gamma_plus, gamma_minus, f1, fp, c2, c3, mu_plus, mu_minus, lambda_plus,
// lambda_minus) or the direct scaled-coefficient override (beta1..beta4,
// nu_plus, nu_minus, optional nu1_plus/nu1_minus) must be present, never both.
struct RunConfig {
    bool direct = false;

    PhaseLaw phase;
    CapillaryLaw cap;
    Viscosities visc;

    double beta1 = 0, beta2 = 0, beta3 = 0, beta4 = 0;
    double nu_plus = 0, nu_minus = 0;
    double nu1_plus = -1, nu1_minus = -1; // < 0: default nu/2

    int n = 32;
    double box = 0.0;  // 0: derived from eta when a grid is needed
    double eta = 0.0;  // 0: eta_threshold default
    double vartheta = 0.0; // 0: theta/10
    double eps = 5e-4;
    double eps0 = 0.05;
    double t_end = 0.0; // 0: experiment default
    double dt = 0.0;    // 0: stability-cap default
    int stride = 1;
    std::string out_dir = ".";
    std::uint64_t seed = 1;

    ModelCoefficients coefficients() const;
};

RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);

} // namespace twofluid
