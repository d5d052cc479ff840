#include "twofluid/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace twofluid {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse number '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("key '" + key + "': trailing characters in '" + value + "'");
    if (!std::isfinite(x)) throw ConfigError("key '" + key + "' must be finite");
    return x;
}

} // namespace

RunConfig parse_config(std::istream& is) {
    RunConfig cfg;
    bool saw_laws = false, saw_direct = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "out_dir") {
            cfg.out_dir = value;
            continue;
        }
        if (key == "seed") {
            cfg.seed = std::uint64_t(parse_number(key, value));
            continue;
        }
        const double x = parse_number(key, value);
        if (key == "gamma_plus") { cfg.phase.gamma_plus = x; saw_laws = true; }
        else if (key == "gamma_minus") { cfg.phase.gamma_minus = x; saw_laws = true; }
        else if (key == "f1") { cfg.cap.f1 = x; saw_laws = true; }
        else if (key == "fp") { cfg.cap.fp = x; saw_laws = true; }
        else if (key == "c2") { cfg.cap.c2 = x; saw_laws = true; }
        else if (key == "c3") { cfg.cap.c3 = x; saw_laws = true; }
        else if (key == "mu_plus") { cfg.visc.mu_plus = x; saw_laws = true; }
        else if (key == "mu_minus") { cfg.visc.mu_minus = x; saw_laws = true; }
        else if (key == "lambda_plus") { cfg.visc.lambda_plus = x; saw_laws = true; }
        else if (key == "lambda_minus") { cfg.visc.lambda_minus = x; saw_laws = true; }
        else if (key == "beta1") { cfg.beta1 = x; saw_direct = true; }
        else if (key == "beta2") { cfg.beta2 = x; saw_direct = true; }
        else if (key == "beta3") { cfg.beta3 = x; saw_direct = true; }
        else if (key == "beta4") { cfg.beta4 = x; saw_direct = true; }
        else if (key == "nu_plus") { cfg.nu_plus = x; saw_direct = true; }
        else if (key == "nu_minus") { cfg.nu_minus = x; saw_direct = true; }
        else if (key == "nu1_plus") { cfg.nu1_plus = x; saw_direct = true; }
        else if (key == "nu1_minus") { cfg.nu1_minus = x; saw_direct = true; }
        else if (key == "n") { cfg.n = int(x); }
        else if (key == "box") { cfg.box = x; }
        else if (key == "eta") { cfg.eta = x; }
        else if (key == "vartheta") { cfg.vartheta = x; }
        else if (key == "eps") { cfg.eps = x; }
        else if (key == "eps0") { cfg.eps0 = x; }
        else if (key == "t_end") { cfg.t_end = x; }
        else if (key == "dt") { cfg.dt = x; }
        else if (key == "stride") { cfg.stride = int(x); }
        else throw ConfigError("unknown key '" + key + "'");
    }
    if (saw_laws && saw_direct)
        throw ConfigError("config mixes physical laws with the direct beta override");
    if (!saw_laws && !saw_direct)
        throw ConfigError("config needs either physical laws or the beta override");
    cfg.direct = saw_direct;
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(f);
}

ModelCoefficients RunConfig::coefficients() const {
    if (direct) {
        return coefficients_from_betas(beta1, beta2, beta3, beta4, nu_plus, nu_minus,
                                       nu1_plus > 0 ? std::optional<double>(nu1_plus)
                                                    : std::nullopt,
                                       nu1_minus > 0 ? std::optional<double>(nu1_minus)
                                                     : std::nullopt);
    }
    const LocalClosure eq = solve_equilibrium(phase, cap);
    return derive_coefficients(eq, visc, cap);
}

} // namespace twofluid
