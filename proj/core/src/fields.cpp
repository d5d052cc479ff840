#include "twofluid/fields.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>

#include <fftw3.h>
#include <nlohmann/json.hpp>

namespace twofluid {

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian raw doubles");

BoxGrid::BoxGrid(int n_, double box_) : n(n_), box(box_) {
    if (n < 8 || (n & (n - 1)) != 0)
        throw ConfigError("grid size must be a power of two >= 8");
    if (!(box > 0.0) || !std::isfinite(box))
        throw ConfigError("box length must be positive and finite");
}

double BoxGrid::dxi() const { return 2.0 * std::numbers::pi / box; }
double BoxGrid::nyquist() const { return dxi() * (n / 2); }

void BoxGrid::wavenumbers(std::size_t idx, int& kx, int& ky, int& kz) const {
    const int half = n / 2 + 1;
    kx = int(idx % half);
    const std::size_t rest = idx / half;
    int y = int(rest % n);
    int z = int(rest / n);
    ky = y <= n / 2 ? y : y - n;
    kz = z <= n / 2 ? z : z - n;
}

namespace {

int g_transform_threads = 1;

struct FftPlans {
    std::vector<double> rbuf;
    std::vector<Cplx> cbuf;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    explicit FftPlans(int n) {
        rbuf.resize(std::size_t(n) * n * n);
        cbuf.resize(std::size_t(n) * n * (n / 2 + 1));
        auto* cptr = reinterpret_cast<fftw_complex*>(cbuf.data());
#ifdef TWOFLUID_FFTW_THREADS
        fftw_plan_with_nthreads(g_transform_threads);
#endif
        fwd = fftw_plan_dft_r2c_3d(n, n, n, rbuf.data(), cptr, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(n, n, n, cptr, rbuf.data(), FFTW_ESTIMATE);
    }
    ~FftPlans() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
};

std::map<int, FftPlans>& plan_cache() {
    static std::map<int, FftPlans> cache;
    return cache;
}

FftPlans& plans_for(int n) {
    auto& cache = plan_cache();
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.try_emplace(n, n).first;
    return it->second;
}

inline void check_grid(const BoxGrid& a, const BoxGrid& b) {
    if (a != b) throw GridMismatch("fields live on different grids");
}

} // namespace

void set_transform_threads(int n) {
    if (n < 1) throw ConfigError("transform thread count must be >= 1");
#ifdef TWOFLUID_FFTW_THREADS
    static const bool initialized = fftw_init_threads() != 0;
    if (initialized && n != g_transform_threads) {
        g_transform_threads = n;
        plan_cache().clear();
    }
#else
    (void)n;
#endif
}

SpectralScalar transform(const ScalarField& f) {
    if (f.v.size() != f.grid.physical_size())
        throw GridMismatch("field buffer does not match its grid");
    auto& p = plans_for(f.grid.n);
    std::copy(f.v.begin(), f.v.end(), p.rbuf.begin());
    fftw_execute(p.fwd);
    SpectralScalar out(f.grid);
    const double scale = f.grid.volume() / double(f.grid.physical_size());
    for (std::size_t i = 0; i < out.c.size(); ++i) out.c[i] = p.cbuf[i] * scale;
    return out;
}

ScalarField inverse(const SpectralScalar& s) {
    if (s.c.size() != s.grid.spectral_size())
        throw GridMismatch("spectral buffer does not match its grid");
    auto& p = plans_for(s.grid.n);
    std::copy(s.c.begin(), s.c.end(), p.cbuf.begin()); // c2r destroys its input
    fftw_execute(p.bwd);
    ScalarField out(s.grid);
    const double scale = 1.0 / s.grid.volume();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = p.rbuf[i] * scale;
    return out;
}

SpectralVector transform(const VectorField& f) {
    SpectralVector out;
    for (int j = 0; j < 3; ++j) {
        check_grid(f.c[j].grid, f.grid());
        out.c[j] = transform(f.c[j]);
    }
    return out;
}

VectorField inverse(const SpectralVector& s) {
    VectorField out;
    for (int j = 0; j < 3; ++j) out.c[j] = inverse(s.c[j]);
    return out;
}

SpectralScalar apply_multiplier(const SpectralScalar& s,
                                const std::function<Cplx(double, double, double, double)>& m) {
    SpectralScalar out(s.grid);
    const double dxi = s.grid.dxi();
    int kx, ky, kz;
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        s.grid.wavenumbers(i, kx, ky, kz);
        const double xi_x = dxi * kx, xi_y = dxi * ky, xi_z = dxi * kz;
        // the unpaired x-Nyquist column represents both +-n/2; radial weight
        // uses the -n/2 convention, which only affects the sign-free |xi|
        const double r = dxi * std::sqrt(double(kx) * kx + double(ky) * ky + double(kz) * kz);
        const Cplx w = m(xi_x, xi_y, xi_z, r);
        if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
            throw UndefinedAtZero(i == 0 ? "multiplier undefined at the zero mode"
                                         : "multiplier not finite on the lattice");
        out.c[i] = s.c[i] * w;
    }
    return out;
}

SpectralScalar apply_lambda(const SpectralScalar& s, double power) {
    SpectralScalar out(s.grid);
    const double dxi = s.grid.dxi();
    int kx, ky, kz;
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        s.grid.wavenumbers(i, kx, ky, kz);
        const double r2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
        if (r2 == 0.0) {
            out.c[i] = power == 0.0 ? s.c[i] : Cplx(0.0);
        } else {
            out.c[i] = s.c[i] * std::pow(dxi * std::sqrt(r2), power);
        }
    }
    return out;
}

SpectralScalar derivative(const SpectralScalar& s, int axis) {
    SpectralScalar out(s.grid);
    const double dxi = s.grid.dxi();
    const int nyq = s.grid.n / 2;
    int k[3];
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        s.grid.wavenumbers(i, k[0], k[1], k[2]);
        if (k[axis] == nyq || k[axis] == -nyq) {
            out.c[i] = Cplx(0.0);
        } else {
            out.c[i] = s.c[i] * Cplx(0.0, dxi * k[axis]);
        }
    }
    return out;
}

void dealias(SpectralScalar& s) {
    const int cut = s.grid.n / 3;
    int kx, ky, kz;
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        s.grid.wavenumbers(i, kx, ky, kz);
        if (std::abs(kx) > cut || std::abs(ky) > cut || std::abs(kz) > cut)
            s.c[i] = Cplx(0.0);
    }
}

static HodgeParts hodge_split_spectral(const SpectralVector& u_hat) {
    const BoxGrid& g = u_hat.grid();
    HodgeParts parts;
    parts.phi_hat = SpectralScalar(g);
    parts.psi_hat = SpectralVector(g);
    const double dxi = g.dxi();
    const int nyq = g.n / 2;
    int k[3];
    for (std::size_t i = 0; i < g.spectral_size(); ++i) {
        g.wavenumbers(i, k[0], k[1], k[2]);
        double xt[3]; // derivative-convention frequency (Nyquist zeroed)
        double rt2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            xt[a] = (k[a] == nyq || k[a] == -nyq) ? 0.0 : dxi * k[a];
            rt2 += xt[a] * xt[a];
        }
        const Cplx uj[3] = {u_hat.c[0].c[i], u_hat.c[1].c[i], u_hat.c[2].c[i]};
        if (rt2 == 0.0) {
            if (i == 0)
                for (int a = 0; a < 3; ++a) parts.mean[a] = uj[a].real() / g.volume();
            else
                for (int a = 0; a < 3; ++a) parts.psi_hat.c[a].c[i] = uj[a];
            continue;
        }
        const double rt = std::sqrt(rt2);
        const Cplx phi = Cplx(0.0, 1.0) * (xt[0] * uj[0] + xt[1] * uj[1] + xt[2] * uj[2]) / rt;
        parts.phi_hat.c[i] = phi;
        for (int a = 0; a < 3; ++a)
            parts.psi_hat.c[a].c[i] = uj[a] + Cplx(0.0, xt[a] / rt) * phi;
    }
    return parts;
}

HodgeParts hodge_split(const VectorField& u) { return hodge_split_spectral(transform(u)); }

VectorField hodge_reconstruct(const HodgeParts& parts) {
    const BoxGrid& g = parts.phi_hat.grid;
    SpectralVector u_hat(g);
    const double dxi = g.dxi();
    const int nyq = g.n / 2;
    int k[3];
    for (std::size_t i = 0; i < g.spectral_size(); ++i) {
        g.wavenumbers(i, k[0], k[1], k[2]);
        double xt[3];
        double rt2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            xt[a] = (k[a] == nyq || k[a] == -nyq) ? 0.0 : dxi * k[a];
            rt2 += xt[a] * xt[a];
        }
        const double rt = std::sqrt(rt2);
        for (int a = 0; a < 3; ++a) {
            Cplx v = parts.psi_hat.c[a].c[i];
            if (rt2 > 0.0) v += Cplx(0.0, -xt[a] / rt) * parts.phi_hat.c[i];
            u_hat.c[a].c[i] = v;
        }
    }
    for (int a = 0; a < 3; ++a) u_hat.c[a].c[0] += parts.mean[a] * g.volume();
    return inverse(u_hat);
}

namespace {

double spectral_weighted_sum(const SpectralScalar& s, int k) {
    const BoxGrid& g = s.grid;
    const double dxi2 = g.dxi() * g.dxi();
    const int half = g.n / 2;
    double sum = 0.0;
    int kx, ky, kz;
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        g.wavenumbers(i, kx, ky, kz);
        const double w = (kx == 0 || kx == half) ? 1.0 : 2.0;
        const double r2 = dxi2 * (double(kx) * kx + double(ky) * ky + double(kz) * kz);
        sum += w * std::pow(1.0 + r2, k) * std::norm(s.c[i]);
    }
    return sum;
}

} // namespace

double sobolev_norm(const SpectralScalar& s, int k) {
    if (k < 0 || k > 4) throw OutOfRegime("sobolev_norm supports k in 0..4");
    return std::sqrt(spectral_weighted_sum(s, k) / s.grid.volume());
}

double sobolev_norm(const ScalarField& f, int k) { return sobolev_norm(transform(f), k); }

double sobolev_norm(const SpectralVector& s, int k) {
    if (k < 0 || k > 4) throw OutOfRegime("sobolev_norm supports k in 0..4");
    double sum = 0.0;
    for (int a = 0; a < 3; ++a) sum += spectral_weighted_sum(s.c[a], k);
    return std::sqrt(sum / s.grid().volume());
}

double l2_physical(const ScalarField& f) {
    double sum = 0.0;
    for (double x : f.v) sum += x * x;
    return std::sqrt(sum * f.grid.volume() / double(f.v.size()));
}

void write_field_file(std::ostream& os, const BoxGrid& grid,
                      const std::vector<std::string>& names,
                      const std::vector<const std::vector<double>*>& components) {
    if (names.size() != components.size())
        throw ConfigError("component name/data count mismatch");
    nlohmann::json header;
    header["schema"] = "field/1";
    header["n"] = grid.n;
    header["box"] = grid.box;
    header["components"] = components.size();
    header["names"] = names;
    os << header.dump() << '\n';
    for (const auto* comp : components) {
        if (comp->size() != grid.physical_size())
            throw GridMismatch("component size does not match the grid");
        os.write(reinterpret_cast<const char*>(comp->data()),
                 std::streamsize(comp->size() * sizeof(double)));
    }
}

FieldFileData read_field_file(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("missing field file header");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("schema", "") != "field/1")
        throw ConfigError("not a field/1 file");
    FieldFileData out;
    out.grid = BoxGrid(header.at("n").get<int>(), header.at("box").get<double>());
    out.names = header.at("names").get<std::vector<std::string>>();
    const std::size_t ncomp = header.at("components").get<std::size_t>();
    if (out.names.size() != ncomp) throw ConfigError("field file header inconsistent");
    out.components.resize(ncomp);
    for (auto& comp : out.components) {
        comp.resize(out.grid.physical_size());
        is.read(reinterpret_cast<char*>(comp.data()),
                std::streamsize(comp.size() * sizeof(double)));
        if (!is) throw ConfigError("field file truncated");
    }
    return out;
}

} // namespace twofluid
