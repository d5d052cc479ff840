#include "twofluid/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "twofluid/format.hpp"

namespace twofluid {

Mat4 symbol_matrix(double r, const ModelCoefficients& c) {
    if (!(r >= 0.0)) throw OutOfRegime("symbol_matrix requires r >= 0");
    Mat4 a = Mat4::Zero();
    a(0, 1) = -c.beta1 * r;
    a(1, 0) = c.beta1 * r;
    a(1, 1) = -c.nu_plus * r * r;
    a(1, 2) = c.beta2 * r;
    a(2, 3) = -c.beta4 * r;
    a(3, 0) = c.beta3 * r;
    a(3, 2) = c.beta4 * r;
    a(3, 3) = -c.nu_minus * r * r;
    return a;
}

QuarticCoeffs characteristic_coeffs(double r, const ModelCoefficients& c) {
    if (!(r >= 0.0)) throw OutOfRegime("characteristic_coeffs requires r >= 0");
    const double r2 = r * r, r4 = r2 * r2;
    const double b1s = c.beta1 * c.beta1, b4s = c.beta4 * c.beta4;
    const double b14 = c.beta1 * c.beta4;
    QuarticCoeffs q;
    q.c3 = (c.nu_plus + c.nu_minus) * r2;
    q.c2 = (b1s + b4s) * r2 + c.nu_plus * c.nu_minus * r4;
    q.c1 = (c.nu_plus * b4s + c.nu_minus * b1s) * r4;
    q.c0 = b14 * (b14 - c.beta2 * c.beta3) * r4;
    return q;
}

namespace {

// Newton polish on the rescaled monic quartic; real iterates stay real.
template <typename T>
T polish_root(const QuarticCoeffs& g, T x) {
    for (int it = 0; it < 12; ++it) {
        const T f = (((x + g.c3) * x + g.c2) * x + g.c1) * x + g.c0;
        const T df = ((4.0 * x + 3.0 * g.c3) * x + 2.0 * g.c2) * x + g.c1;
        if (std::abs(df) == 0.0) break;
        const T step = f / df;
        x -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

std::array<Cplx, 4> solve_quartic_scaled(const QuarticCoeffs& q, double scale) {
    const double s = std::max(scale, std::numeric_limits<double>::min());
    QuarticCoeffs g;
    g.c3 = q.c3 / s;
    g.c2 = q.c2 / (s * s);
    g.c1 = q.c1 / (s * s * s);
    g.c0 = q.c0 / (s * s * s * s);

    Mat4 comp = Mat4::Zero();
    comp(1, 0) = comp(2, 1) = comp(3, 2) = 1.0;
    comp(0, 3) = -g.c0;
    comp(1, 3) = -g.c1;
    comp(2, 3) = -g.c2;
    comp(3, 3) = -g.c3;
    Eigen::EigenSolver<Mat4> es(comp, /*computeEigenvectors=*/false);
    Eigen::Vector4cd mu = es.eigenvalues();

    // Real Schur yields exact conjugate pairs; polish one member per pair and
    // mirror it so the set stays conjugate-closed.
    std::array<Cplx, 4> out{};
    std::array<bool, 4> done{};
    for (int i = 0; i < 4; ++i) {
        if (done[i]) continue;
        Cplx m = mu(i);
        if (m.imag() == 0.0) {
            out[i] = Cplx(polish_root<double>(g, m.real()), 0.0);
            done[i] = true;
            continue;
        }
        int partner = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 4; ++j) {
            if (j == i || done[j]) continue;
            const double d = std::abs(mu(j) - std::conj(m));
            if (d < best) { best = d; partner = j; }
        }
        Cplx p = polish_root<Cplx>(g, m.imag() > 0.0 ? m : std::conj(m));
        if (p.imag() < 0.0) p = std::conj(p);
        if (m.imag() > 0.0) {
            out[i] = p;
            if (partner >= 0) { out[partner] = std::conj(p); done[partner] = true; }
        } else {
            out[i] = std::conj(p);
            if (partner >= 0) { out[partner] = p; done[partner] = true; }
        }
        done[i] = true;
    }
    for (auto& l : out) l *= s;
    return out;
}

void order_eigenvalues(std::array<Cplx, 4>& l) {
    std::sort(l.begin(), l.end(), [](const Cplx& a, const Cplx& b) {
        const bool ra = a.imag() == 0.0, rb = b.imag() == 0.0;
        if (ra != rb) return ra; // real roots first
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag(); // positive imaginary member first
    });
}

// Assignment of predicted to actual branches minimizing the total distance.
std::array<int, 4> match_branches(const std::array<Cplx, 4>& pred,
                                  const std::array<Cplx, 4>& act) {
    std::array<int, 4> best_perm{0, 1, 2, 3}, p{0, 1, 2, 3};
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += std::abs(pred[i] - act[p[i]]);
        if (s < best) { best = s; best_perm = p; }
    } while (std::next_permutation(p.begin(), p.end()));
    return best_perm;
}

ExpansionReport make_report(ExpansionReport::Regime regime,
                            const std::array<Cplx, 4>& pred,
                            const std::array<Cplx, 4>& act) {
    ExpansionReport rep;
    rep.regime = regime;
    rep.predicted = pred;
    const auto perm = match_branches(pred, act);
    double defect = 0.0;
    for (int i = 0; i < 4; ++i) {
        rep.actual[i] = act[perm[i]];
        defect = std::max(defect, std::abs(pred[i] - act[perm[i]]));
    }
    rep.defect = defect;
    return rep;
}

std::array<Cplx, 4> low_freq_predictions(double r, const ModelCoefficients& c) {
    const double b1s = c.beta1 * c.beta1, b4s = c.beta4 * c.beta4;
    const double a = 0.25 * (c.nu_plus + c.nu_minus);
    const double b = (c.nu_plus * (b1s - b4s) + c.nu_minus * (b4s - b1s)) / (8.0 * c.kappa1);
    const Cplx sigma = std::sqrt(Cplx(c.kappa1 - c.kappa2, 0.0));
    const double tau = std::sqrt(c.kappa1 + c.kappa2);
    const double r2 = r * r;
    return {Cplx(-(a - b) * r2, 0.0) + sigma * r,
            Cplx(-(a - b) * r2, 0.0) - sigma * r,
            Cplx(-(a + b) * r2, tau * r),
            Cplx(-(a + b) * r2, -tau * r)};
}

std::array<Cplx, 4> high_freq_predictions(double r, const ModelCoefficients& c) {
    const double b1s = c.beta1 * c.beta1, b4s = c.beta4 * c.beta4;
    const double P = c.nu_plus * c.nu_minus;
    const double Q = c.nu_plus * b4s + c.nu_minus * b1s;
    const double theta = growth_rate(c);
    return {Cplx(theta, 0.0),
            Cplx((-Q - c.kappa3) / (2.0 * P), 0.0),
            Cplx(-c.nu_plus * r * r + b1s / c.nu_plus, 0.0),
            Cplx(-c.nu_minus * r * r + b4s / c.nu_minus, 0.0)};
}

// Leading-order projector of the branch whose O(r) eigenvalue term is
// branch_c * r, with branch_c one of {+sigma, -sigma, +i tau, -i tau}.
// The growing real branch corresponds to branch_c = +sigma.
Mat4c low_freq_projector_leading(const ModelCoefficients& c, Cplx branch_c,
                                 bool real_pair) {
    const double b1 = c.beta1, b2 = c.beta2, b3 = c.beta3, b4 = c.beta4;
    const double k1 = c.kappa1;
    const double b1s = b1 * b1, b4s = b4 * b4;
    Mat4c p;
    if (real_pair) {
        // real branches: the printed sign convention pairs +sqrt(k1-k2) with
        // the decaying member, so the growing branch takes the mirrored sign
        const Cplx ss = -branch_c;
        p << Cplx((2 * k1 + b4s - b1s) / (8 * k1)), b1 * (2 * k1 + b4s - b1s) / (8 * k1 * ss),
            Cplx(-b1 * b2 / (4 * k1)), -b1 * b2 * b4 / (4 * k1 * ss),
            (b1 * (b1s - b4s - 2 * k1) + 2 * b2 * b3 * b4) / (8 * k1 * ss),
            Cplx((2 * k1 + b4s - b1s) / (8 * k1)), -b2 * ss / (4 * k1), Cplx(-b2 * b4 / (4 * k1)),
            Cplx(-b3 * b4 / (4 * k1)), -b1 * b3 * b4 / (4 * k1 * ss),
            Cplx((2 * k1 + b1s - b4s) / (8 * k1)), b4 * (2 * k1 + b1s - b4s) / (8 * k1 * ss),
            -b3 * ss / (4 * k1), Cplx(-b1 * b3 / (4 * k1)),
            (b4 * (b4s - b1s - 2 * k1) + 2 * b1 * b2 * b3) / (8 * k1 * ss),
            Cplx((2 * k1 + b1s - b4s) / (8 * k1));
    } else {
        // oscillatory pair: factors i/tau (divisive entries) and i*tau
        // (multiplicative ones), signed with the branch, as printed
        const double tau = std::abs(branch_c);
        const Cplx f = branch_c / (tau * tau); // +/- i / tau
        const Cplx m = branch_c;               // +/- i tau
        p << Cplx((2 * k1 + b1s - b4s) / (8 * k1)), b1 * (2 * k1 + b1s - b4s) / (8 * k1) * f,
            Cplx(b1 * b2 / (4 * k1)), b1 * b2 * b4 / (4 * k1) * f,
            -(b1 * (b1s - b4s + 2 * k1) + 2 * b2 * b3 * b4) / (8 * k1) * f,
            Cplx((2 * k1 + b1s - b4s) / (8 * k1)), -b2 / (4 * k1) * m, Cplx(b2 * b4 / (4 * k1)),
            Cplx(b3 * b4 / (4 * k1)), b1 * b3 * b4 / (4 * k1) * f,
            Cplx((2 * k1 + b4s - b1s) / (8 * k1)), b4 * (2 * k1 + b4s - b1s) / (8 * k1) * f,
            -b3 / (4 * k1) * m, Cplx(b1 * b3 / (4 * k1)),
            -(b4 * (b4s - b1s + 2 * k1) + 2 * b1 * b2 * b3) / (8 * k1) * f,
            Cplx((2 * k1 + b4s - b1s) / (8 * k1));
    }
    return p;
}

std::array<Mat4c, 4> high_freq_projector_leading(const ModelCoefficients& c) {
    const double b1 = c.beta1, b2 = c.beta2, b3 = c.beta3, b4 = c.beta4;
    const double k3 = c.kappa3;
    const double np = c.nu_plus, nm = c.nu_minus;
    const double b1s = b1 * b1, b4s = b4 * b4;
    Mat4c p1 = Mat4c::Zero(), p2 = Mat4c::Zero(), p3 = Mat4c::Zero(), p4 = Mat4c::Zero();
    p1(0, 0) = (np * b4s - nm * b1s + k3) / (2 * k3);
    p1(0, 2) = -b1 * b2 * nm / k3;
    p1(2, 0) = -b3 * b4 * np / k3;
    p1(2, 2) = (nm * b1s - np * b4s + k3) / (2 * k3);
    p2(0, 0) = (nm * b1s - np * b4s + k3) / (2 * k3);
    p2(0, 2) = b1 * b2 * nm / k3;
    p2(2, 0) = b3 * b4 * np / k3;
    p2(2, 2) = (np * b4s - nm * b1s + k3) / (2 * k3);
    p3(1, 1) = 1.0;
    p4(3, 3) = 1.0;
    return {p1, p2, p3, p4};
}

} // namespace

std::array<Cplx, 4> eigenvalues(double r, const ModelCoefficients& c) {
    if (!(r > 0.0)) throw OutOfRegime("eigenvalues requires r > 0");
    const QuarticCoeffs q = characteristic_coeffs(r, c);
    const double scale = r * std::max(1.0, r);
    auto roots = solve_quartic_scaled(q, scale);
    order_eigenvalues(roots);
    return roots;
}

double lambda1(double r, const ModelCoefficients& c) {
    if (!(r > 0.0)) throw OutOfRegime("lambda1 requires r > 0");
    if (!c.unstable())
        throw StableParameters("no positive real root: beta1*beta4 >= beta2*beta3");
    const QuarticCoeffs q = characteristic_coeffs(r, c);
    const double theta = growth_rate(c);

    double hi = theta;
    for (int k = 0; k < 8 && !(q.eval(hi).real() > 0.0); ++k)
        hi *= 1.0 + 1e-9; // absorb rounding between the two coefficient routes
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (q.eval(mid).real() < 0.0) lo = mid; else hi = mid;
    }
    double root = 0.5 * (lo + hi);
    const double polished = polish_root<double>(q, root);
    if (polished > 0.0 && polished < hi * (1.0 + 1e-12)) root = polished;
    return root;
}

SpectralDecomposition projectors(double r, const ModelCoefficients& c) {
    if (!(r > 0.0)) throw OutOfRegime("projectors requires r > 0");
    SpectralDecomposition d;
    d.lambdas = eigenvalues(r, c);

    double max_mod = 0.0, min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        max_mod = std::max(max_mod, std::abs(d.lambdas[i]));
        for (int j = i + 1; j < 4; ++j)
            min_gap = std::min(min_gap, std::abs(d.lambdas[i] - d.lambdas[j]));
    }
    if (min_gap < 1e-6 * max_mod) {
        d.degenerate = true;
        return d;
    }

    const Mat4c a = symbol_matrix(r, c).cast<Cplx>();
    for (int i = 0; i < 4; ++i) {
        Mat4c p = Mat4c::Identity();
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            p = p * (a - d.lambdas[j] * Mat4c::Identity()) / (d.lambdas[i] - d.lambdas[j]);
        }
        d.projectors[i] = p;
    }
    return d;
}

Mat4c propagator(double r, const ModelCoefficients& c, double t) {
    if (!(t >= 0.0)) throw OutOfRegime("propagator requires t >= 0");
    if (r == 0.0 || t == 0.0) return Mat4c::Identity();
    const SpectralDecomposition d = projectors(r, c);
    if (d.degenerate) {
        const Mat4 e = expm(Mat4(t * symbol_matrix(r, c)));
        return e.cast<Cplx>();
    }
    Mat4c out = Mat4c::Zero();
    for (int i = 0; i < 4; ++i) out += std::exp(d.lambdas[i] * t) * d.projectors[i];
    return out;
}

Mat4 expm(const Mat4& a) {
    // Pade-13 scaling and squaring
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const double theta13 = 5.371920351148152;
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > theta13)
        squarings = std::max(0, (int)std::ceil(std::log2(norm / theta13)));
    const Mat4 as = a / std::pow(2.0, squarings);
    const Mat4 a2 = as * as, a4 = a2 * a2, a6 = a4 * a2;
    const Mat4 u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                         b[5] * a4 + b[3] * a2 + b[1] * Mat4::Identity());
    const Mat4 v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * Mat4::Identity();
    Mat4 r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

ExpansionReport low_freq_expansion(double r, const ModelCoefficients& c, double eta2) {
    if (!(r > 0.0) || r > eta2)
        throw OutOfRegime("low_freq_expansion requires 0 < r <= eta2");
    return make_report(ExpansionReport::Regime::low, low_freq_predictions(r, c),
                       eigenvalues(r, c));
}

ExpansionReport high_freq_expansion(double r, const ModelCoefficients& c, double eta1) {
    if (!(r >= eta1)) throw OutOfRegime("high_freq_expansion requires r >= eta1");
    return make_report(ExpansionReport::Regime::high, high_freq_predictions(r, c),
                       eigenvalues(r, c));
}

ProjectorAsymptoticsReport projector_asymptotics(double r, const ModelCoefficients& c,
                                                 double eta1, double eta2) {
    const bool low = r > 0.0 && r <= eta2;
    const bool high = r >= eta1;
    if (!low && !high)
        throw OutOfRegime("projector_asymptotics requires r <= eta2 or r >= eta1");

    const SpectralDecomposition d = projectors(r, c);
    ProjectorAsymptoticsReport rep;
    rep.regime = low ? ExpansionReport::Regime::low : ExpansionReport::Regime::high;
    if (d.degenerate) {
        rep.defects.fill(std::numeric_limits<double>::infinity());
        return rep;
    }

    std::array<Cplx, 4> pred_l =
        low ? low_freq_predictions(r, c) : high_freq_predictions(r, c);
    const auto perm = match_branches(pred_l, d.lambdas);

    std::array<Mat4c, 4> pred_p;
    if (low) {
        const Cplx sigma = std::sqrt(Cplx(c.kappa1 - c.kappa2, 0.0));
        const double tau = std::sqrt(c.kappa1 + c.kappa2);
        pred_p = {low_freq_projector_leading(c, sigma, true),
                  low_freq_projector_leading(c, -sigma, true),
                  low_freq_projector_leading(c, Cplx(0.0, tau), false),
                  low_freq_projector_leading(c, Cplx(0.0, -tau), false)};
    } else {
        pred_p = high_freq_projector_leading(c);
    }
    for (int i = 0; i < 4; ++i)
        rep.defects[i] = (d.projectors[perm[i]] - pred_p[i]).cwiseAbs().maxCoeff();
    return rep;
}

double spectral_bound(double r_lo, double r_hi, const ModelCoefficients& c, int samples) {
    if (!(r_lo > 0.0) || !(r_hi >= r_lo) || samples < 1)
        throw OutOfRegime("spectral_bound requires 0 < r_lo <= r_hi and samples >= 1");
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double f = samples == 1 ? 0.0 : double(i) / double(samples - 1);
        const double r = r_lo * std::pow(r_hi / r_lo, f);
        for (const Cplx& l : eigenvalues(r, c)) worst = std::max(worst, l.real());
    }
    return worst;
}

double eta_threshold(const ModelCoefficients& c, double vartheta) {
    if (!c.unstable())
        throw StableParameters("eta_threshold requires the unstable regime");
    if (!(vartheta > 0.0)) throw OutOfRegime("eta_threshold requires vartheta > 0");
    const double theta = growth_rate(c);
    const double probe_lo = 1e-3;
    if (vartheta >= theta) return probe_lo;

    // asymptotic deficit constant of theta - lambda1(r), used to size the probe
    const double S = c.nu_plus + c.nu_minus;
    const double B = c.beta1 * c.beta1 + c.beta4 * c.beta4;
    const double P = c.nu_plus * c.nu_minus;
    const double Q = c.nu_plus * c.beta4 * c.beta4 + c.nu_minus * c.beta1 * c.beta1;
    const double K = theta * theta * (S * theta + B) / (2.0 * P * theta + Q);

    double r_hi = std::max(100.0, 10.0 * std::sqrt(K / vartheta));
    for (int attempt = 0; attempt < 4; ++attempt) {
        const int n = 1600;
        int last_bad = -1;
        for (int i = 0; i < n; ++i) {
            const double r = probe_lo * std::pow(r_hi / probe_lo, double(i) / (n - 1));
            if (lambda1(r, c) < theta - vartheta) last_bad = i;
        }
        // tail certificate: empirical bound theta - lambda1 <= A1 / r past r_hi
        double A1 = 0.0;
        for (int i = 0; i < 32; ++i) {
            const double r = 0.1 * r_hi * std::pow(10.0, double(i) / 31.0);
            A1 = std::max(A1, (theta - lambda1(r, c)) * r);
        }
        if (A1 / r_hi > vartheta) {
            r_hi *= 10.0;
            continue;
        }
        if (last_bad < 0) return probe_lo;
        double lo = probe_lo * std::pow(r_hi / probe_lo, double(last_bad) / (n - 1));
        double hi = probe_lo * std::pow(r_hi / probe_lo, double(last_bad + 1) / (n - 1));
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (lambda1(mid, c) < theta - vartheta) lo = mid; else hi = mid;
        }
        return hi;
    }
    throw NoConvergence("eta_threshold tail certificate failed");
}

void write_dispersion_csv(std::ostream& os, const ModelCoefficients& c, double r_lo,
                          double r_hi, int samples) {
    if (!(r_lo > 0.0) || !(r_hi >= r_lo) || samples < 1)
        throw OutOfRegime("dispersion sweep requires 0 < r_lo <= r_hi and samples >= 1");
    const double theta = growth_rate(c);
    os << "r,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,re_l4,im_l4,theta\n";
    for (int i = 0; i < samples; ++i) {
        const double f = samples == 1 ? 0.0 : double(i) / double(samples - 1);
        const double r = r_lo * std::pow(r_hi / r_lo, f);
        const auto l = eigenvalues(r, c);
        os << format_double(r);
        for (int k = 0; k < 4; ++k)
            os << ',' << format_double(l[k].real()) << ',' << format_double(l[k].imag());
        os << ',' << format_double(theta) << '\n';
    }
}

} // namespace twofluid
