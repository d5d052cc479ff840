#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "twofluid/spectral.hpp"

using namespace twofluid;

namespace {

ModelCoefficients nondeg_coeffs() {
    const auto p = oracle::nondegenerate_config();
    return derive_coefficients(solve_equilibrium(p.phase, p.cap), p.visc, p.cap);
}

} // namespace

TEST_CASE("symbol matrix entries and trace") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    CHECK(symbol_matrix(0.0, c).isZero(0.0));

    const Mat4 a = symbol_matrix(1.0, c);
    Mat4 expected;
    expected << 0, -1, 0, 0, 1, -1, 2, 0, 0, 0, 0, -1, 1, 0, 1, -1;
    CHECK((a - expected).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rr(0.0, 30.0);
    for (int i = 0; i < 20; ++i) {
        const double r = rr(rng);
        CHECK(symbol_matrix(r, c).trace() ==
              doctest::Approx(-(c.nu_plus + c.nu_minus) * r * r).epsilon(1e-14));
    }
}

TEST_CASE("characteristic coefficients: fixed point, r = 0, determinant oracle") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    const QuarticCoeffs q = characteristic_coeffs(1.0, c);
    CHECK(q.c3 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(q.c2 == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(q.c1 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(q.c0 == doctest::Approx(-1.0).epsilon(1e-14));

    const QuarticCoeffs q0 = characteristic_coeffs(0.0, c);
    CHECK(q0.c3 == 0.0);
    CHECK(q0.c2 == 0.0);
    CHECK(q0.c1 == 0.0);
    CHECK(q0.c0 == 0.0);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto p = oracle::random_valid_config(rng);
        const ModelCoefficients rc =
            derive_coefficients(solve_equilibrium(p.phase, p.cap), p.visc, p.cap);
        std::uniform_real_distribution<double> rr(1e-2, 1e2);
        const double r = rr(rng);
        const QuarticCoeffs qq = characteristic_coeffs(r, rc);
        const auto det = oracle::charpoly4(symbol_matrix(r, rc));
        const double want[4] = {qq.c3, qq.c2, qq.c1, qq.c0};
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(det.c[k] - want[k]) <=
                  1e-10 * std::max({1.0, std::abs(det.c[k]), det.cond[k]}));
        if (rc.unstable() && r > 0.0) CHECK(qq.c0 < 0.0);
    }
}

TEST_CASE("eigenvalues: positive real root, Vieta, conjugate closure, quartic oracle") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    const auto l = eigenvalues(1.0, c);

    const QuarticCoeffs q = characteristic_coeffs(1.0, c);
    const double lam1_ref = oracle::bisect(
        [&](double x) { return q.eval(Cplx(x, 0)).real(); }, 0.0, c.theta);
    CHECK(l[0].imag() == 0.0);
    CHECK(l[0].real() == doctest::Approx(lam1_ref).epsilon(1e-10));
    CHECK(l[0].real() > 0.31);
    CHECK(l[0].real() < 0.32);

    Cplx sum(0.0), prod(1.0);
    for (const Cplx& x : l) {
        sum += x;
        prod *= x;
    }
    CHECK(std::abs(sum + q.c3) <= 1e-9 * std::max(1.0, std::abs(q.c3)));
    CHECK(std::abs(prod - q.c0) <= 1e-9 * std::max(1.0, std::abs(q.c0)));

    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const auto p = oracle::random_valid_config(rng);
        const ModelCoefficients rc =
            derive_coefficients(solve_equilibrium(p.phase, p.cap), p.visc, p.cap);
        std::uniform_real_distribution<double> rr(-2.0, 2.0);
        const double r = std::pow(10.0, rr(rng));
        const auto roots = eigenvalues(r, rc);
        // conjugate closure
        std::array<Cplx, 4> conj;
        for (int k = 0; k < 4; ++k) conj[k] = std::conj(roots[k]);
        CHECK(oracle::match_distance(roots, conj) == 0.0);
        // closed-form route
        const QuarticCoeffs qq = characteristic_coeffs(r, rc);
        const auto ref = oracle::ferrari_quartic(qq.c3, qq.c2, qq.c1, qq.c0);
        double scale = 1.0;
        for (const auto& x : ref) scale = std::max(scale, std::abs(x));
        CHECK(oracle::match_distance(roots, ref) <= 1e-8 * scale);
        // residual contract, measured against the evaluation's own condition
        for (const auto& x : roots) {
            const double ax = std::abs(x);
            const double cond = 1.0 + ax * ax * ax * ax + std::abs(qq.c3) * ax * ax * ax +
                                std::abs(qq.c2) * ax * ax + std::abs(qq.c1) * ax +
                                std::abs(qq.c0);
            CHECK(std::abs(qq.eval(x)) <= 1e-10 * cond);
        }
    }
}

TEST_CASE("lambda1: bisection values and the stable guard") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    const double theta = std::sqrt(2.0) - 1.0;

    // stated bracket F(0.31) < 0 < F(0.32); the bisected root is 0.31499...
    const double l1 = lambda1(1.0, c);
    CHECK(l1 > 0.31);
    CHECK(l1 < 0.32);
    const QuarticCoeffs q1 = characteristic_coeffs(1.0, c);
    const double ref = oracle::bisect(
        [&](double x) { return q1.eval(Cplx(x, 0)).real(); }, 0.0, theta);
    CHECK(l1 == doctest::Approx(ref).epsilon(1e-11));
    CHECK(l1 < theta);

    const double l1_far = lambda1(100.0, c);
    CHECK(l1_far > theta - 0.02);
    CHECK(l1_far < theta);

    const ModelCoefficients stable = coefficients_from_betas(1.0, 0.5, 1.0, 1.0, 1.0, 1.0);
    CHECK_THROWS_AS(lambda1(1.0, stable), StableParameters);
}

TEST_CASE("projectors: partition of unity, idempotence, symbol reconstruction") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> rr(-1.5, 1.5);
    for (int i = 0; i < 40; ++i) {
        const double r = std::pow(10.0, rr(rng));
        const SpectralDecomposition d = projectors(r, c);
        REQUIRE(!d.degenerate);
        Mat4c sum = Mat4c::Zero(), weighted = Mat4c::Zero();
        for (int k = 0; k < 4; ++k) {
            sum += d.projectors[k];
            weighted += d.lambdas[k] * d.projectors[k];
            for (int j = 0; j < 4; ++j) {
                const Mat4c prod = d.projectors[k] * d.projectors[j];
                const Mat4c want = (k == j) ? d.projectors[k] : Mat4c::Zero();
                CHECK((prod - want).cwiseAbs().maxCoeff() < 1e-8);
            }
        }
        CHECK((sum - Mat4c::Identity()).cwiseAbs().maxCoeff() < 1e-8);
        const double scale = std::max(1.0, weighted.cwiseAbs().maxCoeff());
        CHECK((weighted - symbol_matrix(r, c).cast<Cplx>()).cwiseAbs().maxCoeff() <
              1e-8 * scale);
    }
}

TEST_CASE("propagator: identity, eigenvector action, exponential oracle") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    CHECK((propagator(1.3, c, 0.0) - Mat4c::Identity()).cwiseAbs().maxCoeff() == 0.0);

    const SpectralDecomposition d = projectors(1.0, c);
    Eigen::Vector4cd v = d.projectors[0].col(0); // eigenvector for lambda1
    const double t = 2.0;
    const Eigen::Vector4cd lhs = propagator(1.0, c, t) * v;
    const Eigen::Vector4cd rhs = std::exp(d.lambdas[0] * t) * v;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8 * rhs.cwiseAbs().maxCoeff());

    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> rr(0.1, 10.0), rt(0.0, 5.0);
    for (int i = 0; i < 60; ++i) {
        const double r = rr(rng), tt = rt(rng);
        const Mat4c e = propagator(r, c, tt);
        CHECK(e.imag().cwiseAbs().maxCoeff() < 1e-8);
        const Mat4 ref = oracle::expm_ref(Mat4(tt * symbol_matrix(r, c)));
        const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
        CHECK((e.real() - ref).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    }
}

TEST_CASE("expm agrees with the reference on random symbols") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        Mat4 a;
        for (int r0 = 0; r0 < 4; ++r0)
            for (int c0 = 0; c0 < 4; ++c0) a(r0, c0) = u(rng);
        const Mat4 mine = expm(a);
        const Mat4 ref = oracle::expm_ref(a);
        CHECK((mine - ref).cwiseAbs().maxCoeff() <=
              1e-11 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("low-frequency expansion: fixed values and cubic defect decay") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    CHECK(c.kappa1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(c.kappa2 == doctest::Approx(1.0).epsilon(1e-14));

    const ExpansionReport rep = low_freq_expansion(0.01, c);
    CHECK(rep.predicted[0].real() == doctest::Approx(0.0063859).epsilon(2e-4));
    CHECK(rep.predicted[2].imag() ==
          doctest::Approx(std::sqrt(1.0 + std::sqrt(2.0)) * 0.01).epsilon(1e-12));

    std::vector<double> rs, ds;
    for (double r = 1e-4; r < 1.05e-2; r *= std::pow(10.0, 0.25)) {
        rs.push_back(r);
        ds.push_back(low_freq_expansion(r, c).defect);
    }
    CHECK(oracle::loglog_slope(rs, ds) > 2.7);

    CHECK_THROWS_AS(low_freq_expansion(0.5, c), OutOfRegime);

    // flat capillary slope: the two real predictions collapse at order r
    const ModelCoefficients flat = coefficients_from_betas(1.0, 2.0, 0.5, 1.0, 1.0, 1.0);
    const ExpansionReport frep = low_freq_expansion(0.005, flat);
    CHECK(std::abs(frep.predicted[0] - frep.predicted[1]) < 1e-12);
}

TEST_CASE("high-frequency expansion: limits, decay, and the equal-viscosity stall") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    CHECK(c.kappa3 == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
    const ExpansionReport rep = high_freq_expansion(50.0, c, 10.0);
    CHECK(rep.predicted[0].real() == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-14));
    CHECK(rep.predicted[1].real() == doctest::Approx(-(1.0 + std::sqrt(2.0))).epsilon(1e-14));
    // lambda1 / lambda2 branches converge even with equal viscosities
    CHECK(std::abs(rep.predicted[0] - rep.actual[0]) < 1e-3);
    CHECK(std::abs(rep.predicted[1] - rep.actual[1]) < 1e-2);
    // the parabolic pair is asymptotically degenerate here: the defect
    // saturates at the sqrt(2) splitting instead of decaying
    const double stall = std::max(std::abs(rep.predicted[2] - rep.actual[2]),
                                  std::abs(rep.predicted[3] - rep.actual[3]));
    CHECK(stall == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));

    // distinct viscosities: every branch decays like 1/r
    const ModelCoefficients nd = nondeg_coeffs();
    std::vector<double> rs, ds;
    for (double r = 20.0; r < 2.1e3; r *= std::pow(10.0, 0.25)) {
        rs.push_back(r);
        ds.push_back(high_freq_expansion(r, nd, 10.0).defect);
    }
    CHECK(oracle::loglog_slope(rs, ds) < -0.8);
    CHECK_THROWS_AS(high_freq_expansion(1.0, nd, 10.0), OutOfRegime);
}

TEST_CASE("projector asymptotics: leading orders in both regimes") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    // low regime: the growing branch projector has (1,1) entry 1/4
    {
        const SpectralDecomposition d = projectors(1e-3, c);
        const ProjectorAsymptoticsReport rep = projector_asymptotics(1e-3, c, 50.0);
        CHECK(rep.regime == ExpansionReport::Regime::low);
        for (double defect : rep.defects) CHECK(defect < 5e-3);
        // entry check through the decomposition itself
        int growing = 0;
        for (int i = 1; i < 4; ++i)
            if (d.lambdas[i].real() > d.lambdas[growing].real()) growing = i;
        CHECK(d.projectors[growing](0, 0).real() == doctest::Approx(0.25).epsilon(2e-3));
    }
    // defect shrinks linearly in r
    {
        std::vector<double> rs, ds;
        for (double r : {1e-3, 3e-3, 1e-2}) {
            const auto rep = projector_asymptotics(r, c, 50.0);
            rs.push_back(r);
            ds.push_back(*std::max_element(rep.defects.begin(), rep.defects.end()));
        }
        const double slope = oracle::loglog_slope(rs, ds);
        CHECK(slope > 0.8);
        CHECK(slope < 1.2);
    }
    // high regime needs distinct viscosities for the parabolic branches
    {
        const ModelCoefficients nd = nondeg_coeffs();
        std::vector<double> rs, ds;
        for (double r : {30.0, 100.0, 300.0}) {
            const auto rep = projector_asymptotics(r, nd, 20.0);
            CHECK(rep.regime == ExpansionReport::Regime::high);
            rs.push_back(r);
            ds.push_back(*std::max_element(rep.defects.begin(), rep.defects.end()));
        }
        const double slope = oracle::loglog_slope(rs, ds);
        CHECK(slope < -0.8);
        // P3 and P4 leading orders are the velocity diagonals
        const SpectralDecomposition d = projectors(300.0, nd);
        int i3 = 0, i4 = 0;
        for (int i = 0; i < 4; ++i) {
            if (std::abs(d.lambdas[i] - Cplx(-nd.nu_plus * 9e4, 0)) <
                std::abs(d.lambdas[i3] - Cplx(-nd.nu_plus * 9e4, 0)))
                i3 = i;
            if (std::abs(d.lambdas[i] - Cplx(-nd.nu_minus * 9e4, 0)) <
                std::abs(d.lambdas[i4] - Cplx(-nd.nu_minus * 9e4, 0)))
                i4 = i;
        }
        Mat4c want3 = Mat4c::Zero(), want4 = Mat4c::Zero();
        want3(1, 1) = 1.0;
        want4(3, 3) = 1.0;
        CHECK((d.projectors[i3] - want3).cwiseAbs().maxCoeff() < 0.02);
        CHECK((d.projectors[i4] - want4).cwiseAbs().maxCoeff() < 0.02);
    }
    CHECK_THROWS_AS(projector_asymptotics(1.0, c, 50.0), OutOfRegime);
}

TEST_CASE("spectral bound and the stable contrast") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    const double theta = std::sqrt(2.0) - 1.0;
    CHECK(spectral_bound(0.01, 50.0, c, 2000) <= theta + 1e-10);

    const ModelCoefficients stable = coefficients_from_betas(1.0, 0.5, 1.0, 1.0, 1.0, 1.0);
    CHECK(spectral_bound(1e-3, 1e3, stable, 2000) <= 1e-12);

    const double single = spectral_bound(2.0, 2.0, c, 1);
    double want = -1e300;
    for (const auto& l : eigenvalues(2.0, c)) want = std::max(want, l.real());
    CHECK(single == want);
}

TEST_CASE("eta threshold: certification, monotonicity, degenerate margin") {
    const ModelCoefficients c = oracle::abstract_coeffs();
    const double theta = growth_rate(c);

    const double eta_1 = eta_threshold(c, theta / 10.0);
    CHECK(eta_1 > 0.0);
    CHECK(lambda1(eta_1, c) >= theta - theta / 10.0 - 1e-12);
    CHECK(lambda1(4.0 * eta_1, c) >= theta - theta / 10.0 - 1e-12);

    const double eta_wide = eta_threshold(c, theta / 4.0);
    CHECK(eta_wide <= eta_1 + 1e-12);

    CHECK(eta_threshold(c, 2.0 * theta) == doctest::Approx(1e-3));
    const ModelCoefficients stable = coefficients_from_betas(1.0, 0.5, 1.0, 1.0, 1.0, 1.0);
    CHECK_THROWS_AS(eta_threshold(stable, 0.01), StableParameters);
}

TEST_CASE("one unstable real branch below theta across the sweep") {
    auto [phase, cap, visc] = oracle::canonical_config();
    const ModelCoefficients c = derive_coefficients(solve_equilibrium(phase, cap), visc, cap);
    const double theta = c.theta;
    for (int i = 0; i < 400; ++i) {
        const double r = 1e-3 * std::pow(1e6, i / 399.0);
        const auto l = eigenvalues(r, c);
        int positive = 0;
        for (const auto& x : l) {
            if (x.real() > 1e-12) {
                ++positive;
                CHECK(x.imag() == 0.0);
                CHECK(x.real() < theta);
            }
        }
        CHECK(positive == 1);
    }
}
