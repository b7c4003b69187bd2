#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ipw/exactref.hpp"
#include "support/test_util.hpp"

using namespace ipw;

namespace {

TwoBodySpec identical_quench(double k_pair) {
    TwoBodySpec s;
    s.trap1 = {1.0, 1.0};
    s.trap2 = {1.0, 1.0};
    s.pair = PairInteractionSpec::harmonic(k_pair);
    s.schedule = Schedule::sudden();
    return s;
}

TwoBodySpec coupled_pair() {
    TwoBodySpec s;
    s.trap1 = {0.1, 1.0};
    s.trap2 = {0.1, 2.0};
    s.pair = PairInteractionSpec::harmonic(1.0);
    s.schedule = Schedule::sudden();
    return s;
}

}  // namespace

TEST_CASE("product states carry their factors' marginals") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));

    CHECK(f.squared_norm() == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(moment_x2(f, 0) == Catch::Approx(0.5).epsilon(1e-10));
    CHECK(moment_x2(f, 1) == Catch::Approx(0.5).epsilon(1e-10));

    const auto rho = marginal_density(f, 0);
    for (int j = 0; j < gx.n; j += 11) {
        const double x = gx.x(j);
        const double expect = std::exp(-x * x) / std::sqrt(std::numbers::pi);
        CHECK_THAT(rho[j], Catch::Matchers::WithinAbs(expect, 1e-12));
    }

    CHECK_THROWS_AS(marginal_density(f, 2), std::invalid_argument);
    CHECK_THROWS_AS(Field2D(gx, gy, Eigen::MatrixXcd::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("two-body energy reproduces closed forms on product states") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));

    const auto spec = identical_quench(0.3);
    const auto V0 = potential_2body(spec, gx, gy, 0.0);
    CHECK(two_body_energy(f, V0, 1.0, 1.0) == Catch::Approx(1.0).epsilon(1e-10));

    // <(x - y)^2> = 1 on the product ground state, so the pair term adds k/2.
    const auto V = potential_2body(spec, gx, gy, 0.3);
    CHECK(two_body_energy(f, V, 1.0, 1.0) == Catch::Approx(1.15).epsilon(1e-10));

    // Unnormalized states give the same Rayleigh quotient.
    Field2D g2 = f;
    g2.values *= 3.0;
    CHECK(two_body_energy(g2, V, 1.0, 1.0) == Catch::Approx(1.15).epsilon(1e-10));
}

TEST_CASE("sudden quench follows the closed-form variance") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto spec = identical_quench(1.0);
    auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));

    double t = 0.0;
    const double dt = 0.0025;
    for (int chunk = 0; chunk < 6; ++chunk) {
        evolve_2body(f, spec, t, dt, 100);
        const double expect = analytic::quench_position_variance(t, 2, 1.0);
        CHECK_THAT(moment_x2(f, 0), Catch::Matchers::WithinAbs(expect, 1e-5));
        CHECK_THAT(moment_x2(f, 1), Catch::Matchers::WithinAbs(expect, 1e-5));
    }
    CHECK(t == Catch::Approx(1.5).epsilon(1e-12));
    CHECK(f.squared_norm() == Catch::Approx(1.0).epsilon(1e-12));

    // The one-particle density stays Gaussian under the quadratic quench, so
    // its center value is set by the variance alone.
    const double s2 = analytic::quench_position_variance(t, 2, 1.0);
    const double rho0 = marginal_density(f, 0)[gx.n / 2];
    CHECK_THAT(rho0, Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0 * std::numbers::pi * s2), 1e-5));
}

TEST_CASE("quench variance tracks the oracle across couplings") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);

    for (const double ki : {0.1, 1.0}) {
        const auto spec = identical_quench(ki);
        auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));
        double t = 0.0;
        for (int chunk = 0; chunk < 40; ++chunk) {
            evolve_2body(f, spec, t, 0.0025, 100);
            const double expect = analytic::quench_position_variance(t, 2, ki);
            CHECK_THAT(moment_x2(f, 0), Catch::Matchers::WithinAbs(expect, 1e-4));
            CHECK_THAT(moment_x2(f, 1), Catch::Matchers::WithinAbs(expect, 1e-4));
        }
        CHECK(t == Catch::Approx(10.0).epsilon(1e-12));
        CHECK(f.squared_norm() == Catch::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("long split-step evolution conserves norm and energy") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto spec = identical_quench(1.0);
    const auto V = potential_2body(spec, gx, gy, 1.0);

    // Breathing quench state: strongly non-stationary, time-independent V.
    const auto drift = [&](double dt, int steps) {
        auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));
        const double e0 = two_body_energy(f, V, 1.0, 1.0);
        REQUIRE(e0 == Catch::Approx(1.5).epsilon(1e-10));
        double t = 0.0, de = 0.0, dn = 0.0;
        for (int chunk = 0; chunk < 20; ++chunk) {
            evolve_2body(f, spec, t, dt, steps / 20);
            de = std::max(de, std::abs(two_body_energy(f, V, 1.0, 1.0) - e0));
            dn = std::max(dn, std::abs(f.squared_norm() - 1.0));
        }
        CHECK(dn < 1e-10);
        return de;
    };

    const double fine = drift(1e-4, 10000);
    CHECK(fine < 1e-8);

    // The energy wobble is a splitting artifact, quadratic in dt.
    const double coarse = drift(4e-4, 10000);
    CHECK(coarse < 1e-7);
    CHECK(coarse / fine == Catch::Approx(16.0).margin(3.0));
}

TEST_CASE("relaxed ground state of identical coupled bosons matches the mode sum") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto gs = ground_state_2body(identical_quench(0.1), gx, gy, 0.1);

    CHECK_THAT(gs.energy,
               Catch::Matchers::WithinAbs(analytic::coupled_ground_energy(2, 0.1), 1e-8));

    // Per-particle variance is the average of the two mode variances. Moments
    // feel the relaxation residual and the final imaginary-step bias at first
    // order (about 1e-6 here), unlike the quadratically protected energy.
    const double expect = 0.5 * (0.5 + 0.5 / std::sqrt(1.2));
    CHECK_THAT(moment_x2(gs.state, 0), Catch::Matchers::WithinAbs(expect, 5e-6));
    CHECK_THAT(moment_x2(gs.state, 1), Catch::Matchers::WithinAbs(expect, 5e-6));
    CHECK(gs.iterations > 0);
}

TEST_CASE("relaxed ground state of distinguishable oscillators matches the oracle") {
    const auto oracle = testutil::coupled_oscillators(1.0, 2.0, 0.1, 0.1, 1.0);

    // Anchor the oracle itself against independently derived values.
    CHECK_THAT(oracle.omega_a, Catch::Matchers::WithinAbs(1.2584545, 1e-4));
    CHECK_THAT(oracle.omega_b, Catch::Matchers::WithinAbs(0.2574727, 1e-4));
    CHECK_THAT(oracle.energy, Catch::Matchers::WithinAbs(0.7579636, 1e-4));
    CHECK_THAT(oracle.xcov(0, 0), Catch::Matchers::WithinAbs(0.88978, 1e-3));
    CHECK_THAT(oracle.xcov(1, 1), Catch::Matchers::WithinAbs(0.72476, 1e-3));
    CHECK_THAT(oracle.xcov(0, 1), Catch::Matchers::WithinAbs(0.50897, 1e-3));
    CHECK_THAT(oracle.psq[0], Catch::Matchers::WithinAbs(0.46972, 1e-3));

    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto gs = ground_state_2body(coupled_pair(), gx, gy, 1.0);

    CHECK_THAT(gs.energy, Catch::Matchers::WithinAbs(oracle.energy, 1e-8));
    CHECK_THAT(moment_x2(gs.state, 0), Catch::Matchers::WithinAbs(oracle.xcov(0, 0), 5e-6));
    CHECK_THAT(moment_x2(gs.state, 1), Catch::Matchers::WithinAbs(oracle.xcov(1, 1), 5e-6));

    // Cross moment <x1 x2> straight from the samples.
    double xy = 0.0;
    for (int j = 0; j < gx.n; ++j)
        for (int l = 0; l < gy.n; ++l)
            xy += gx.x(j) * gy.x(l) * std::norm(gs.state.values(j, l));
    xy *= gx.dx * gy.dx;
    CHECK_THAT(xy, Catch::Matchers::WithinAbs(oracle.xcov(0, 1), 5e-6));
}

TEST_CASE("conditional slices of a product state factor exactly") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto a = testutil::gaussian_field(gx);
    const auto b = testutil::gaussian_field(gy);
    const auto f = product_state(a, b);

    const double Y = 0.377;
    const double gY = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * Y * Y);
    const auto s0 = conditional_slice(f, 0, Y, 0);
    const auto s1 = conditional_slice(f, 0, Y, 1);
    const auto s2 = conditional_slice(f, 0, Y, 2);
    for (int j = 0; j < gx.n; j += 9) {
        const Complex ax = a.values[j];
        CHECK_THAT(std::abs(s0.values[j] - ax * gY), Catch::Matchers::WithinAbs(0.0, 1e-10));
        CHECK_THAT(std::abs(s1.values[j] - ax * (-Y * gY)), Catch::Matchers::WithinAbs(0.0, 1e-9));
        CHECK_THAT(std::abs(s2.values[j] - ax * ((Y * Y - 1.0) * gY)),
                   Catch::Matchers::WithinAbs(0.0, 1e-8));
    }

    const double X = -1.2;
    const double gX = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * X * X);
    const auto r1 = conditional_slice(f, 1, X, 1);
    for (int l = 0; l < gy.n; l += 9)
        CHECK_THAT(std::abs(r1.values[l] - b.values[l] * (-X * gX)),
                   Catch::Matchers::WithinAbs(0.0, 1e-9));

    CHECK_THROWS_AS(conditional_slice(f, 2, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(conditional_slice(f, 0, 9.0, 0), std::domain_error);
}

TEST_CASE("conditional slices of an entangled state match dense interpolation") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto spec = identical_quench(1.0);
    auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));
    double t = 0.0;
    evolve_2body(f, spec, t, 0.0025, 120);

    const double Y = 0.733;
    for (int order = 0; order <= 2; ++order) {
        const auto slice = conditional_slice(f, 0, Y, order);
        double max_err = 0.0;
        for (int j = 0; j < gx.n; ++j) {
            ComplexField row(gy, f.values.row(j).transpose());
            if (order > 0) row = spectral_derivative(row, order);
            max_err = std::max(max_err, std::abs(slice.values[j] - interpolate_at(row, Y)));
        }
        CHECK(max_err < (order == 0 ? 1e-10 : order == 1 ? 1e-9 : 1e-8));
    }
}

TEST_CASE("conditional slices are linear in the state") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    Field2D f = product_state(testutil::random_smooth_field(gx, 7),
                              testutil::random_smooth_field(gy, 8));
    Field2D g = product_state(testutil::random_smooth_field(gx, 9),
                              testutil::random_smooth_field(gy, 10));
    f.normalize();
    g.normalize();

    const Complex alpha(0.3, -0.7), beta(-1.1, 0.2);
    const Field2D h(gx, gy, alpha * f.values + beta * g.values);
    for (int axis = 0; axis <= 1; ++axis)
        for (int order = 0; order <= 2; ++order)
            for (const double Y : {0.733, -1.41}) {
                const auto sh = conditional_slice(h, axis, Y, order);
                const auto sf = conditional_slice(f, axis, Y, order);
                const auto sg = conditional_slice(g, axis, Y, order);
                const double err =
                    (sh.values - alpha * sf.values - beta * sg.values).cwiseAbs().maxCoeff();
                CHECK(err < 1e-12);
            }
}

TEST_CASE("entangled ground-state slices match the closed-form Gaussian") {
    // Closed form: the ground state of two coupled oscillators is
    // exp(-x' A x / 2) with A = M^{1/2} Q Omega Q^T M^{1/2} from the
    // mass-weighted spring matrix eigensolve.
    const double m1 = 1.0, m2 = 2.0, k1 = 0.1, k2 = 0.1, kc = 1.0;
    Eigen::Matrix2d K;
    K << (k1 + kc) / m1, -kc / std::sqrt(m1 * m2), -kc / std::sqrt(m1 * m2), (k2 + kc) / m2;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(K);
    const Eigen::Matrix2d S = Eigen::Vector2d(std::sqrt(m1), std::sqrt(m2)).asDiagonal();
    const Eigen::Matrix2d A = S * es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                              es.eigenvectors().transpose() * S;
    const double cnorm = std::pow(A.determinant(), 0.25) / std::sqrt(std::numbers::pi);

    // Anchor the exponent matrix against the covariance oracle: <x x^T> must
    // be A^{-1}/2.
    const auto oracle = testutil::coupled_oscillators(m1, m2, k1, k2, kc);
    const Eigen::Matrix2d cov = 0.5 * A.inverse();
    CHECK_THAT((cov - oracle.xcov).cwiseAbs().maxCoeff(), Catch::Matchers::WithinAbs(0.0, 1e-12));

    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto gs = ground_state_2body(coupled_pair(), gx, gy, 1.0);

    // Fix the arbitrary global phase of the relaxed state at the slice peak.
    const auto aligned = [](ComplexField s) {
        Eigen::Index pk;
        s.values.cwiseAbs().maxCoeff(&pk);
        s.values /= s.values[pk] / std::abs(s.values[pk]);
        return s;
    };

    const double Y = 0.5;
    const auto sx = aligned(conditional_slice(gs.state, 0, Y, 0));
    for (int j = 0; j < gx.n; ++j) {
        const double x = gx.x(j);
        const double expect =
            cnorm * std::exp(-0.5 * (A(0, 0) * x * x + 2.0 * A(0, 1) * x * Y + A(1, 1) * Y * Y));
        CHECK_THAT(std::abs(sx.values[j] - expect), Catch::Matchers::WithinAbs(0.0, 1e-6));
    }

    const double X = 0.5;
    const auto sy = aligned(conditional_slice(gs.state, 1, X, 0));
    for (int l = 0; l < gy.n; ++l) {
        const double y = gy.x(l);
        const double expect =
            cnorm * std::exp(-0.5 * (A(1, 1) * y * y + 2.0 * A(0, 1) * X * y + A(0, 0) * X * X));
        CHECK_THAT(std::abs(sy.values[l] - expect), Catch::Matchers::WithinAbs(0.0, 1e-6));
    }
}

TEST_CASE("guidance field of a drifting product packet is uniform") {
    const auto gx = Grid1D::make(-16.0, 16.0, 256);
    const auto gy = Grid1D::make(-16.0, 16.0, 256);
    const double p1 = 0.7, p2 = -1.1;
    const double m1 = 1.0, m2 = 2.5;
    const auto f = product_state(testutil::gaussian_field(gx, 0.0, 1.0, p1),
                                 testutil::gaussian_field(gy, 0.0, 1.0, p2));
    const TwoBodyFlow flow(f, m1, m2);

    for (const auto& pt : {std::pair{0.3, -0.2}, std::pair{-1.1, 0.9}, std::pair{0.05, 2.2}}) {
        const auto s = flow.at(pt.first, pt.second);
        CHECK_FALSE(s.regularized);
        CHECK_THAT(s.v1, Catch::Matchers::WithinAbs(p1 / m1, 1e-8));
        CHECK_THAT(s.v2, Catch::Matchers::WithinAbs(p2 / m2, 1e-8));
    }

    // Batched evaluation is the same computation.
    Eigen::Matrix2Xd pts(2, 3);
    pts << 0.3, -1.1, 0.05, -0.2, 0.9, 2.2;
    const auto v = flow.velocities(pts);
    CHECK_THAT(v(0, 1), Catch::Matchers::WithinAbs(flow.at(-1.1, 0.9).v1, 1e-13));
    CHECK_THAT(v(1, 2), Catch::Matchers::WithinAbs(flow.at(0.05, 2.2).v2, 1e-13));

    // Spectrum truncation must be invisible at working precision.
    const TwoBodyFlow exact_flow(f, m1, m2, 1e-6, 0.0);
    for (const auto& pt : {std::pair{0.3, -0.2}, std::pair{-2.7, 3.4}}) {
        CHECK_THAT(flow.at(pt.first, pt.second).v1,
                   Catch::Matchers::WithinAbs(exact_flow.at(pt.first, pt.second).v1, 1e-10));
        CHECK_THAT(flow.at(pt.first, pt.second).v2,
                   Catch::Matchers::WithinAbs(exact_flow.at(pt.first, pt.second).v2, 1e-10));
    }

    // Deep in the tail the amplitude is negligible and the velocity is cut.
    Diagnostics diag;
    const auto far = flow.at(7.5, 7.5, &diag);
    CHECK(far.regularized);
    CHECK(far.v1 == 0.0);
    CHECK(far.v2 == 0.0);
    CHECK(diag.velocity_regularizations == 1);

    CHECK_THROWS_AS(flow.at(17.0, 0.0), std::domain_error);
}

TEST_CASE("free-packet trajectories follow the spreading law") {
    const auto gx = Grid1D::make(-16.0, 16.0, 256);
    const auto gy = Grid1D::make(-16.0, 16.0, 256);
    TwoBodySpec spec;
    spec.trap1 = {0.0, 1.0};
    spec.trap2 = {0.0, 1.0};

    auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));
    Eigen::Matrix2Xd walkers(2, 2);
    walkers << 0.5, 1.0, -0.3, 1.4;

    const auto traj = exact_bohmian_trajectories(spec, f, walkers, 0.0, 0.002, 500, 500);
    REQUIRE(traj.times.size() == 2);
    CHECK(traj.times.back() == Catch::Approx(1.0).epsilon(1e-12));

    const double scale = std::sqrt(2.0);  // sqrt(1 + t^2) at t = 1
    for (int w = 0; w < 2; ++w) {
        CHECK_THAT(traj.positions.back()(0, w),
                   Catch::Matchers::WithinAbs(walkers(0, w) * scale, 1e-5));
        CHECK_THAT(traj.positions.back()(1, w),
                   Catch::Matchers::WithinAbs(walkers(1, w) * scale, 1e-5));
    }
    CHECK(traj.diag.frozen_configs == 0);
}

TEST_CASE("stationary-state trajectories stay put") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto spec = identical_quench(0.0);
    auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));

    Eigen::Matrix2Xd walkers(2, 2);
    walkers << 0.7, -0.7, -0.7, 0.7;
    // The drift floor is set by the splitting error of the evolved state
    // (cubic in dt per step), not by roundoff.
    const auto traj = exact_bohmian_trajectories(spec, f, walkers, 0.0, 0.002, 250, 250);

    CHECK((traj.positions.back() - walkers).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(traj.state.squared_norm() == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(traj.diag.frozen_configs == 0);
}

TEST_CASE("released coupled oscillators follow the covariance flow") {
    const auto oracle = testutil::coupled_oscillators(1.0, 2.0, 0.1, 0.1, 1.0);
    const auto gx = Grid1D::make(-14.0, 14.0, 256);
    const auto gy = Grid1D::make(-12.0, 12.0, 128);
    const auto gs = ground_state_2body(coupled_pair(), gx, gy, 1.0);

    // Switch the coupling off and let each particle swing in its own trap.
    TwoBodySpec released;
    released.trap1 = {0.1, 1.0};
    released.trap2 = {0.1, 2.0};

    Field2D f = gs.state;
    double t = 0.0;
    for (int chunk = 0; chunk < 4; ++chunk) {
        evolve_2body(f, released, t, 0.0025, 200);
        CHECK_THAT(moment_x2(f, 0),
                   Catch::Matchers::WithinAbs(
                       testutil::oscillator_xsq(t, 1.0, 0.1, oracle.xcov(0, 0), oracle.psq[0]),
                       3e-5));
        CHECK_THAT(moment_x2(f, 1),
                   Catch::Matchers::WithinAbs(
                       testutil::oscillator_xsq(t, 2.0, 0.1, oracle.xcov(1, 1), oracle.psq[1]),
                       3e-5));
    }
    CHECK(t == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("trajectory ensembles transport the evolved marginal") {
    const auto gx = Grid1D::make(-8.0, 8.0, 128);
    const auto gy = Grid1D::make(-8.0, 8.0, 128);
    const auto spec = identical_quench(1.0);
    const auto f = product_state(testutil::gaussian_field(gx), testutil::gaussian_field(gy));

    // |Psi(0)|^2 is a product of centered normals with variance 1/2.
    const int n_w = 5000;
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> nd(0.0, 1.0 / std::numbers::sqrt2);
    Eigen::Matrix2Xd walkers(2, n_w);
    for (int w = 0; w < n_w; ++w) {
        walkers(0, w) = nd(rng);
        walkers(1, w) = nd(rng);
    }

    const auto traj = exact_bohmian_trajectories(spec, f, walkers, 0.0, 0.002, 2500, 2500);
    REQUIRE(traj.times.back() == Catch::Approx(5.0).epsilon(1e-12));
    CHECK(traj.diag.frozen_configs == 0);
    CHECK(traj.diag.velocity_regularizations == 0);

    // Equivariance: the empirical law of each coordinate must match the
    // marginal density of the co-evolved state.
    for (int axis = 0; axis <= 1; ++axis) {
        const auto& g = axis == 0 ? gx : gy;
        const auto rho = marginal_density(traj.state, axis);

        std::vector<double> s(n_w);
        for (int w = 0; w < n_w; ++w) s[static_cast<std::size_t>(w)] = traj.positions.back()(axis, w);
        std::sort(s.begin(), s.end());

        // CDF of the node-centered density, linear within each cell.
        const auto cdf = [&](double x) {
            double acc = 0.0;
            for (int j = 0; j < g.n; ++j) {
                const double lo = g.x(j) - 0.5 * g.dx;
                if (x < lo) break;
                acc += rho[j] * std::min(x - lo, g.dx);
            }
            return acc;
        };
        REQUIRE(cdf(g.x_min + g.length() - g.dx) == Catch::Approx(1.0).epsilon(1e-9));

        double ks = 0.0;
        for (int i = 0; i < n_w; ++i) {
            const double F = cdf(s[static_cast<std::size_t>(i)]);
            ks = std::max(ks, std::max(std::abs((i + 1.0) / n_w - F), std::abs(F - double(i) / n_w)));
        }
        CHECK(ks < 0.05);
    }
}
