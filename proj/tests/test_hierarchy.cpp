#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ipw/ensemble.hpp"
#include "ipw/hierarchy.hpp"
#include "ipw/orbitals.hpp"
#include "ipw/stepper.hpp"

#include "support/test_util.hpp"

using namespace ipw;

namespace {

template <typename A, typename B>
bool bits_equal(const A& a, const B& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

// Light-heavy benchmark: a light oscillator entangled with a heavy one. The
// initial state is the coupled ground state of a softer two-particle system;
// the evolution decouples the traps and makes the partner very heavy.
const Grid1D& bench_light() {
    static const Grid1D g = Grid1D::make(-14.0, 14.0, 256);
    return g;
}
const Grid1D& bench_heavy() {
    static const Grid1D g = Grid1D::make(-12.0, 12.0, 128);
    return g;
}
TwoBodySpec bench_prep() {
    return {TrapSpec{0.1, 1.0}, TrapSpec{0.1, 2.0}, PairInteractionSpec::harmonic(1.0),
            Schedule::sudden()};
}
TwoBodySpec bench_evolution() {
    return {TrapSpec{0.1, 1.0}, TrapSpec{0.1, 100.0}, PairInteractionSpec::none(),
            Schedule::sudden()};
}

// The relaxed initial state is shared by several cases; relax it once.
const GroundState2D& bench_ground_state() {
    static const GroundState2D gs =
        ground_state_2body(bench_prep(), bench_light(), bench_heavy(), 1.0);
    return gs;
}

}  // namespace

TEST_CASE("initial families are partner-derivative slices") {
    const Grid1D g = Grid1D::make(-16.0, 16.0, 256);

    SECTION("product state matches analytic Gaussian derivatives") {
        const double cx = 0.3, wx = 1.1, px = 0.4;
        const double cy = -0.4, wy = 0.8, py = 0.6;
        const ComplexField phi = testutil::gaussian_field(g, cx, wx, px);
        const ComplexField chi = testutil::gaussian_field(g, cy, wy, py);
        const Field2D psi = product_state(phi, chi);

        const Eigen::Vector2d pos{0.25, 0.9};
        const HierarchyState s = init_from_2body(psi, 2, pos, {1.0, 1.0});
        REQUIRE(s.depth == 2);
        REQUIRE(s.cw[0].size() == 3);
        REQUIRE(s.cw[1].size() == 3);

        // chi and its derivatives at the partner position.
        auto chi_at = [&](double y) {
            const double u = (y - cy) / wy;
            return std::pow(std::numbers::pi * wy * wy, -0.25) * std::exp(-0.5 * u * u) *
                   std::polar(1.0, py * y);
        };
        const Complex c0 = chi_at(pos[1]);
        const Complex d1 = Complex(-(pos[1] - cy) / (wy * wy), py);
        const Complex c1 = d1 * c0;
        const Complex c2 = (d1 * d1 - 1.0 / (wy * wy)) * c0;

        const std::array<Complex, 3> factor{c0, c1, c2};
        for (int n = 0; n <= 2; ++n) {
            const double scale = s.cw[0][n].values.cwiseAbs().maxCoeff();
            const double err =
                (s.cw[0][n].values - factor[n] * phi.values).cwiseAbs().maxCoeff();
            REQUIRE(err < 1e-6 * scale);
        }

        // Mirror family: particle 2 sees phi-derivatives at its partner.
        const Complex p0 = std::pow(std::numbers::pi * wx * wx, -0.25) *
                           std::exp(-0.5 * std::pow((pos[0] - cx) / wx, 2)) *
                           std::polar(1.0, px * pos[0]);
        const Complex p1 = Complex(-(pos[0] - cx) / (wx * wx), px) * p0;
        const double err1 =
            (s.cw[1][1].values - p1 * chi.values).cwiseAbs().maxCoeff();
        REQUIRE(err1 < 1e-6 * s.cw[1][1].values.cwiseAbs().maxCoeff());
    }

    SECTION("depth zero is exactly the order-zero slice") {
        const ComplexField phi = testutil::gaussian_field(g, 0.2, 1.0);
        const ComplexField chi = testutil::gaussian_field(g, -0.3, 1.2);
        const Field2D psi = product_state(phi, chi);
        const HierarchyState s = init_from_2body(psi, 0, {0.5, -0.25}, {1.0, 2.0});
        REQUIRE(bits_equal(s.cw[0][0].values, conditional_slice(psi, 0, -0.25, 0).values));
        REQUIRE(bits_equal(s.cw[1][0].values, conditional_slice(psi, 1, 0.5, 0).values));
    }

    SECTION("entangled ground state yields finite, spectrally decaying level 7") {
        const HierarchyState s =
            init_from_2body(bench_ground_state().state, 7, {1.0, 2.0}, {1.0, 100.0});
        for (int i = 0; i < 2; ++i)
            for (const ComplexField& f : s.cw[i]) REQUIRE(f.values.allFinite());

        const Eigen::VectorXcd spec = fft_forward(s.cw[0][7].values);
        const int n = bench_light().n;
        double peak = spec.cwiseAbs().maxCoeff(), tail = 0.0;
        for (int j = 0; j < n; ++j)
            if (std::abs(bench_light().k(j)) >= 0.8 * std::numbers::pi / bench_light().dx)
                tail = std::max(tail, std::abs(spec[j]));
        REQUIRE(peak > 0.0);
        REQUIRE(tail < 1e-6 * peak);
    }

    SECTION("guards") {
        const Field2D psi = product_state(testutil::gaussian_field(g), testutil::gaussian_field(g));
        REQUIRE_THROWS_AS(init_from_2body(psi, -1, {0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
        REQUIRE_THROWS_AS(init_from_2body(psi, 2, {17.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
        REQUIRE_THROWS_AS(init_from_2body(psi, 2, {0.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
    }
}

TEST_CASE("depth zero matches the Hermitian-limit ensemble bit for bit") {
    const Grid1D g = Grid1D::make(-8.0, 8.0, 128);
    SystemSpec sys;
    sys.n_bosons = 2;
    sys.trap = {1.0, 1.0};
    sys.pair = PairInteractionSpec::harmonic(0.3);
    sys.schedule = Schedule::sudden();

    const GroundState2D gs = ground_state_2body(two_body(sys), g, g, 0.3);
    const Eigen::Vector2d pos{0.4, -0.3};

    OrbitalBasis basis = build_orbitals(g, trap_potential(sys.trap, g), 1);
    Eigen::MatrixXd pmat(2, 1);
    pmat << pos[0], pos[1];
    Ensemble e = make_ensemble(basis, sys, pmat, 7);
    e.configs[0].cws.push_back({conditional_slice(gs.state, 0, pos[1], 0), 0, 0});
    e.configs[0].cws.push_back({conditional_slice(gs.state, 1, pos[0], 0), 1, 0});
    e.validate();

    HierarchyState h = init_from_2body(gs.state, 0, pos, {1.0, 1.0});

    const double dt = 0.005;
    const int steps = 30;
    ipw_run(e, dt, steps, IpwMode::HermitianLimit);
    hierarchy_run(h, two_body(sys), dt, steps);

    REQUIRE(e.configs[0].positions[0] == h.positions[0]);
    REQUIRE(e.configs[0].positions[1] == h.positions[1]);
    REQUIRE(bits_equal(e.configs[0].cws[0].values.values, h.cw[0][0].values));
    REQUIRE(bits_equal(e.configs[0].cws[1].values.values, h.cw[1][0].values));
    REQUIRE(e.time == h.time);
    REQUIRE(e.diag.velocity_regularizations == h.diag.velocity_regularizations);
    REQUIRE(e.diag.frozen_configs == h.diag.frozen_configs);
    REQUIRE_FALSE(h.frozen);
}

TEST_CASE("product ground state stays stationary at every depth") {
    const Grid1D g = Grid1D::make(-16.0, 16.0, 256);
    OrbitalBasis basis = build_orbitals(g, testutil::harmonic_potential(g, 1.0), 1);
    const ComplexField phi0 = basis.orbital(0);
    const Field2D psi = product_state(phi0, phi0);
    const TwoBodySpec evo{TrapSpec{1.0, 1.0}, TrapSpec{1.0, 1.0}, PairInteractionSpec::none(),
                          Schedule::sudden()};

    const double dt = 0.002;
    const int steps = 5000;  // t in [0, 10]
    for (int depth : {0, 3}) {
        HierarchyState s = init_from_2body(psi, depth, {0.7, -0.5}, {1.0, 1.0});
        const double norm0 = std::sqrt(s.cw[0][0].squared_norm());
        double drift = 0.0, norm_drift = 0.0;
        for (int k = 0; k < steps; ++k) {
            s = hierarchy_step(s, evo, dt);
            drift = std::max(drift, std::abs(s.positions[0] - 0.7));
            drift = std::max(drift, std::abs(s.positions[1] + 0.5));
            if (depth == 0)
                norm_drift = std::max(
                    norm_drift, std::abs(std::sqrt(s.cw[0][0].squared_norm()) / norm0 - 1.0));
        }
        INFO("depth " << depth << ": position drift " << drift);
        REQUIRE(drift < 1e-6);
        if (depth == 0) REQUIRE(norm_drift < 1e-8);  // sourceless level is unitary
        REQUIRE_FALSE(s.frozen);
    }
}

TEST_CASE("light-heavy benchmark: deeper hierarchies track the exact trajectory longer") {
    const GroundState2D& gs = bench_ground_state();

    // Prepared state is the coupled-oscillator ground state.
    const double e_exact = testutil::coupled_oscillators(1.0, 2.0, 0.1, 0.1, 1.0).energy;
    REQUIRE(gs.energy == Catch::Approx(e_exact).margin(1e-5));

    const TwoBodySpec evo = bench_evolution();
    const double period = 2.0 * std::numbers::pi / std::sqrt(0.1);  // light trap cycle

    // Exact pilot-wave trajectory, sampled every 0.1 through one cycle.
    Eigen::Matrix2Xd w(2, 1);
    w << 1.0, 2.0;
    const ExactTrajectories ex =
        exact_bohmian_trajectories(evo, gs.state, w, 0.0, 0.002, 9950, 50);
    REQUIRE(ex.diag.frozen_configs == 0);
    const std::size_t n_samples = ex.times.size();

    double lo = 1e300, hi = -1e300;
    for (std::size_t m = 0; m < n_samples; ++m) {
        lo = std::min(lo, ex.positions[m](0, 0));
        hi = std::max(hi, ex.positions[m](0, 0));
    }
    const double amplitude = 0.5 * (hi - lo);
    REQUIRE(amplitude > 1.0);

    std::array<double, 3> max_err{};   // depths 0, 3, 7 over the full cycle
    std::array<double, 3> horizon{};   // first time the error exceeds 10% of amplitude
    const std::array<int, 3> depths{0, 3, 7};
    for (std::size_t d = 0; d < depths.size(); ++d) {
        HierarchyState s = init_from_2body(gs.state, depths[d], {1.0, 2.0}, {1.0, 100.0});
        std::vector<double> x1{s.positions[0]};
        for (int k = 0; k < 3980; ++k) {
            s = hierarchy_step(s, evo, 0.005);
            if ((k + 1) % 20 == 0) x1.push_back(s.positions[0]);
        }
        REQUIRE_FALSE(s.frozen);
        horizon[d] = 1e300;
        for (std::size_t m = 0; m < n_samples && m < x1.size(); ++m) {
            const double err = std::abs(x1[m] - ex.positions[m](0, 0));
            max_err[d] = std::max(max_err[d], err);
            if (horizon[d] > 1e299 && err > 0.1 * amplitude) horizon[d] = ex.times[m];
        }
        INFO("depth " << depths[d] << ": max error " << max_err[d] << ", horizon " << horizon[d]);
    }

    // The bare pilot wave breaks down at about half a trap cycle...
    REQUIRE(horizon[0] > 0.45 * period);
    REQUIRE(horizon[0] < 0.65 * period);
    // ...deeper truncations hold on monotonically longer...
    REQUIRE(horizon[1] > horizon[0]);
    REQUIRE(horizon[2] > horizon[1]);
    // ...and depth 7 stays within 10% of the swing through the whole cycle.
    REQUIRE(horizon[2] > 1e299);
    REQUIRE(max_err[2] < 0.1 * amplitude);
    REQUIRE(max_err[2] < 0.5 * max_err[0]);
}

TEST_CASE("stepper guards and the escape freeze") {
    const Grid1D g = Grid1D::make(-8.0, 8.0, 128);
    const TwoBodySpec free_pair{TrapSpec{0.0, 1.0}, TrapSpec{0.0, 1.0},
                                PairInteractionSpec::none(), Schedule::sudden()};

    const ComplexField mover = testutil::gaussian_field(g, 6.8, 0.7, 3.0);
    const ComplexField parked = testutil::gaussian_field(g, 0.0, 1.0, 0.0);
    const Field2D psi = product_state(mover, parked);
    HierarchyState s = init_from_2body(psi, 1, {6.8, 0.0}, {1.0, 1.0});

    SECTION("bad inputs throw") {
        REQUIRE_THROWS_AS(hierarchy_step(s, free_pair, 0.0), std::invalid_argument);
        const TwoBodySpec wrong_mass{TrapSpec{0.0, 1.0}, TrapSpec{0.0, 2.0},
                                     PairInteractionSpec::none(), Schedule::sudden()};
        REQUIRE_THROWS_AS(hierarchy_step(s, wrong_mass, 0.01), std::invalid_argument);
        HierarchyState mangled = s;
        mangled.cw[1].pop_back();
        REQUIRE_THROWS_AS(hierarchy_step(mangled, free_pair, 0.01), std::invalid_argument);
    }

    SECTION("leaving the grid freezes the pre-step state and further steps throw") {
        int steps = 0;
        while (!s.frozen && steps < 40) {
            const HierarchyState before = s;
            s = hierarchy_step(s, free_pair, 0.1);
            ++steps;
            if (s.frozen) {
                REQUIRE(s.positions[0] == before.positions[0]);
                REQUIRE(bits_equal(s.cw[0][0].values, before.cw[0][0].values));
                REQUIRE(bits_equal(s.cw[0][1].values, before.cw[0][1].values));
            }
        }
        REQUIRE(s.frozen);
        REQUIRE(s.positions[0] < 8.0);
        REQUIRE(s.diag.frozen_configs == 1);
        REQUIRE_THROWS_AS(hierarchy_step(s, free_pair, 0.1), std::runtime_error);
    }
}
