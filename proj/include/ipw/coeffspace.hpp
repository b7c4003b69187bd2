#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ipw/dynamics.hpp"
#include "ipw/ensemble.hpp"
#include "ipw/leastsq.hpp"
#include "ipw/reconstruction.hpp"
#include "ipw/spectral.hpp"
#include "ipw/stepper.hpp"

namespace ipw {

/// One Bohmian configuration of two bosons with each conditional wave carried
/// as a coefficient vector over the ensemble's orbital basis.
struct CoeffConfiguration {
    int id = 0;
    Eigen::VectorXd positions;  // one per particle
    Eigen::MatrixXcd a;         // M x 2, column p = particle p's conditional wave
    bool frozen = false;
};

/// Two-boson ensemble in coefficient representation — the alternative stepper
/// backend used to cross-check the grid-space one. Evolution only ever touches
/// the per-configuration coefficient vectors, never a full coefficient matrix.
struct CoefficientEnsemble2 {
    OrbitalBasis basis;
    SystemSpec system;
    Eigen::MatrixXcd kinetic;  // <phi_i| -1/(2m) d^2/dx^2 |phi_j>
    std::vector<CoeffConfiguration> configs;
    double time = 0.0;
    std::uint64_t rng_seed = 0;
    Diagnostics diag;

    int n_configs() const { return static_cast<int>(configs.size()); }
    int m_orbitals() const { return basis.size(); }

    std::vector<int> active_ids() const {
        std::vector<int> ids;
        ids.reserve(configs.size());
        for (int w = 0; w < n_configs(); ++w)
            if (!configs[w].frozen) ids.push_back(w);
        return ids;
    }
};

/// Galerkin kinetic matrix of the basis, spectrally differentiated and
/// symmetrized against rounding.
inline Eigen::MatrixXcd kinetic_matrix(const OrbitalBasis& basis, double mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("kinetic_matrix: mass must be positive");
    const Grid1D& g = basis.grid;
    Eigen::MatrixXcd d2(g.n, basis.size());
    for (int m = 0; m < basis.size(); ++m) {
        Eigen::VectorXcd spec = fft_forward(basis.values.col(m));
        detail::apply_derivative_spectrum(g, spec, 2);
        d2.col(m) = fft_inverse(spec);
    }
    Eigen::MatrixXcd k = (-0.5 / mass) * (basis.values.adjoint() * d2) * g.dx;
    return 0.5 * (k + k.adjoint());
}

/// Coefficient twin of a two-boson grid ensemble: every conditional wave is
/// projected onto the basis span (losslessly when it already lies there).
inline CoefficientEnsemble2 project_coefficients(const Ensemble& e) {
    if (e.n_bosons() != 2)
        throw std::invalid_argument("project_coefficients: two-boson ensembles only");
    e.validate();

    CoefficientEnsemble2 ce{e.basis,  e.system,     kinetic_matrix(e.basis, e.system.trap.mass),
                            {},       e.time,       e.rng_seed,
                            e.diag};
    ce.configs.resize(e.configs.size());
    const double dx = e.basis.grid.dx;
    for (int w = 0; w < e.n_configs(); ++w) {
        const Configuration& c = e.configs[w];
        CoeffConfiguration& cc = ce.configs[w];
        cc.id = c.id;
        cc.positions = c.positions;
        cc.frozen = c.frozen;
        cc.a.resize(e.m_orbitals(), 2);
        for (int p = 0; p < 2; ++p)
            cc.a.col(p) = e.basis.values.adjoint() * c.cws[p].values.values * dx;
    }
    return ce;
}

/// Grid ensemble carrying the same state: conditional waves expanded back onto
/// the grid so every grid-side estimator applies unchanged.
inline Ensemble to_grid_ensemble(const CoefficientEnsemble2& ce) {
    if (ce.n_configs() == 0) throw std::invalid_argument("to_grid_ensemble: no configurations");
    Eigen::MatrixXd pos(2, ce.n_configs());
    for (int w = 0; w < ce.n_configs(); ++w) pos.col(w) = ce.configs[w].positions;

    Ensemble e = make_ensemble(ce.basis, ce.system, pos, ce.rng_seed);
    e.time = ce.time;
    e.diag = ce.diag;
    for (int w = 0; w < e.n_configs(); ++w) {
        const CoeffConfiguration& cc = ce.configs[w];
        Configuration& c = e.configs[w];
        c.frozen = cc.frozen;
        c.cws.reserve(2);
        for (int p = 0; p < 2; ++p)
            c.cws.push_back(ConditionalWavefunction{
                ComplexField(ce.basis.grid, ce.basis.values * cc.a.col(p)), p, c.id});
    }
    e.validate();
    return e;
}

namespace detail {

/// Value of an expanded wave at one point (basis evaluations are not
/// conjugated: this is plain summation of a_i phi_i(x)).
inline Complex expansion_value(const Eigen::VectorXcd& basis_at_x, const Eigen::VectorXcd& a) {
    return (basis_at_x.transpose() * a).value();
}

/// Guidance velocity of a coefficient-represented wave with the same
/// quasi-node floor as the grid evaluator (fraction of the grid maximum).
inline double expansion_velocity(const OrbitalEval& ev, const Eigen::VectorXcd& a, double max_abs,
                                 double mass, Diagnostics* diag) {
    const Complex psi = expansion_value(ev.value, a);
    if (std::abs(psi) < kVelocityFloor * max_abs) {
        if (diag) ++diag->velocity_regularizations;
        return 0.0;
    }
    return std::imag(expansion_value(ev.d1, a) / psi) / mass;
}

/// Fourth-order Runge-Kutta step of i da/dt = H a + w with H and w frozen
/// across the step.
inline Eigen::VectorXcd rk4_expansion_step(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& w,
                                           const Eigen::VectorXcd& a, double dt) {
    const Complex mi(0.0, -1.0);
    const Eigen::VectorXcd k1 = mi * (H * a + w);
    const Eigen::VectorXcd k2 = mi * (H * (a + (0.5 * dt) * k1) + w);
    const Eigen::VectorXcd k3 = mi * (H * (a + (0.5 * dt) * k2) + w);
    const Eigen::VectorXcd k4 = mi * (H * (a + dt * k3) + w);
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// One ensemble step in coefficient space, mirroring the grid stepper's two
/// phases: a read-only snapshot (velocities, then source coefficient vectors
/// from the shared minimum-norm solves) and per-configuration writes (RK4 on
/// the projected wave equation, midpoint positions, escape freezing).
inline void coeff_step(CoefficientEnsemble2& e, double dt, IpwMode mode) {
    if (!(dt > 0.0)) throw std::invalid_argument("coeff_step: dt must be positive");
    if (e.system.n_bosons != 2)
        throw std::invalid_argument("coeff_step: two-boson ensembles only");
    const Grid1D& g = e.basis.grid;
    const int m = e.m_orbitals();
    const double mass = e.system.trap.mass;
    const double strength = schedule_strength(e.system.schedule, e.system.pair, e.time);
    const std::vector<TrapSpec> traps(2, e.system.trap);

    // Phase 1: read-only against the current state.
    const std::vector<int> active = e.active_ids();
    const int n_active = static_cast<int>(active.size());
    if (n_active == 0) throw std::runtime_error("coeff_step: every configuration is frozen");

    std::vector<OrbitalEval> evals(static_cast<size_t>(n_active) * 2);
    Eigen::MatrixXd v_start(2, n_active);
    for (int k = 0; k < n_active; ++k) {
        const CoeffConfiguration& c = e.configs[active[k]];
        for (int p = 0; p < 2; ++p) {
            OrbitalEval& ev = evals[static_cast<size_t>(k) * 2 + p];
            e.basis.eval_into(c.positions[p], ev);
            const double max_abs = (e.basis.values * c.a.col(p)).cwiseAbs().maxCoeff();
            v_start(p, k) = detail::expansion_velocity(ev, c.a.col(p), max_abs, mass, &e.diag);
        }
    }

    std::vector<Eigen::MatrixXcd> sources;  // per particle: m x n_active
    if (mode == IpwMode::Full) {
        sources.reserve(2);
        for (int target = 0; target < 2; ++target) {
            const int partner = 1 - target;
            Eigen::MatrixXcd phi(m, n_active), ac(m, n_active), b1(m, n_active), b2(m, n_active);
            for (int k = 0; k < n_active; ++k) {
                const OrbitalEval& ev = evals[static_cast<size_t>(k) * 2 + partner];
                phi.col(k) = ev.value;
                b1.col(k) = ev.d1;
                b2.col(k) = ev.d2;
                ac.col(k) = e.configs[active[k]].a.col(target);
            }
            const MinNormLsq lsq(phi, kSvdRelCutoff);
            Eigen::MatrixXcd range;  // m x rank
            range.noalias() = ac * lsq.range_basis();

            Eigen::MatrixXcd coeffs;
            Eigen::VectorXd residuals, rhs_norms;
            Eigen::VectorXcd scale(n_active);

            lsq.project_batch(b1, coeffs, residuals, rhs_norms);
            for (int k = 0; k < n_active; ++k)
                if (residuals[k] > kIllConditionedResidual * rhs_norms[k])
                    ++e.diag.ill_conditioned_solves;
            for (int k = 0; k < n_active; ++k) scale[k] = Complex(0.0, v_start(partner, k));
            Eigen::MatrixXcd gmat = coeffs * scale.asDiagonal();

            lsq.project_batch(b2, coeffs, residuals, rhs_norms);
            for (int k = 0; k < n_active; ++k)
                if (residuals[k] > kIllConditionedResidual * rhs_norms[k])
                    ++e.diag.ill_conditioned_solves;
            gmat += coeffs * Complex(-0.5 / mass, 0.0);

            Eigen::MatrixXcd w;
            w.noalias() = range * gmat;
            sources.push_back(std::move(w));
        }
    }

    // Phase 2: per-configuration writes, no cross-configuration reads.
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(m);
    for (int k = 0; k < n_active; ++k) {
        CoeffConfiguration& c = e.configs[active[k]];

        Eigen::MatrixXcd a_new(m, 2);
        for (int t = 0; t < 2; ++t) {
            const Eigen::VectorXcd vc =
                conditioned_potential(g, traps, e.system.pair, strength, c.positions, t)
                    .cast<Complex>();
            Eigen::MatrixXcd h = e.kinetic;
            h.noalias() += (e.basis.values.adjoint() * (vc.asDiagonal() * e.basis.values)) * g.dx;
            const Eigen::VectorXcd& w = sources.empty() ? zero : sources[t].col(k);
            a_new.col(t) = detail::rk4_expansion_step(h, w, c.a.col(t), dt);
        }

        Eigen::VectorXd new_positions(2);
        bool escaped = false;
        for (int t = 0; t < 2 && !escaped; ++t) {
            const double x_mid = c.positions[t] + 0.5 * dt * v_start(t, k);
            if (!g.contains(x_mid)) {
                escaped = true;
                break;
            }
            const Eigen::VectorXcd a_mid = 0.5 * (c.a.col(t) + a_new.col(t));
            const double max_abs = (e.basis.values * a_mid).cwiseAbs().maxCoeff();
            const double v_mid =
                detail::expansion_velocity(e.basis.eval(x_mid), a_mid, max_abs, mass, &e.diag);
            const double x_new = c.positions[t] + dt * v_mid;
            if (!g.contains(x_new)) {
                escaped = true;
                break;
            }
            new_positions[t] = x_new;
        }

        if (escaped) {
            c.frozen = true;
            ++e.diag.frozen_configs;
            continue;  // pre-step coefficients and positions kept
        }
        c.a = std::move(a_new);
        c.positions = new_positions;
    }

    e.time += dt;
}

/// Convenience driver: n_steps equal steps.
inline void coeff_run(CoefficientEnsemble2& e, double dt, int n_steps, IpwMode mode) {
    for (int s = 0; s < n_steps; ++s) coeff_step(e, dt, mode);
}

}  // namespace ipw
