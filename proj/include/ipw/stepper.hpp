#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "ipw/dynamics.hpp"
#include "ipw/ensemble.hpp"
#include "ipw/leastsq.hpp"
#include "ipw/reconstruction.hpp"

namespace ipw {

/// Full evolves the conditional waves with their entangling source terms;
/// HermitianLimit drops the sources (independent pilot waves).
enum class IpwMode { Full, HermitianLimit };

namespace detail {

/// Source fields for every active configuration of one target particle:
///   W_i = sum_j [ i v_j psi1_{j} - psi2_{j}/(2 m) ].
/// The reconstruction weights of every (partner, order) solve lie in the span
/// of the retained right singular vectors V_r, so the per-configuration sums
/// are accumulated in that rank-dimensional space and expanded to the grid
/// with a single product against (Psi_i V_r).
inline Eigen::MatrixXcd source_fields(const Ensemble& e, const EvalTable& table, int target,
                                      const Eigen::MatrixXd& v_start, Diagnostics& diag) {
    const int nb = e.n_bosons();
    const int n_active = static_cast<int>(table.active.size());
    const int n = e.basis.grid.n;
    const double mass = e.system.trap.mass;
    const long len = tensor_length(e.m_orbitals(), nb);

    Eigen::MatrixXcd A(len, n_active);
    Eigen::MatrixXcd psi(n, n_active);
    for (int k = 0; k < n_active; ++k) {
        A.col(k) = tensor_row_from_evals(table.config_row(k), nb, target, DerivativeSpec{});
        psi.col(k) = e.configs[table.active[k]].cws[target].values.values;
    }
    const MinNormLsq lsq(A, kSvdRelCutoff);

    Eigen::MatrixXcd range;  // n x rank
    range.noalias() = psi * lsq.range_basis();

    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(lsq.rank(), n_active);
    Eigen::MatrixXcd b(len, n_active), coeffs;
    Eigen::VectorXd residuals, rhs_norms;
    Eigen::VectorXcd scale(n_active);
    for (int j = 0; j < nb; ++j) {
        if (j == target) continue;
        for (int order = 1; order <= 2; ++order) {
            for (int k = 0; k < n_active; ++k)
                b.col(k) = tensor_row_from_evals(table.config_row(k), nb, target,
                                                 DerivativeSpec{j, order});
            lsq.project_batch(b, coeffs, residuals, rhs_norms);
            for (int k = 0; k < n_active; ++k)
                if (residuals[k] > kIllConditionedResidual * rhs_norms[k])
                    ++diag.ill_conditioned_solves;
            if (order == 1) {
                for (int k = 0; k < n_active; ++k) scale[k] = Complex(0.0, v_start(j, k));
            } else {
                scale.setConstant(Complex(-0.5 / mass, 0.0));
            }
            g.noalias() += coeffs * scale.asDiagonal();
        }
    }

    Eigen::MatrixXcd W;
    W.noalias() = range * g;
    return W;
}

}  // namespace detail

/// One ensemble step. Phase 1 reads the frozen state: start-of-step velocities
/// for every particle, then (Full mode) the reconstruction solves and source
/// fields. Phase 2 writes each configuration independently: all conditional
/// waves advance under their conditioned potentials, then all positions by the
/// midpoint rule. A position leaving the grid freezes its configuration in its
/// pre-step state.
inline void ipw_step(Ensemble& e, double dt, IpwMode mode) {
    if (!(dt > 0.0)) throw std::invalid_argument("ipw_step: dt must be positive");
    const int nb = e.n_bosons();
    const Grid1D& g = e.basis.grid;
    const double mass = e.system.trap.mass;
    const double strength = schedule_strength(e.system.schedule, e.system.pair, e.time);
    const std::vector<TrapSpec> traps(nb, e.system.trap);

    // Phase 1: read-only against the current state.
    const std::vector<int> active = e.active_ids();
    const int n_active = static_cast<int>(active.size());
    if (n_active == 0) throw std::runtime_error("ipw_step: every configuration is frozen");

    Eigen::MatrixXd v_start(nb, n_active);
    for (int k = 0; k < n_active; ++k) {
        const Configuration& c = e.configs[active[k]];
        for (int p = 0; p < nb; ++p)
            v_start(p, k) =
                VelocityEvaluator(c.cws[p].values).velocity_at(c.positions[p], mass, &e.diag);
    }

    std::vector<Eigen::MatrixXcd> sources;  // per particle: n x n_active
    if (mode == IpwMode::Full && nb > 1) {
        const EvalTable table = snapshot_evals(e);
        sources.reserve(nb);
        for (int i = 0; i < nb; ++i)
            sources.push_back(detail::source_fields(e, table, i, v_start, e.diag));
    }

    // Phase 2: per-configuration writes, no cross-configuration reads.
    for (int k = 0; k < n_active; ++k) {
        Configuration& c = e.configs[active[k]];

        std::vector<ComplexField> advanced;
        advanced.reserve(nb);
        for (int i = 0; i < nb; ++i) {
            const Eigen::VectorXd V =
                conditioned_potential(g, traps, e.system.pair, strength, c.positions, i);
            if (sources.empty()) {
                advanced.push_back(propagate_nonunitary(c.cws[i].values, mass, V, dt));
            } else {
                const Eigen::VectorXcd w = sources[i].col(k);
                advanced.push_back(propagate_nonunitary(c.cws[i].values, mass, V, dt, w));
            }
        }

        Eigen::VectorXd new_positions(nb);
        bool escaped = false;
        for (int i = 0; i < nb && !escaped; ++i) {
            const MidpointResult r =
                advance_position_midpoint(c.cws[i].values, advanced[i], c.positions[i],
                                          v_start(i, k), dt, mass, &e.diag);
            escaped = r.escaped;
            new_positions[i] = r.x;
        }

        if (escaped) {
            c.frozen = true;
            ++e.diag.frozen_configs;
            continue;  // pre-step waves and positions kept
        }
        for (int i = 0; i < nb; ++i) c.cws[i].values = std::move(advanced[i]);
        c.positions = new_positions;
    }

    e.time += dt;
}

/// Convenience driver: n_steps equal steps.
inline void ipw_run(Ensemble& e, double dt, int n_steps, IpwMode mode) {
    for (int s = 0; s < n_steps; ++s) ipw_step(e, dt, mode);
}

}  // namespace ipw
