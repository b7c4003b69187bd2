#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "ipw/diagnostics.hpp"
#include "ipw/dynamics.hpp"
#include "ipw/exactref.hpp"
#include "ipw/model.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// Two coupled families of conditional waves for one two-particle trajectory:
/// level n of particle i is the n-th partner derivative of the full state,
/// sliced at the partner position. Level 0 is the pilot wave that guides X_i;
/// the higher levels feed its source terms. Each family lives on its own grid.
struct HierarchyState {
    int depth = 0;
    std::array<std::vector<ComplexField>, 2> cw;  // [particle][level 0..depth]
    Eigen::Vector2d positions = Eigen::Vector2d::Zero();
    std::array<double, 2> masses{1.0, 1.0};
    double time = 0.0;
    bool frozen = false;  // a position left its grid; the trajectory is dead
    Diagnostics diag;

    void validate() const {
        if (depth < 0) throw std::invalid_argument("HierarchyState: negative depth");
        for (int i = 0; i < 2; ++i) {
            if (static_cast<int>(cw[i].size()) != depth + 1)
                throw std::invalid_argument("HierarchyState: each family needs depth+1 fields");
            for (const ComplexField& f : cw[i])
                if (!(f.grid == cw[i][0].grid))
                    throw std::invalid_argument("HierarchyState: mixed grids within one family");
            if (!(masses[i] > 0.0))
                throw std::invalid_argument("HierarchyState: masses must be positive");
            if (!cw[i][0].grid.contains(positions[i]))
                throw std::invalid_argument("HierarchyState: position outside its grid");
        }
    }
};

/// Slices a two-particle state into the derivative families of both particles:
/// particle 1 holds x -> d^n Psi/dY^n at Y = X2, particle 2 the mirror image.
inline HierarchyState init_from_2body(const Field2D& psi, int depth,
                                      const Eigen::Vector2d& positions,
                                      const std::array<double, 2>& masses) {
    if (depth < 0) throw std::invalid_argument("init_from_2body: negative depth");
    if (!psi.gx.contains(positions[0]) || !psi.gy.contains(positions[1]))
        throw std::invalid_argument("init_from_2body: position outside the domain");
    if (!(masses[0] > 0.0) || !(masses[1] > 0.0))
        throw std::invalid_argument("init_from_2body: masses must be positive");

    HierarchyState s;
    s.depth = depth;
    s.positions = positions;
    s.masses = masses;
    for (int n = 0; n <= depth; ++n) {
        s.cw[0].push_back(conditional_slice(psi, 0, positions[1], n));
        s.cw[1].push_back(conditional_slice(psi, 1, positions[0], n));
    }
    return s;
}

namespace detail {

inline double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c *= static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

}  // namespace detail

/// One step of the truncated hierarchy. Level n of particle i obeys
///   i d/dt psi^n = [-(1/2 m_i) dxx + V(x, X_j)] psi^n + W_n,
///   W_n = sum_{k>=1} C(n,k) d^k V/dX_j^k psi^{n-k}
///         - psi^{n+2}/(2 m_j) + i dX_j/dt psi^{n+1},
/// with levels beyond the depth closed to zero. The homogeneous part and the
/// trapezoid source handling, the velocity floor, and the midpoint position
/// rule are the ensemble stepper's own helpers called in its order, so a
/// depth-0 state advances bit-for-bit like a one-configuration Hermitian-limit
/// ensemble. The potential parameter contributes trap curvatures, the pair
/// term, and its schedule; its masses must match the state's.
inline HierarchyState hierarchy_step(const HierarchyState& s, const TwoBodySpec& potential,
                                     double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("hierarchy_step: dt must be positive");
    if (s.frozen) throw std::runtime_error("hierarchy_step: the trajectory is frozen");
    s.validate();
    const std::vector<TrapSpec> traps{potential.trap1, potential.trap2};
    if (traps[0].mass != s.masses[0] || traps[1].mass != s.masses[1])
        throw std::invalid_argument("hierarchy_step: potential masses disagree with the state");

    const double strength = schedule_strength(potential.schedule, potential.pair, s.time);
    const PairInteractionSpec pair_now = potential.pair.at_strength(strength);

    HierarchyState out = s;

    // Phase 1: start-of-step velocities of both pilot waves.
    std::array<double, 2> v_start{};
    for (int i = 0; i < 2; ++i)
        v_start[i] =
            VelocityEvaluator(s.cw[i][0]).velocity_at(s.positions[i], s.masses[i], &out.diag);

    // Phase 2: every level advances from the frozen start-of-step fields.
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        const Grid1D& g = s.cw[i][0].grid;
        const Eigen::VectorXd V =
            conditioned_potential(g, traps, potential.pair, strength, s.positions, i);
        for (int n = 0; n <= s.depth; ++n) {
            if (n == 0 && s.depth == 0) {  // no neighbors above, no coupling below
                out.cw[i][n] = propagate_nonunitary(s.cw[i][n], s.masses[i], V, dt);
                continue;
            }
            Eigen::VectorXcd W = Eigen::VectorXcd::Zero(g.n);
            for (int k = 1; k <= n; ++k) {
                const double c = detail::binomial(n, k);
                const double dtrap = trap_derivative(traps[j], s.positions[j], k);
                if (pair_now.kind == PairKind::None) {
                    if (dtrap != 0.0) W += (c * dtrap) * s.cw[i][n - k].values;
                } else {
                    Eigen::VectorXd dV(g.n);
                    for (int m = 0; m < g.n; ++m)
                        dV[m] = dtrap + pair_partner_derivative(pair_now, g.x(m), s.positions[j], k);
                    W.array() += c * dV.array() * s.cw[i][n - k].values.array();
                }
            }
            if (n + 1 <= s.depth) W += Complex(0.0, v_start[j]) * s.cw[i][n + 1].values;
            if (n + 2 <= s.depth) W -= (0.5 / s.masses[j]) * s.cw[i][n + 2].values;
            out.cw[i][n] = propagate_nonunitary(s.cw[i][n], s.masses[i], V, dt, W);
        }
    }

    // Phase 3: positions by the midpoint rule; leaving a grid freezes the
    // trajectory in its pre-step state.
    Eigen::Vector2d new_positions;
    bool escaped = false;
    for (int i = 0; i < 2 && !escaped; ++i) {
        const MidpointResult r = advance_position_midpoint(
            s.cw[i][0], out.cw[i][0], s.positions[i], v_start[i], dt, s.masses[i], &out.diag);
        escaped = r.escaped;
        new_positions[i] = r.x;
    }
    if (escaped) {
        HierarchyState kept = s;  // pre-step waves and positions
        kept.diag = out.diag;
        kept.frozen = true;
        ++kept.diag.frozen_configs;
        kept.time = s.time + dt;
        return kept;
    }
    out.positions = new_positions;
    out.time = s.time + dt;
    return out;
}

/// Convenience driver: n_steps equal steps in place.
inline void hierarchy_run(HierarchyState& s, const TwoBodySpec& potential, double dt,
                          int n_steps) {
    for (int k = 0; k < n_steps; ++k) s = hierarchy_step(s, potential, dt);
}

}  // namespace ipw
