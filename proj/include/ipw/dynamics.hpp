#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ipw/diagnostics.hpp"
#include "ipw/model.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// Velocities are forced to zero where |psi(X)| drops below this fraction of
/// the wave's grid maximum (quasi-node regularization).
constexpr double kVelocityFloor = 1e-6;

/// Bohmian guidance velocity of one conditional wave: Im[psi'(X)/psi(X)]/mass,
/// both factors band-limited interpolations. Caches the two interpolants so
/// repeated queries against the same wave cost one phase sweep each.
class VelocityEvaluator {
  public:
    explicit VelocityEvaluator(const ComplexField& cw)
        : value_(cw.grid, fft_forward(cw.values)),
          slope_(cw.grid, derivative_spectrum(cw.grid, value_.spectrum())),
          max_abs_(cw.values.cwiseAbs().maxCoeff()) {}

    double velocity_at(double x, double mass, Diagnostics* diag = nullptr) const {
        const Complex psi = value_.value_at(x);
        if (std::abs(psi) < kVelocityFloor * max_abs_) {
            if (diag) ++diag->velocity_regularizations;
            return 0.0;
        }
        return std::imag(slope_.value_at(x) / psi) / mass;
    }

    double max_abs() const { return max_abs_; }

  private:
    static Eigen::VectorXcd derivative_spectrum(const Grid1D& g, Eigen::VectorXcd spec) {
        detail::apply_derivative_spectrum(g, spec, 1);
        return spec;
    }

    Interpolant value_;
    Interpolant slope_;
    double max_abs_;
};

inline double bohmian_velocity(const ComplexField& cw, double x, double mass,
                               Diagnostics* diag = nullptr) {
    if (!(mass > 0.0)) throw std::invalid_argument("bohmian_velocity: mass must be positive");
    return VelocityEvaluator(cw).velocity_at(x, mass, diag);
}

/// Potential seen by one particle of a configuration: its own trap, the pair
/// interaction with each partner held at its current position, plus the
/// partner-only constants (partner traps, partner-partner pair energies) so
/// the conditional wave's phase tracks the full Hamiltonian.
inline Eigen::VectorXd conditioned_potential(const Grid1D& g, const std::vector<TrapSpec>& traps,
                                             const PairInteractionSpec& pair, double strength,
                                             const Eigen::VectorXd& positions, int target) {
    const int nb = static_cast<int>(positions.size());
    if (static_cast<int>(traps.size()) != nb)
        throw std::invalid_argument("conditioned_potential: one trap per particle required");
    if (target < 0 || target >= nb)
        throw std::invalid_argument("conditioned_potential: target out of range");

    const PairInteractionSpec ps = pair.at_strength(strength);
    double constant = 0.0;
    for (int j = 0; j < nb; ++j) {
        if (j == target) continue;
        constant += trap_value(traps[j], positions[j]);
        for (int l = j + 1; l < nb; ++l)
            if (l != target) constant += pair_potential(ps, positions[j], positions[l]);
    }

    Eigen::VectorXd V(g.n);
    for (int j = 0; j < g.n; ++j) {
        const double x = g.x(j);
        double v = trap_value(traps[target], x);
        for (int p = 0; p < nb; ++p)
            if (p != target) v += pair_potential(ps, x, positions[p]);
        V[j] = v + constant;
    }
    return V;
}

/// One step of i psi_t = H psi + W: the homogeneous factor by Strang splitting,
/// the source by the trapezoid
///   psi(dt) = e^{-iH dt} [psi(0) - i (dt/2) W_start] - i (dt/2) W_end.
/// Null sources reduce exactly to split_operator_step.
inline ComplexField propagate_nonunitary(const ComplexField& cw, double mass,
                                         const Eigen::VectorXd& V, double dt,
                                         const Eigen::VectorXcd* W_start,
                                         const Eigen::VectorXcd* W_end) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagate_nonunitary: dt must be positive");
    if ((W_start == nullptr) != (W_end == nullptr))
        throw std::invalid_argument("propagate_nonunitary: need both source endpoints or neither");
    if (W_start == nullptr) return split_operator_step(cw, V, dt, mass);
    if (W_start->size() != cw.grid.n || W_end->size() != cw.grid.n)
        throw std::invalid_argument("propagate_nonunitary: source size does not match grid");

    const Complex ihalf(0.0, 0.5 * dt);
    const ComplexField in(cw.grid, cw.values - ihalf * (*W_start));
    ComplexField out = split_operator_step(in, V, dt, mass);
    out.values -= ihalf * (*W_end);
    return out;
}

inline ComplexField propagate_nonunitary(const ComplexField& cw, double mass,
                                         const Eigen::VectorXd& V, double dt) {
    return propagate_nonunitary(cw, mass, V, dt, nullptr, nullptr);
}

/// Production form: one reconstruction per step, reused for both trapezoid
/// endpoints (the step-start source equals the previous step's end source).
inline ComplexField propagate_nonunitary(const ComplexField& cw, double mass,
                                         const Eigen::VectorXd& V, double dt,
                                         const Eigen::VectorXcd& W_lagged) {
    return propagate_nonunitary(cw, mass, V, dt, &W_lagged, &W_lagged);
}

struct MidpointResult {
    double x = 0.0;
    bool escaped = false;
};

/// Explicit midpoint advance of one position with the guiding wave averaged
/// across the step. v_start must be the pre-step wave's velocity at x (the
/// caller computes it once; it doubles as the source-term velocity). Leaving
/// the grid at either stage reports escaped with the position unchanged.
inline MidpointResult advance_position_midpoint(const ComplexField& cw_old,
                                                const ComplexField& cw_new, double x,
                                                double v_start, double dt, double mass,
                                                Diagnostics* diag = nullptr) {
    const double x_mid = x + 0.5 * dt * v_start;
    if (!cw_old.grid.contains(x_mid)) return {x, true};
    const ComplexField mid(cw_old.grid, 0.5 * (cw_old.values + cw_new.values));
    const double v_mid = VelocityEvaluator(mid).velocity_at(x_mid, mass, diag);
    const double x_new = x + dt * v_mid;
    if (!cw_old.grid.contains(x_new)) return {x, true};
    return {x_new, false};
}

}  // namespace ipw
