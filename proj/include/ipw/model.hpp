#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ipw/diagnostics.hpp"
#include "ipw/grid.hpp"

namespace ipw {

/// Harmonic confinement V(x) = k x^2 / 2 for particles of the given mass.
struct TrapSpec {
    double k = 1.0;
    double mass = 1.0;
};

inline double trap_value(const TrapSpec& t, double x) { return 0.5 * t.k * x * x; }

inline double trap_derivative(const TrapSpec& t, double x, int order) {
    switch (order) {
        case 0: return trap_value(t, x);
        case 1: return t.k * x;
        case 2: return t.k;
        default: return 0.0;
    }
}

inline Eigen::VectorXd trap_potential(const TrapSpec& t, const Grid1D& g) {
    Eigen::VectorXd V(g.n);
    for (int j = 0; j < g.n; ++j) V[j] = trap_value(t, g.x(j));
    return V;
}

enum class PairKind { None, Harmonic, Gaussian };

/// Translation-invariant pair interaction V(x - y) at full strength k.
struct PairInteractionSpec {
    PairKind kind = PairKind::None;
    double k = 0.0;
    double sigma = 0.0;

    static PairInteractionSpec none() { return {}; }
    static PairInteractionSpec harmonic(double k) {
        if (k < 0.0) throw std::invalid_argument("PairInteractionSpec: strength must be >= 0");
        return {PairKind::Harmonic, k, 0.0};
    }
    static PairInteractionSpec gaussian(double k, double sigma) {
        if (k < 0.0) throw std::invalid_argument("PairInteractionSpec: strength must be >= 0");
        if (!(sigma > 0.0)) throw std::invalid_argument("PairInteractionSpec: sigma must be > 0");
        return {PairKind::Gaussian, k, sigma};
    }
    PairInteractionSpec at_strength(double k_eff) const {
        PairInteractionSpec s = *this;
        s.k = k_eff;
        return s;
    }
};

inline double pair_potential(const PairInteractionSpec& s, double x, double y) {
    const double u = x - y;
    switch (s.kind) {
        case PairKind::None: return 0.0;
        case PairKind::Harmonic: return 0.5 * s.k * u * u;
        case PairKind::Gaussian: {
            const double s2 = s.sigma * s.sigma;
            return s.k / std::sqrt(2.0 * std::numbers::pi * s2) * std::exp(-u * u / (2.0 * s2));
        }
    }
    return 0.0;
}

/// d^order/dy^order of the pair potential at fixed x. Gaussian derivatives use
/// the Hermite recurrence H_{m+1}(z) = 2 z H_m(z) - 2 m H_{m-1}(z) applied to
/// d^m/du^m exp(-u^2/(2 s^2)) = (-1/(s sqrt(2)))^m H_m(u/(s sqrt(2))) exp(..),
/// combined with d/dy = -d/du.
inline double pair_partner_derivative(const PairInteractionSpec& s, double x, double y,
                                      int order) {
    if (order < 0) throw std::invalid_argument("pair_partner_derivative: negative order");
    if (order == 0) return pair_potential(s, x, y);
    const double u = x - y;
    switch (s.kind) {
        case PairKind::None: return 0.0;
        case PairKind::Harmonic:
            if (order == 1) return -s.k * u;
            if (order == 2) return s.k;
            return 0.0;
        case PairKind::Gaussian: {
            const double a = 1.0 / (s.sigma * std::numbers::sqrt2);
            const double z = u * a;
            double hm1 = 0.0, h = 1.0;  // H_0
            for (int m = 0; m < order; ++m) {
                const double hn = 2.0 * z * h - 2.0 * m * hm1;
                hm1 = h;
                h = hn;
            }
            const double du = std::pow(-a, order) * h *
                              std::exp(-z * z) * s.k /
                              std::sqrt(2.0 * std::numbers::pi * s.sigma * s.sigma);
            return (order % 2 == 0 ? du : -du);  // chain rule for y = x - u
        }
    }
    return 0.0;
}

/// Interaction strength ramp. Sudden applies the pair spec's full strength for
/// all t >= 0; Adiabatic ramps as k_max (1 - exp(-rate t^2)).
struct Schedule {
    enum class Kind { Sudden, Adiabatic } kind = Kind::Sudden;
    double k_max = 0.0;
    double rate = 0.0;

    static Schedule sudden() { return {}; }
    static Schedule adiabatic(double k_max, double rate) {
        if (k_max < 0.0) throw std::invalid_argument("Schedule: k_max must be >= 0");
        if (!(rate > 0.0)) throw std::invalid_argument("Schedule: rate must be > 0");
        return {Kind::Adiabatic, k_max, rate};
    }
};

inline double schedule_strength(const Schedule& s, const PairInteractionSpec& pair, double t) {
    if (s.kind == Schedule::Kind::Sudden) return pair.k;
    return s.k_max * (1.0 - std::exp(-s.rate * t * t));
}

inline double full_strength(const Schedule& s, const PairInteractionSpec& pair) {
    return s.kind == Schedule::Kind::Sudden ? pair.k : s.k_max;
}

/// N identical bosons in a trap with a scheduled pair interaction.
struct SystemSpec {
    int n_bosons = 2;
    TrapSpec trap;
    PairInteractionSpec pair;
    Schedule schedule;

    void validate() const {
        if (n_bosons < 1) throw std::invalid_argument("SystemSpec: need at least one boson");
        if (!(trap.mass > 0.0)) throw std::invalid_argument("SystemSpec: mass must be positive");
        if (trap.k < 0.0) throw std::invalid_argument("SystemSpec: trap strength must be >= 0");
        if (schedule.kind == Schedule::Kind::Adiabatic) {
            if (pair.kind == PairKind::None)
                throw std::invalid_argument("SystemSpec: adiabatic schedule needs an interaction");
            if (std::abs(schedule.k_max - pair.k) > 1e-12 * std::max(1.0, std::abs(pair.k)))
                throw std::invalid_argument(
                    "SystemSpec: adiabatic k_max must equal the pair strength");
        }
    }
};

/// Mean-field potential for one particle: trap plus the density-weighted pair
/// interaction. rho is renormalized (with a diagnostic) if its quadrature is
/// off; genuinely negative densities are rejected.
inline Eigen::VectorXd effective_potential(const TrapSpec& trap, const PairInteractionSpec& pair,
                                           const Grid1D& g, const Eigen::VectorXd& rho,
                                           Diagnostics* diag = nullptr) {
    if (rho.size() != g.n)
        throw std::invalid_argument("effective_potential: density size does not match grid");
    if (rho.minCoeff() < -1e-12)
        throw std::invalid_argument("effective_potential: density must be nonnegative");

    Eigen::VectorXd density = rho.cwiseMax(0.0);
    const double total = density.sum() * g.dx;
    if (!(total > 0.0)) throw std::invalid_argument("effective_potential: density is empty");
    if (std::abs(total - 1.0) > 1e-8) {
        density /= total;
        if (diag) ++diag->renormalized_density;
    }

    Eigen::VectorXd V = trap_potential(trap, g);
    if (pair.kind != PairKind::None) {
        for (int j = 0; j < g.n; ++j) {
            double acc = 0.0;
            for (int l = 0; l < g.n; ++l)
                acc += density[l] * pair_potential(pair, g.x(j), g.x(l));
            V[j] += acc * g.dx;
        }
    }
    return V;
}

}  // namespace ipw
