#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "ipw/grid.hpp"

namespace testutil {

inline ipw::ComplexField gaussian_field(const ipw::Grid1D& g, double center = 0.0,
                                        double width = 1.0, double momentum = 0.0) {
    Eigen::VectorXcd v(g.n);
    const double a = std::pow(std::numbers::pi * width * width, -0.25);
    for (int j = 0; j < g.n; ++j) {
        const double x = g.x(j);
        const double u = (x - center) / width;
        v[j] = a * std::exp(-0.5 * u * u) * std::polar(1.0, momentum * x);
    }
    return ipw::ComplexField(g, v);
}

/// Smooth random band-limited field from a few low Fourier modes.
inline ipw::ComplexField random_smooth_field(const ipw::Grid1D& g, unsigned seed,
                                             int max_mode = 6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g.n);
    for (int m = 0; m <= max_mode; ++m) {
        const std::complex<double> cp(u(rng), u(rng));
        const std::complex<double> cm(u(rng), u(rng));
        const double k = 2.0 * std::numbers::pi * m / g.length();
        for (int j = 0; j < g.n; ++j) {
            const double th = k * (g.x(j) - g.x_min);
            v[j] += cp * std::polar(1.0, th) + cm * std::polar(1.0, -th);
        }
    }
    return ipw::ComplexField(g, v);
}

inline Eigen::VectorXd harmonic_potential(const ipw::Grid1D& g, double k = 1.0) {
    Eigen::VectorXd V(g.n);
    for (int j = 0; j < g.n; ++j) V[j] = 0.5 * k * g.x(j) * g.x(j);
    return V;
}

/// Free-particle evolution of the unit-width Gaussian ground state (m = 1).
inline std::complex<double> free_gaussian(double x, double t) {
    const std::complex<double> w(1.0, t);
    return std::pow(std::numbers::pi, -0.25) / std::sqrt(w) * std::exp(-x * x / (2.0 * w));
}

/// Ground-state analytics for two coupled oscillators
/// H = p1^2/2m1 + p2^2/2m2 + k1 x1^2/2 + k2 x2^2/2 + kc (x1 - x2)^2/2,
/// worked out in mass-weighted coordinates u_i = sqrt(m_i) x_i.
struct CoupledOscillators {
    double omega_a = 0.0, omega_b = 0.0;  // normal-mode frequencies, descending
    double energy = 0.0;                  // ground-state energy
    Eigen::Matrix2d xcov;                 // ground-state <x_i x_j>
    Eigen::Vector2d psq;                  // ground-state <p_i^2>
};

inline CoupledOscillators coupled_oscillators(double m1, double m2, double k1, double k2,
                                              double kc) {
    Eigen::Matrix2d K;
    K << (k1 + kc) / m1, -kc / std::sqrt(m1 * m2), -kc / std::sqrt(m1 * m2), (k2 + kc) / m2;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(K);
    const Eigen::Vector2d w = es.eigenvalues().cwiseSqrt();
    const Eigen::Matrix2d V = es.eigenvectors();

    CoupledOscillators out;
    out.omega_a = w[1];
    out.omega_b = w[0];
    out.energy = 0.5 * (w[0] + w[1]);
    const Eigen::Matrix2d ucov = V * (0.5 * w.cwiseInverse()).asDiagonal() * V.transpose();
    const Eigen::Matrix2d udotcov = V * (0.5 * w).asDiagonal() * V.transpose();
    const double s1 = std::sqrt(m1), s2 = std::sqrt(m2);
    out.xcov << ucov(0, 0) / (s1 * s1), ucov(0, 1) / (s1 * s2), ucov(1, 0) / (s1 * s2),
        ucov(1, 1) / (s2 * s2);
    out.psq << m1 * udotcov(0, 0), m2 * udotcov(1, 1);
    return out;
}

/// <x^2>(t) of a free oscillator (mass m, trap k) whose initial state has
/// second moments xsq0, psq0 and no symmetrized x-p correlation.
inline double oscillator_xsq(double t, double m, double k, double xsq0, double psq0) {
    const double w = std::sqrt(k / m);
    const double c = std::cos(w * t), s = std::sin(w * t);
    return xsq0 * c * c + psq0 * s * s / (m * w * m * w);
}

}  // namespace testutil
