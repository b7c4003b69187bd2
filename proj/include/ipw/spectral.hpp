#pragma once

#include <cmath>
#include <utility>

#include "ipw/fft.hpp"
#include "ipw/grid.hpp"

namespace ipw {

namespace detail {

/// Multiply a forward spectrum by (ik)^order in place; odd orders zero the
/// Nyquist bin, whose sign is ambiguous on the grid.
inline void apply_derivative_spectrum(const Grid1D& g, Eigen::VectorXcd& spec, int order) {
    const Complex iu(0.0, 1.0);
    for (int j = 0; j < g.n; ++j) {
        if (j == g.n / 2 && order % 2 == 1) {
            spec[j] = 0.0;
            continue;
        }
        spec[j] *= std::pow(iu * g.k(j), order);
    }
}

}  // namespace detail

inline ComplexField spectral_derivative(const ComplexField& f, int order) {
    if (order < 1) throw std::invalid_argument("spectral_derivative: order must be >= 1");
    Eigen::VectorXcd spec = fft_forward(f.values);
    detail::apply_derivative_spectrum(f.grid, spec, order);
    return ComplexField(f.grid, fft_inverse(spec));
}

/// Band-limited (truncated Fourier series) evaluation of a grid field at
/// arbitrary points. The Nyquist mode is split symmetrically (cosine form) so
/// nodal values are reproduced exactly.
class Interpolant {
  public:
    explicit Interpolant(const ComplexField& f)
        : grid_(f.grid), coeff_(fft_forward(f.values)) {}
    Interpolant(const Grid1D& g, Eigen::VectorXcd spectrum)
        : grid_(g), coeff_(std::move(spectrum)) {
        if (coeff_.size() != g.n)
            throw std::invalid_argument("Interpolant: spectrum size does not match grid");
    }

    const Grid1D& grid() const { return grid_; }
    const Eigen::VectorXcd& spectrum() const { return coeff_; }

    Complex value_at(double x) const {
        check_domain(x);
        return sum_at(x).first;
    }

    /// Value and first derivative from the same phase sweep.
    std::pair<Complex, Complex> value_and_slope_at(double x) const {
        check_domain(x);
        return sum_at(x);
    }

  private:
    void check_domain(double x) const {
        if (!grid_.contains(x))
            throw std::domain_error("Interpolant: point outside grid domain");
    }

    std::pair<Complex, Complex> sum_at(double x) const {
        const int n = grid_.n;
        const double theta = x - grid_.x_min;
        const double dk = 2.0 * std::numbers::pi / grid_.length();
        const Complex omega = std::polar(1.0, dk * theta);
        const Complex iu(0.0, 1.0);

        Complex value = coeff_[0];
        Complex slope = 0.0;
        Complex phase = 1.0;
        for (int j = 1; j < n / 2; ++j) {
            phase *= omega;
            const double kj = dk * j;
            const Complex up = coeff_[j] * phase;
            const Complex dn = coeff_[n - j] * std::conj(phase);
            value += up + dn;
            slope += iu * kj * (up - dn);
        }
        const double knyq = dk * (n / 2);
        value += coeff_[n / 2] * std::cos(knyq * theta);
        slope += -coeff_[n / 2] * knyq * std::sin(knyq * theta);
        return {value / double(n), slope / double(n)};
    }

    Grid1D grid_;
    Eigen::VectorXcd coeff_;
};

inline Complex interpolate_at(const ComplexField& f, double x) {
    return Interpolant(f).value_at(x);
}

namespace detail {

inline Eigen::VectorXcd kinetic_phase(const Grid1D& g, Complex dt, double mass) {
    const Complex iu(0.0, 1.0);
    Eigen::VectorXcd ph(g.n);
    for (int j = 0; j < g.n; ++j) {
        const double k = g.k(j);
        ph[j] = std::exp(-iu * dt * (k * k / (2.0 * mass)));
    }
    return ph;
}

inline Eigen::VectorXcd potential_half_phase(const Eigen::VectorXd& V, Complex dt) {
    const Complex iu(0.0, 1.0);
    Eigen::VectorXcd ph(V.size());
    for (Eigen::Index j = 0; j < V.size(); ++j) ph[j] = std::exp(-iu * dt * (0.5 * V[j]));
    return ph;
}

inline Eigen::VectorXcd strang_apply(const Eigen::VectorXcd& v, const Eigen::VectorXcd& vhalf,
                                     const Eigen::VectorXcd& kin) {
    Eigen::VectorXcd out = vhalf.cwiseProduct(v);
    out = fft_forward(out);
    out = out.cwiseProduct(kin);
    out = fft_inverse(out);
    out = out.cwiseProduct(vhalf);
    return out;
}

}  // namespace detail

/// One Strang-split step exp(-i H dt) with H = -1/(2m) d^2/dx^2 + V(x).
/// Purely imaginary dt (dt = -i*tau) gives an imaginary-time relaxation step.
inline ComplexField split_operator_step(const ComplexField& f, const Eigen::VectorXd& V,
                                        Complex dt, double mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("split_operator_step: mass must be positive");
    if (V.size() != f.grid.n)
        throw std::invalid_argument("split_operator_step: potential size does not match grid");
    if (dt == Complex(0.0, 0.0))
        throw std::invalid_argument("split_operator_step: dt must be nonzero");
    const Eigen::VectorXcd vhalf = detail::potential_half_phase(V, dt);
    const Eigen::VectorXcd kin = detail::kinetic_phase(f.grid, dt, mass);
    return ComplexField(f.grid, detail::strang_apply(f.values, vhalf, kin));
}

inline ComplexField split_operator_step(const ComplexField& f, const Eigen::VectorXd& V,
                                        double dt, double mass) {
    return split_operator_step(f, V, Complex(dt, 0.0), mass);
}

/// <f| -1/(2m) d^2/dx^2 |f> via Parseval (unnormalized f).
inline double kinetic_term(const ComplexField& f, double mass) {
    const Eigen::VectorXcd spec = fft_forward(f.values);
    double acc = 0.0;
    for (int j = 0; j < f.grid.n; ++j) {
        const double k = f.grid.k(j);
        acc += k * k * std::norm(spec[j]);
    }
    return acc * f.grid.dx / (2.0 * mass * f.grid.n);
}

/// <f| V |f> by grid quadrature (unnormalized f).
inline double potential_term(const ComplexField& f, const Eigen::VectorXd& V) {
    if (V.size() != f.grid.n)
        throw std::invalid_argument("potential_term: potential size does not match grid");
    double acc = 0.0;
    for (int j = 0; j < f.grid.n; ++j) acc += V[j] * std::norm(f.values[j]);
    return acc * f.grid.dx;
}

}  // namespace ipw
