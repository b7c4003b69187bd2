#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ipw {

using Complex = std::complex<double>;

/// Uniform periodic grid on [x_min, x_max); n must be a power of two.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 0.0;
    int n = 0;
    double dx = 0.0;

    static Grid1D make(double x_min, double x_max, int n) {
        if (!(x_max > x_min))
            throw std::invalid_argument("Grid1D: x_max must exceed x_min");
        if (n < 8 || (n & (n - 1)) != 0)
            throw std::invalid_argument("Grid1D: n must be a power of two >= 8, got " +
                                        std::to_string(n));
        Grid1D g;
        g.x_min = x_min;
        g.x_max = x_max;
        g.n = n;
        g.dx = (x_max - x_min) / n;
        return g;
    }

    double length() const { return x_max - x_min; }
    double x(int j) const { return x_min + j * dx; }
    bool contains(double x) const { return x >= x_min && x < x_max; }

    /// Signed wavenumber of DFT bin j (Nyquist bin kept positive).
    double k(int j) const {
        const double dk = 2.0 * std::numbers::pi / length();
        return dk * (j <= n / 2 ? j : j - n);
    }

    Eigen::VectorXd points() const {
        Eigen::VectorXd p(n);
        for (int j = 0; j < n; ++j) p[j] = x(j);
        return p;
    }

    bool operator==(const Grid1D&) const = default;
};

/// Complex-valued samples on a Grid1D.
struct ComplexField {
    Grid1D grid;
    Eigen::VectorXcd values;

    ComplexField() = default;
    ComplexField(const Grid1D& g, Eigen::VectorXcd v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.n)
            throw std::invalid_argument("ComplexField: value count does not match grid");
    }
    static ComplexField zero(const Grid1D& g) {
        return ComplexField(g, Eigen::VectorXcd::Zero(g.n));
    }

    double squared_norm() const { return grid.dx * values.squaredNorm(); }
    double norm() const { return std::sqrt(squared_norm()); }

    ComplexField& normalize() {
        const double nrm = norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm))
            throw std::domain_error("ComplexField: cannot normalize empty or non-finite field");
        values /= nrm;
        return *this;
    }
    ComplexField normalized() const {
        ComplexField f = *this;
        f.normalize();
        return f;
    }
    bool finite() const { return values.allFinite(); }
};

inline Complex inner(const ComplexField& a, const ComplexField& b) {
    if (a.grid != b.grid) throw std::invalid_argument("inner: fields on different grids");
    return a.grid.dx * a.values.dot(b.values);  // Eigen dot conjugates the left factor
}

}  // namespace ipw
