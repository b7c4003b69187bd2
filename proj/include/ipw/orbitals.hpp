#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "ipw/fft.hpp"
#include "ipw/grid.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// Values and first two derivatives of every basis orbital at one point.
struct OrbitalEval {
    Eigen::VectorXcd value;
    Eigen::VectorXcd d1;
    Eigen::VectorXcd d2;
};

/// Orthonormal single-particle basis sampled on a grid, with cached spectra so
/// off-grid evaluation of values and derivatives costs three short GEMVs.
class OrbitalBasis {
public:
    Grid1D grid;
    Eigen::MatrixXcd values;   // n x M, unit L2 norm columns
    Eigen::VectorXd energies;  // M, ascending

    OrbitalBasis(const Grid1D& g, Eigen::MatrixXcd vals, Eigen::VectorXd es)
        : grid(g), values(std::move(vals)), energies(std::move(es)) {
        if (values.rows() != grid.n || values.cols() != energies.size())
            throw std::invalid_argument("OrbitalBasis: inconsistent shapes");
        const int n = grid.n;
        const int m = static_cast<int>(values.cols());
        spectra_.resize(n, m);
        for (int c = 0; c < m; ++c) spectra_.col(c) = fft_forward(values.col(c));
        spectra_d1_ = spectra_;
        spectra_d2_ = spectra_;
        for (int j = 0; j < n; ++j) {
            const double kj = grid.k(j);
            spectra_d1_.row(j) *= Complex(0.0, kj);
            spectra_d2_.row(j) *= -kj * kj;
        }
    }

    int size() const { return static_cast<int>(values.cols()); }

    ComplexField orbital(int m) const {
        ComplexField f(grid, values.col(m));
        return f;
    }

    void eval_into(double x, OrbitalEval& out) const {
        if (!grid.contains(x)) throw std::domain_error("OrbitalBasis::eval: point off the grid");
        const int n = grid.n;
        Eigen::VectorXcd p(n);
        const double theta = x - grid.x_min;
        const double dk = 2.0 * std::numbers::pi / (grid.x_max - grid.x_min);
        const Complex w = std::polar(1.0, dk * theta);
        p[0] = 1.0;
        Complex cur = 1.0;
        for (int j = 1; j < n / 2; ++j) {
            cur *= w;
            p[j] = cur;
            p[n - j] = std::conj(cur);
        }
        const double kn_theta = grid.k(n / 2) * theta;
        // Real-signal Nyquist convention: cos(k theta) for even derivative
        // orders; the i*sin entry below combines with the ik factor already in
        // spectra_d1_ to give the matching -k sin(k theta) slope term.
        p[n / 2] = std::cos(kn_theta);
        out.value.noalias() = (p.transpose() * spectra_).transpose() / double(n);
        out.d2.noalias() = (p.transpose() * spectra_d2_).transpose() / double(n);
        p[n / 2] = Complex(0.0, std::sin(kn_theta));
        out.d1.noalias() = (p.transpose() * spectra_d1_).transpose() / double(n);
    }

    OrbitalEval eval(double x) const {
        OrbitalEval out;
        eval_into(x, out);
        return out;
    }

private:
    Eigen::MatrixXcd spectra_, spectra_d1_, spectra_d2_;
};

/// Lowest m eigenstates of -1/(2 mass) d^2/dx^2 + V on the grid, by dense
/// diagonalization of the circulant spectral kinetic matrix plus diag(V).
/// Columns are L2-normalized with the largest-magnitude sample made positive.
/// Throws if the requested count strains the grid (m > n/4) or an orbital
/// fails to decay at the domain edges.
inline OrbitalBasis build_orbitals(const Grid1D& g, const Eigen::VectorXd& V, int m_orbitals,
                                   double mass = 1.0) {
    if (V.size() != g.n) throw std::invalid_argument("build_orbitals: potential size mismatch");
    if (m_orbitals < 1) throw std::invalid_argument("build_orbitals: need at least one orbital");
    if (m_orbitals > g.n / 4)
        throw std::invalid_argument("build_orbitals: too many orbitals for this grid");
    if (!(mass > 0.0)) throw std::invalid_argument("build_orbitals: mass must be positive");

    const int n = g.n;
    Eigen::VectorXcd spec(n);
    for (int j = 0; j < n; ++j) {
        const double kj = g.k(j);
        spec[j] = kj * kj / (2.0 * mass);
    }
    const Eigen::VectorXcd kernel = fft_inverse(spec);

    Eigen::MatrixXd H(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) H(j, l) = kernel[(j - l + n) % n].real();
    H = 0.5 * (H + H.transpose()).eval();
    H.diagonal() += V;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(H);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("build_orbitals: eigensolver failed");

    Eigen::MatrixXcd vals(n, m_orbitals);
    Eigen::VectorXd energies(m_orbitals);
    const double inv_sqrt_dx = 1.0 / std::sqrt(g.dx);
    for (int m = 0; m < m_orbitals; ++m) {
        Eigen::VectorXd v = solver.eigenvectors().col(m) * inv_sqrt_dx;
        int peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        if (v[peak] < 0.0) v = -v;
        const double edge = std::max(std::abs(v[0]), std::abs(v[n - 1]));
        if (edge > 1e-5 * std::abs(v[peak]))
            throw std::runtime_error("build_orbitals: orbital " + std::to_string(m) +
                                     " does not decay at the domain edges");
        vals.col(m) = v.cast<Complex>();
        energies[m] = solver.eigenvalues()[m];
    }
    return OrbitalBasis(g, std::move(vals), std::move(energies));
}

}  // namespace ipw
