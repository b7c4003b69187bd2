#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipw/diagnostics.hpp"
#include "ipw/ensemble.hpp"
#include "ipw/exactref.hpp"
#include "ipw/grid.hpp"
#include "ipw/model.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// Scalar time series of one recorded observable.
struct ObservableSeries {
    std::string name;
    std::vector<double> times;
    std::vector<double> values;

    void push(double t, double v) {
        if (!times.empty() && !(t > times.back()))
            throw std::invalid_argument("ObservableSeries: times must be strictly increasing");
        times.push_back(t);
        values.push_back(v);
    }

    void validate() const {
        if (times.size() != values.size())
            throw std::invalid_argument("ObservableSeries: times/values length mismatch");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("ObservableSeries: times must be strictly increasing");
    }
};

/// One-particle density matrix rho(x', x) sampled on the grid. The trace
/// metric is dx * sum of the diagonal; occupations are eigenvalues of rho*dx.
struct ReducedDensityMatrix {
    Grid1D grid;
    Eigen::MatrixXcd rho;

    void validate() const {
        if (rho.rows() != grid.n || rho.cols() != grid.n)
            throw std::invalid_argument("ReducedDensityMatrix: matrix size does not match grid");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::runtime_error("ReducedDensityMatrix: not Hermitian");
        const Complex tr = rho.trace() * grid.dx;
        if (std::abs(tr.real() - 1.0) > 1e-6 || std::abs(tr.imag()) > 1e-8)
            throw std::runtime_error("ReducedDensityMatrix: trace is not 1");
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho,
                                                                 Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() * grid.dx < -1e-8)
            throw std::runtime_error("ReducedDensityMatrix: negative occupation");
    }
};

struct NaturalOrbitals {
    Eigen::VectorXd occupations;  // descending; sum to the RDM trace
    Eigen::MatrixXcd orbitals;    // column i pairs with occupations[i]; dx-normalized
};

namespace detail {

inline double checked_real(Complex z, const char* who) {
    if (std::abs(z.imag()) > 1e-8 * std::max(1.0, std::abs(z)))
        throw std::runtime_error(std::string(who) + ": imaginary residue above 1e-8");
    return z.real();
}

/// <f| A |f> for a real multiplicative operator on an unnormalized field,
/// kept complex so the caller can assert the residue it discards.
inline Complex diagonal_quadrature(const ComplexField& f, const Eigen::VectorXd& op) {
    if (op.size() != f.grid.n)
        throw std::invalid_argument("observables: operator size does not match grid");
    Complex acc(0.0, 0.0);
    for (int j = 0; j < f.grid.n; ++j) acc += std::conj(f.values[j]) * op[j] * f.values[j];
    return acc * f.grid.dx;
}

/// <A> and the squared norm of one field in a single pass, so op = identity
/// yields a ratio of the same accumulated sum.
struct QuadTerm {
    double num = 0.0;
    double den = 0.0;
};

inline QuadTerm diagonal_term(const ComplexField& f, const Eigen::VectorXd& op) {
    if (op.size() != f.grid.n)
        throw std::invalid_argument("observables: operator size does not match grid");
    QuadTerm t;
    for (int j = 0; j < f.grid.n; ++j) {
        const double d = std::norm(f.values[j]);
        t.num += op[j] * d;
        t.den += d;
    }
    t.num *= f.grid.dx;
    t.den *= f.grid.dx;
    return t;
}

/// Sorted unique partner coordinates of the active configurations with
/// midpoint-gap weights: interior weights are half the two adjacent gaps, end
/// weights half the single adjacent gap, so the weights sum to the sampled
/// span. Tied coordinates merge into one location that splits its weight
/// evenly among its members.
struct RiemannPartition {
    std::vector<double> y;
    std::vector<double> delta;
    std::vector<std::vector<int>> members;  // ensemble config indices
};

inline RiemannPartition riemann_partition(const Ensemble& e, int partner) {
    std::vector<std::pair<double, int>> samples;
    samples.reserve(e.configs.size());
    for (int w = 0; w < e.n_configs(); ++w)
        if (!e.configs[w].frozen) samples.emplace_back(e.configs[w].positions[partner], w);
    std::sort(samples.begin(), samples.end());

    RiemannPartition part;
    for (const auto& [yw, w] : samples) {
        if (part.y.empty() || yw != part.y.back()) {
            part.y.push_back(yw);
            part.members.emplace_back();
        }
        part.members.back().push_back(w);
    }
    const int n = static_cast<int>(part.y.size());
    if (n < 2)
        throw std::runtime_error(
            "riemann estimator: need at least two distinct partner coordinates");
    part.delta.resize(n);
    for (int k = 0; k < n; ++k) {
        const double lo = k > 0 ? part.y[k - 1] : part.y[k];
        const double hi = k + 1 < n ? part.y[k + 1] : part.y[k];
        part.delta[k] = 0.5 * (hi - lo);
    }
    return part;
}

template <typename Integrand>
double riemann_sum(const Ensemble& e, int target, const char* who, Integrand&& integrand) {
    if (e.n_bosons() != 2)
        throw std::invalid_argument(std::string(who) + ": defined for two bosons");
    if (target < 0 || target >= 2)
        throw std::invalid_argument(std::string(who) + ": target out of range");
    const RiemannPartition part = riemann_partition(e, 1 - target);
    Complex acc(0.0, 0.0);
    for (std::size_t k = 0; k < part.y.size(); ++k) {
        Complex loc(0.0, 0.0);
        for (int w : part.members[k]) loc += integrand(e.configs[w], part.y[k]);
        acc += (part.delta[k] / static_cast<double>(part.members[k].size())) * loc;
    }
    return checked_real(acc, who);
}

}  // namespace detail

/// Expectation of a real multiplicative one-body operator as a Riemann sum
/// over the sorted partner coordinates, using unnormalized conditional waves
/// so each term carries the joint-density amplitude of its slice.
inline double expectation_riemann(const Ensemble& e, const Eigen::VectorXd& op, int target) {
    return detail::riemann_sum(e, target, "expectation_riemann",
                               [&](const Configuration& c, double) {
                                   return detail::diagonal_quadrature(c.cws[target].values, op);
                               });
}

/// Two-body variant: the pair potential conditioned on each configuration's
/// partner coordinate. Pass the spec at its effective strength.
inline double expectation_riemann(const Ensemble& e, const PairInteractionSpec& pair,
                                  int target) {
    Eigen::VectorXd op(e.basis.grid.n);
    return detail::riemann_sum(e, target, "expectation_riemann",
                               [&](const Configuration& c, double y) {
                                   const Grid1D& g = c.cws[target].values.grid;
                                   for (int j = 0; j < g.n; ++j)
                                       op[j] = pair_potential(pair, g.x(j), y);
                                   return detail::diagonal_quadrature(c.cws[target].values, op);
                               });
}

/// One-particle density rho(x) = sum_w Delta_w |psi_w(x)|^2 on the grid.
inline Eigen::VectorXd density_riemann(const Ensemble& e, int target) {
    if (e.n_bosons() != 2)
        throw std::invalid_argument("density_riemann: defined for two bosons");
    if (target < 0 || target >= 2)
        throw std::invalid_argument("density_riemann: target out of range");
    const detail::RiemannPartition part = detail::riemann_partition(e, 1 - target);
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(e.basis.grid.n);
    for (std::size_t k = 0; k < part.y.size(); ++k) {
        const double wgt = part.delta[k] / static_cast<double>(part.members[k].size());
        for (int w : part.members[k])
            rho += wgt * e.configs[w].cws[target].values.values.cwiseAbs2();
    }
    return rho;
}

/// Mean over all active configurations and particles of the single-particle
/// expectation per normalized conditional wave. Each term is a ratio of sums
/// accumulated in one pass, so the identity operator gives exactly 1.
/// Zero-norm waves are skipped and counted in the diagnostics.
inline double expectation_normalized(const Ensemble& e, const Eigen::VectorXd& op,
                                     Diagnostics* diag = nullptr) {
    double acc = 0.0;
    long long included = 0;
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        for (const ConditionalWavefunction& cw : c.cws) {
            const detail::QuadTerm t = detail::diagonal_term(cw.values, op);
            if (!(t.den > 0.0)) {
                if (diag) ++diag->zero_norm_skips;
                continue;
            }
            acc += t.num / t.den;
            ++included;
        }
    }
    if (included == 0)
        throw std::runtime_error("expectation_normalized: no usable conditional waves");
    return acc / static_cast<double>(included);
}

/// Mean-field pair potential: the pair kernel convolved once with the
/// ensemble-averaged normalized density, midpoint quadrature. Pass the spec
/// at its effective strength.
inline Eigen::VectorXd mean_field_potential(const Ensemble& e, const PairInteractionSpec& pair,
                                            Diagnostics* diag = nullptr) {
    const Grid1D& g = e.basis.grid;
    if (pair.kind == PairKind::None) return Eigen::VectorXd::Zero(g.n);

    Eigen::VectorXd rho_bar = Eigen::VectorXd::Zero(g.n);
    long long included = 0;
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        for (const ConditionalWavefunction& cw : c.cws) {
            const double den = cw.values.squared_norm();
            if (!(den > 0.0)) {
                if (diag) ++diag->zero_norm_skips;
                continue;
            }
            rho_bar += cw.values.values.cwiseAbs2() / den;
            ++included;
        }
    }
    if (included == 0)
        throw std::runtime_error("mean_field_potential: no usable conditional waves");
    rho_bar /= static_cast<double>(included);

    Eigen::VectorXd vbar(g.n);
    for (int j = 0; j < g.n; ++j) {
        double conv = 0.0;
        for (int l = 0; l < g.n; ++l) conv += rho_bar[l] * pair_potential(pair, g.x(j), g.x(l));
        vbar[j] = conv * g.dx;
    }
    return vbar;
}

/// Mean of X^2 over every particle of every active configuration.
inline double xsq_from_trajectories(const Ensemble& e) {
    double acc = 0.0;
    long long count = 0;
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        acc += c.positions.squaredNorm();
        count += c.positions.size();
    }
    if (count == 0)
        throw std::runtime_error("xsq_from_trajectories: every configuration is frozen");
    return acc / static_cast<double>(count);
}

/// Averaged outer product of the normalized conditional waves over all active
/// configurations and particles.
inline ReducedDensityMatrix reduced_density_matrix(const Ensemble& e,
                                                   Diagnostics* diag = nullptr) {
    const Grid1D& g = e.basis.grid;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(g.n, g.n);
    long long included = 0;
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        for (const ConditionalWavefunction& cw : c.cws) {
            const double den = cw.values.squared_norm();
            if (!(den > 0.0)) {
                if (diag) ++diag->zero_norm_skips;
                continue;
            }
            rho.noalias() += cw.values.values * cw.values.values.adjoint() / den;
            ++included;
        }
    }
    if (included == 0)
        throw std::runtime_error("reduced_density_matrix: no usable conditional waves");
    rho /= static_cast<double>(included);
    return {g, std::move(rho)};
}

/// Exact one-particle density matrix of a two-body state: integrate out the
/// partner coordinate and normalize the trace.
inline ReducedDensityMatrix reduced_density_matrix(const Field2D& psi, int axis) {
    if (axis != 0 && axis != 1)
        throw std::invalid_argument("reduced_density_matrix: axis must be 0 or 1");
    Grid1D g = axis == 0 ? psi.gx : psi.gy;
    Eigen::MatrixXcd rho = axis == 0
                               ? Eigen::MatrixXcd(psi.values * psi.values.adjoint() * psi.gy.dx)
                               : Eigen::MatrixXcd(psi.values.transpose() * psi.values.conjugate() *
                                                  psi.gx.dx);
    const double tr = detail::checked_real(rho.trace() * g.dx, "reduced_density_matrix");
    if (!(tr > 0.0)) throw std::invalid_argument("reduced_density_matrix: state has zero norm");
    rho /= tr;
    return {std::move(g), std::move(rho)};
}

/// Natural orbitals as eigenstates of the density-matrix operator rho*dx,
/// occupations descending, orbitals quadrature-normalized.
inline NaturalOrbitals natural_orbitals(const ReducedDensityMatrix& r) {
    if (r.rho.rows() != r.grid.n || r.rho.cols() != r.grid.n)
        throw std::invalid_argument("natural_orbitals: matrix size does not match grid");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r.rho * r.grid.dx);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("natural_orbitals: eigensolver failed");
    const int n = r.grid.n;
    NaturalOrbitals out;
    out.occupations.resize(n);
    out.orbitals.resize(n, n);
    const double scale = 1.0 / std::sqrt(r.grid.dx);
    for (int i = 0; i < n; ++i) {
        out.occupations[i] = es.eigenvalues()[n - 1 - i];
        out.orbitals.col(i) = es.eigenvectors().col(n - 1 - i) * scale;
    }
    return out;
}

/// Total energy with the interaction at its scheduled strength at time t:
/// one-body kinetic and trap terms per particle from normalized waves, plus
/// one mean-field pair expectation per distinct pair.
inline double instantaneous_energy(const Ensemble& e, const SystemSpec& system, double t,
                                   Diagnostics* diag = nullptr) {
    const Grid1D& g = e.basis.grid;
    const Eigen::VectorXd vtrap = trap_potential(system.trap, g);

    double one_body = 0.0;
    long long included = 0;
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        for (const ConditionalWavefunction& cw : c.cws) {
            const double den = cw.values.squared_norm();
            if (!(den > 0.0)) {
                if (diag) ++diag->zero_norm_skips;
                continue;
            }
            one_body +=
                (kinetic_term(cw.values, system.trap.mass) + potential_term(cw.values, vtrap)) /
                den;
            ++included;
        }
    }
    if (included == 0)
        throw std::runtime_error("instantaneous_energy: no usable conditional waves");
    one_body /= static_cast<double>(included);

    double pair_term = 0.0;
    if (system.n_bosons >= 2 && system.pair.kind != PairKind::None) {
        const double strength = schedule_strength(system.schedule, system.pair, t);
        const Eigen::VectorXd vbar =
            mean_field_potential(e, system.pair.at_strength(strength), diag);
        pair_term = expectation_normalized(e, vbar, diag);
    }
    const double nb = static_cast<double>(system.n_bosons);
    return nb * one_body + 0.5 * nb * (nb - 1.0) * pair_term;
}

}  // namespace ipw
