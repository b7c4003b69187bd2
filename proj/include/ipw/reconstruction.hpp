#pragma once

#include <stdexcept>
#include <vector>

#include "ipw/ensemble.hpp"
#include "ipw/leastsq.hpp"

namespace ipw {

/// Residuals above this fraction of ||b|| flag an ill-conditioned ensemble.
constexpr double kIllConditionedResidual = 1e-6;
/// Relative singular-value cutoff of the reconstruction least-squares solves.
constexpr double kSvdRelCutoff = 1e-10;

/// Which partner factor of a tensor row carries a derivative, and of what
/// order. order 0 requests the plain row; particle is ignored then.
struct DerivativeSpec {
    int particle = -1;
    int order = 0;
};

/// Orbital values and derivatives of one configuration, one entry per particle.
/// The raw material of tensor rows; computed once per step and shared.
struct EvalTable {
    std::vector<int> active;          // config indices, ascending
    std::vector<OrbitalEval> evals;   // active.size() * n_bosons, particle fastest
    int n_bosons = 0;

    const OrbitalEval* config_row(int k) const { return &evals[static_cast<size_t>(k) * n_bosons]; }
};

inline EvalTable snapshot_evals(const Ensemble& e) {
    EvalTable t;
    t.active = e.active_ids();
    t.n_bosons = e.n_bosons();
    t.evals.resize(t.active.size() * t.n_bosons);
    for (size_t k = 0; k < t.active.size(); ++k) {
        const Configuration& c = e.configs[t.active[k]];
        for (int p = 0; p < t.n_bosons; ++p)
            e.basis.eval_into(c.positions[p], t.evals[k * t.n_bosons + p]);
    }
    return t;
}

namespace detail {

/// Flattened outer product of the partner orbital rows of one configuration,
/// the spec.particle factor differentiated spec.order times. Row-major
/// flattening: ascending particle index varies slowest, orbital index fastest.
inline Eigen::VectorXcd tensor_row_from_evals(const OrbitalEval* evals, int n_bosons,
                                              int target_particle, DerivativeSpec spec) {
    Eigen::VectorXcd row(1);
    row[0] = 1.0;
    for (int p = 0; p < n_bosons; ++p) {
        if (p == target_particle) continue;
        const OrbitalEval& ev = evals[p];
        const Eigen::VectorXcd& factor =
            (p == spec.particle) ? (spec.order == 1 ? ev.d1 : ev.d2) : ev.value;
        Eigen::VectorXcd next(row.size() * factor.size());
        for (Eigen::Index a = 0; a < row.size(); ++a)
            next.segment(a * factor.size(), factor.size()) = row[a] * factor;
        row = std::move(next);
    }
    return row;
}

inline void check_derivative_spec(int n_bosons, int target_particle, DerivativeSpec spec) {
    if (target_particle < 0 || target_particle >= n_bosons)
        throw std::invalid_argument("tensor_row: target particle out of range");
    if (spec.order < 0 || spec.order > 2)
        throw std::invalid_argument("tensor_row: derivative order must be 0, 1 or 2");
    if (spec.order > 0) {
        if (spec.particle < 0 || spec.particle >= n_bosons)
            throw std::invalid_argument("tensor_row: derivative particle out of range");
        if (spec.particle == target_particle)
            throw std::invalid_argument("tensor_row: cannot differentiate the target factor");
    }
}

}  // namespace detail

inline Eigen::VectorXcd tensor_row(const Configuration& c, const OrbitalBasis& basis,
                                   int target_particle, DerivativeSpec spec) {
    const int nb = static_cast<int>(c.positions.size());
    detail::check_derivative_spec(nb, target_particle, spec);
    std::vector<OrbitalEval> evals(nb);
    for (int p = 0; p < nb; ++p) basis.eval_into(c.positions[p], evals[p]);
    return detail::tensor_row_from_evals(evals.data(), nb, target_particle, spec);
}

struct ReconstructionSolution {
    Eigen::VectorXcd coeffs;  // one weight per configuration (zero at frozen slots)
    double residual = 0.0;    // ||A coeffs - b||_2
};

/// The reconstruction linear system of one target particle: columns of A are
/// the order-0 tensor rows of every active configuration. Factored once, used
/// for every derivative right-hand side of that particle.
class ReconstructionSystem {
  public:
    ReconstructionSystem(const Ensemble& e, const EvalTable& table, int target_particle)
        : target_(target_particle), lsq_(assemble(e, table, target_particle)) {}

    ReconstructionSystem(const Ensemble& e, int target_particle)
        : ReconstructionSystem(e, snapshot_evals(e), target_particle) {}

    int target_particle() const { return target_; }
    const MinNormLsq& solver() const { return lsq_; }

  private:
    static Eigen::MatrixXcd assemble(const Ensemble& e, const EvalTable& table, int target) {
        detail::check_derivative_spec(e.n_bosons(), target, DerivativeSpec{});
        const long len = tensor_length(e.m_orbitals(), e.n_bosons());
        Eigen::MatrixXcd A(len, static_cast<Eigen::Index>(table.active.size()));
        for (size_t k = 0; k < table.active.size(); ++k)
            A.col(k) = detail::tensor_row_from_evals(table.config_row(static_cast<int>(k)),
                                                     e.n_bosons(), target, DerivativeSpec{});
        return A;
    }

    int target_;
    MinNormLsq lsq_;
};

/// Weights w with sum_w w_w cw_w ~= the derivative conditional wave psi^order
/// of the target particle, differentiated along the partner's coordinate.
/// Minimum-norm least squares against the active ensemble; residuals above
/// kIllConditionedResidual * ||b|| bump the ill-conditioned counter and the
/// solution is still returned (propagation continues).
inline ReconstructionSolution solve_reconstruction(const Ensemble& e, int target_config,
                                                   int target_particle, int partner, int order,
                                                   Diagnostics* diag = nullptr) {
    if (order != 1 && order != 2)
        throw std::invalid_argument("solve_reconstruction: order must be 1 or 2");
    if (target_config < 0 || target_config >= e.n_configs())
        throw std::invalid_argument("solve_reconstruction: configuration out of range");
    if (e.configs[target_config].frozen)
        throw std::invalid_argument("solve_reconstruction: configuration is frozen");

    const EvalTable table = snapshot_evals(e);
    const ReconstructionSystem system(e, table, target_particle);

    int k_target = -1;
    for (size_t k = 0; k < table.active.size(); ++k)
        if (table.active[k] == target_config) k_target = static_cast<int>(k);

    const Eigen::VectorXcd b = detail::tensor_row_from_evals(
        table.config_row(k_target), e.n_bosons(), target_particle, DerivativeSpec{partner, order});
    const LsqSolution sol = system.solver().solve(b);
    if (sol.residual > kIllConditionedResidual * b.norm() && diag) ++diag->ill_conditioned_solves;

    ReconstructionSolution out;
    out.residual = sol.residual;
    out.coeffs = Eigen::VectorXcd::Zero(e.n_configs());
    for (size_t k = 0; k < table.active.size(); ++k) out.coeffs[table.active[k]] = sol.weights[k];
    return out;
}

/// The grid field sum_w coeffs_w cw_w of the target particle's conditional
/// waves — the reconstructed derivative wave itself.
inline ComplexField combine_cws(const Ensemble& e, int target_particle,
                                const Eigen::VectorXcd& coeffs) {
    if (coeffs.size() != e.n_configs())
        throw std::invalid_argument("combine_cws: one weight per configuration required");
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(e.basis.grid.n);
    for (int w = 0; w < e.n_configs(); ++w) {
        if (coeffs[w] == Complex(0.0, 0.0)) continue;
        acc += coeffs[w] * e.configs[w].cws[target_particle].values.values;
    }
    return ComplexField(e.basis.grid, std::move(acc));
}

}  // namespace ipw
