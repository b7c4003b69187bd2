#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ipw/diagnostics.hpp"
#include "ipw/grid.hpp"
#include "ipw/model.hpp"
#include "ipw/orbitals.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// One particle's pilot wave inside a configuration. Deliberately unnormalized:
/// it is a slice of the full wavefunction, not a state of its own.
struct ConditionalWavefunction {
    ComplexField values;
    int owner_particle = 0;
    int config_id = 0;
};

struct Configuration {
    int id = 0;
    Eigen::VectorXd positions;                 // one per particle
    std::vector<ConditionalWavefunction> cws;  // one per particle
    bool frozen = false;                       // escaped the grid; excluded from everything
};

inline long tensor_length(int m_orbitals, int n_bosons) {
    long len = 1;
    for (int p = 1; p < n_bosons; ++p) len *= m_orbitals;
    return len;
}

struct Ensemble {
    std::vector<Configuration> configs;
    OrbitalBasis basis;
    SystemSpec system;
    double time = 0.0;
    std::uint64_t rng_seed = 0;
    Diagnostics diag;

    int n_configs() const { return static_cast<int>(configs.size()); }
    int n_bosons() const { return system.n_bosons; }
    int m_orbitals() const { return basis.size(); }

    int n_active() const {
        int n = 0;
        for (const Configuration& c : configs) n += c.frozen ? 0 : 1;
        return n;
    }

    std::vector<int> active_ids() const {
        std::vector<int> ids;
        ids.reserve(configs.size());
        for (int w = 0; w < n_configs(); ++w)
            if (!configs[w].frozen) ids.push_back(w);
        return ids;
    }

    void validate() const {
        system.validate();
        if (configs.empty()) throw std::invalid_argument("Ensemble: no configurations");
        if (static_cast<long>(configs.size()) < tensor_length(m_orbitals(), n_bosons()))
            throw std::invalid_argument(
                "Ensemble: need at least M^(N_B-1) configurations for reconstruction");
        for (const Configuration& c : configs) {
            if (c.positions.size() != n_bosons())
                throw std::invalid_argument("Ensemble: configuration position count mismatch");
            if (static_cast<int>(c.cws.size()) != n_bosons())
                throw std::invalid_argument("Ensemble: configuration wavefunction count mismatch");
            for (const ConditionalWavefunction& cw : c.cws)
                if (!(cw.values.grid == basis.grid))
                    throw std::invalid_argument("Ensemble: conditional wave off the basis grid");
        }
    }
};

namespace detail {

/// Uniform [0,1) from the raw 64-bit stream; keeps sampling independent of the
/// library's distribution implementations.
inline double canonical_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// i.i.d. positions from the density rho by inverse CDF, the density treated as
/// constant within each node-centered cell [x_j - dx/2, x_j + dx/2) so the CDF
/// is linear there and symmetric densities sample with zero mean. The two
/// boundary half-cells clamp into the domain. Returns n_bosons x n_configs;
/// draw order is particle-major within each configuration, so a fixed seed
/// fixes every coordinate.
inline Eigen::MatrixXd sample_configurations(const Grid1D& g, const Eigen::VectorXd& rho,
                                             int n_configs, int n_bosons, std::uint64_t seed) {
    if (rho.size() != g.n)
        throw std::invalid_argument("sample_configurations: density size does not match grid");
    if (rho.minCoeff() < -1e-12)
        throw std::invalid_argument("sample_configurations: density must be nonnegative");
    if (n_configs < 1 || n_bosons < 1)
        throw std::invalid_argument("sample_configurations: need positive counts");

    Eigen::VectorXd cum(g.n);
    double run = 0.0;
    for (int j = 0; j < g.n; ++j) {
        run += std::max(rho[j], 0.0);
        cum[j] = run;
    }
    const double total = run;
    if (!(total > 0.0)) throw std::invalid_argument("sample_configurations: density is empty");

    std::mt19937_64 gen(seed);
    const double top = std::nextafter(g.x_max, g.x_min);
    Eigen::MatrixXd pos(n_bosons, n_configs);
    for (int w = 0; w < n_configs; ++w) {
        for (int p = 0; p < n_bosons; ++p) {
            const double target = detail::canonical_uniform(gen) * total;
            const double* it = std::upper_bound(cum.data(), cum.data() + g.n, target);
            int j = static_cast<int>(it - cum.data());
            if (j >= g.n) j = g.n - 1;  // target == total cannot occur; guard anyway
            const double prev = j > 0 ? cum[j - 1] : 0.0;
            const double mass = cum[j] - prev;
            const double frac = mass > 0.0 ? (target - prev) / mass : 0.5;
            pos(p, w) = std::clamp(g.x(j) + (frac - 0.5) * g.dx, g.x_min, top);
        }
    }
    return pos;
}

inline Ensemble make_ensemble(OrbitalBasis basis, SystemSpec system,
                              const Eigen::MatrixXd& positions, std::uint64_t seed) {
    system.validate();
    if (positions.rows() != system.n_bosons)
        throw std::invalid_argument("make_ensemble: position rows must equal particle count");
    if (positions.cols() < tensor_length(basis.size(), system.n_bosons))
        throw std::invalid_argument(
            "make_ensemble: need at least M^(N_B-1) configurations for reconstruction");
    for (Eigen::Index w = 0; w < positions.cols(); ++w)
        for (Eigen::Index p = 0; p < positions.rows(); ++p)
            if (!basis.grid.contains(positions(p, w)))
                throw std::invalid_argument("make_ensemble: position outside the grid domain");

    Ensemble e{{}, std::move(basis), system, 0.0, seed, {}};
    e.configs.resize(positions.cols());
    for (int w = 0; w < e.n_configs(); ++w) {
        e.configs[w].id = w;
        e.configs[w].positions = positions.col(w);
    }
    return e;
}

/// Product-state initial condition: every conditional wave is phi0 on the grid
/// scaled by phi0 at the partners' positions (slices of the product state).
inline void initialize_cws(Ensemble& e, const ComplexField& phi0) {
    if (!(phi0.grid == e.basis.grid))
        throw std::invalid_argument("initialize_cws: phi0 off the ensemble grid");
    if (std::abs(std::sqrt(phi0.squared_norm()) - 1.0) > 1e-6)
        throw std::invalid_argument("initialize_cws: phi0 must be normalized");

    const Interpolant interp(phi0);
    const int nb = e.n_bosons();
    for (Configuration& c : e.configs) {
        Eigen::VectorXcd at_pos(nb);
        for (int p = 0; p < nb; ++p) at_pos[p] = interp.value_at(c.positions[p]);
        c.cws.clear();
        c.cws.reserve(nb);
        for (int i = 0; i < nb; ++i) {
            Complex scale = 1.0;
            for (int j = 0; j < nb; ++j)
                if (j != i) scale *= at_pos[j];
            ConditionalWavefunction cw{ComplexField(phi0.grid, phi0.values * scale), i, c.id};
            c.cws.push_back(std::move(cw));
        }
    }
    e.validate();
}

}  // namespace ipw
