#pragma once

namespace ipw {

/// Counters for recoverable numerical events. Propagation continues when these
/// fire; callers inspect or log them after the fact.
struct Diagnostics {
    long long renormalized_density = 0;
    long long ill_conditioned_solves = 0;
    long long velocity_regularizations = 0;
    long long frozen_configs = 0;
    long long zero_norm_skips = 0;

    void merge(const Diagnostics& other) {
        renormalized_density += other.renormalized_density;
        ill_conditioned_solves += other.ill_conditioned_solves;
        velocity_regularizations += other.velocity_regularizations;
        frozen_configs += other.frozen_configs;
        zero_norm_skips += other.zero_norm_skips;
    }
    long long total() const {
        return renormalized_density + ill_conditioned_solves + velocity_regularizations +
               frozen_configs + zero_norm_skips;
    }
};

}  // namespace ipw
