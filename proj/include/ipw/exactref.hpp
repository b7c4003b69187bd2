#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ipw/diagnostics.hpp"
#include "ipw/fft.hpp"
#include "ipw/grid.hpp"
#include "ipw/model.hpp"
#include "ipw/spectral.hpp"

namespace ipw {

/// Two-particle wavefunction sampled on a tensor grid; rows follow the first
/// particle's axis.
struct Field2D {
    Grid1D gx;
    Grid1D gy;
    Eigen::MatrixXcd values;

    Field2D(const Grid1D& gx_, const Grid1D& gy_)
        : gx(gx_), gy(gy_), values(Eigen::MatrixXcd::Zero(gx_.n, gy_.n)) {}
    Field2D(const Grid1D& gx_, const Grid1D& gy_, Eigen::MatrixXcd v)
        : gx(gx_), gy(gy_), values(std::move(v)) {
        if (values.rows() != gx.n || values.cols() != gy.n)
            throw std::invalid_argument("Field2D: sample shape does not match the grids");
    }

    double squared_norm() const { return values.squaredNorm() * gx.dx * gy.dx; }
    double norm() const { return std::sqrt(squared_norm()); }
    bool finite() const { return values.allFinite(); }

    void normalize() {
        const double n = norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw std::domain_error("Field2D: cannot normalize this state");
        values /= n;
    }
};

/// Outer product phi(x) chi(y).
inline Field2D product_state(const ComplexField& a, const ComplexField& b) {
    return Field2D(a.grid, b.grid, a.values * b.values.transpose());
}

/// Two distinguishable trapped particles with a scheduled pair interaction.
/// Identical bosons are the special case trap1 == trap2.
struct TwoBodySpec {
    TrapSpec trap1;
    TrapSpec trap2;
    PairInteractionSpec pair;
    Schedule schedule;

    void validate() const {
        if (!(trap1.mass > 0.0) || !(trap2.mass > 0.0))
            throw std::invalid_argument("TwoBodySpec: masses must be positive");
        if (trap1.k < 0.0 || trap2.k < 0.0)
            throw std::invalid_argument("TwoBodySpec: trap strengths must be >= 0");
        if (schedule.kind == Schedule::Kind::Adiabatic) {
            if (pair.kind == PairKind::None)
                throw std::invalid_argument("TwoBodySpec: adiabatic schedule needs an interaction");
            if (std::abs(schedule.k_max - pair.k) > 1e-12 * std::max(1.0, std::abs(pair.k)))
                throw std::invalid_argument(
                    "TwoBodySpec: adiabatic k_max must equal the pair strength");
        }
    }
};

inline TwoBodySpec two_body(const SystemSpec& s) {
    s.validate();
    if (s.n_bosons != 2)
        throw std::invalid_argument("two_body: exact 2D reference needs exactly two bosons");
    return {s.trap, s.trap, s.pair, s.schedule};
}

/// Potential samples V(x_j, y_l) at the given pair strength.
inline Eigen::MatrixXd potential_2body(const TwoBodySpec& spec, const Grid1D& gx,
                                       const Grid1D& gy, double strength) {
    Eigen::MatrixXd V(gx.n, gy.n);
    const auto pair = spec.pair.at_strength(strength);
    for (int j = 0; j < gx.n; ++j) {
        const double x = gx.x(j);
        const double tx = trap_value(spec.trap1, x);
        for (int l = 0; l < gy.n; ++l)
            V(j, l) = tx + trap_value(spec.trap2, gy.x(l)) + pair_potential(pair, x, gy.x(l));
    }
    return V;
}

/// Strang splitting for the two-particle Schroedinger equation. Kinetic phases
/// are fixed at construction; the potential half-phase is rebuilt whenever the
/// pair strength changes, so sudden evolutions pay for it once. An imaginary
/// dt (0, -dtau) turns the same stepper into imaginary-time relaxation.
class TwoBodyStepper {
public:
    TwoBodyStepper(const TwoBodySpec& spec, const Grid1D& gx, const Grid1D& gy, Complex dt)
        : spec_(spec), gx_(gx), gy_(gy), dt_(dt) {
        spec_.validate();
        if (dt == Complex(0.0, 0.0)) throw std::invalid_argument("TwoBodyStepper: dt must be nonzero");
        kin_x_ = detail::kinetic_phase(gx, dt, spec.trap1.mass);
        kin_y_ = detail::kinetic_phase(gy, dt, spec.trap2.mass);
        base_.resize(gx.n, gy.n);
        pair_unit_.resize(gx.n, gy.n);
        const auto unit = spec.pair.at_strength(1.0);
        for (int j = 0; j < gx.n; ++j) {
            const double x = gx.x(j);
            const double tx = trap_value(spec.trap1, x);
            for (int l = 0; l < gy.n; ++l) {
                base_(j, l) = tx + trap_value(spec.trap2, gy.x(l));
                pair_unit_(j, l) = pair_potential(unit, x, gy.x(l));
            }
        }
    }

    void step(Field2D& f, double strength) {
        if (!(f.gx == gx_) || !(f.gy == gy_))
            throw std::invalid_argument("TwoBodyStepper: field lives on different grids");
        ensure_half_phase(strength);
        f.values.array() *= vhalf_.array();
        fft2_forward_inplace(f.values);
        f.values = kin_x_.asDiagonal() * f.values;
        f.values = f.values * kin_y_.asDiagonal();
        fft2_inverse_inplace(f.values);
        f.values.array() *= vhalf_.array();
    }

    Eigen::MatrixXd potential(double strength) const { return base_ + strength * pair_unit_; }

private:
    void ensure_half_phase(double strength) {
        if (have_phase_ && strength == strength_) return;
        const Complex c = Complex(0.0, -0.5) * dt_;
        vhalf_ = ((base_ + strength * pair_unit_).cast<Complex>() * c).array().exp();
        strength_ = strength;
        have_phase_ = true;
    }

    TwoBodySpec spec_;
    Grid1D gx_, gy_;
    Complex dt_;
    Eigen::VectorXcd kin_x_, kin_y_;
    Eigen::MatrixXd base_, pair_unit_;
    Eigen::MatrixXcd vhalf_;
    double strength_ = 0.0;
    bool have_phase_ = false;
};

/// Advance `steps` real-time Strang steps; the interaction strength for each
/// step is sampled mid-step from the schedule. Updates t in place.
inline void evolve_2body(Field2D& f, const TwoBodySpec& spec, double& t, double dt, int steps) {
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_2body: dt must be positive");
    if (steps < 0) throw std::invalid_argument("evolve_2body: negative step count");
    TwoBodyStepper stepper(spec, f.gx, f.gy, dt);
    for (int s = 0; s < steps; ++s) {
        stepper.step(f, schedule_strength(spec.schedule, spec.pair, t + 0.5 * dt));
        t += dt;
    }
}

/// Rayleigh quotient <H> for a (possibly unnormalized) two-particle state.
inline double two_body_energy(const Field2D& f, const Eigen::MatrixXd& V, double m1, double m2) {
    if (V.rows() != f.gx.n || V.cols() != f.gy.n)
        throw std::invalid_argument("two_body_energy: potential shape mismatch");
    const double nrm2 = f.squared_norm();
    if (!(nrm2 > 0.0)) throw std::domain_error("two_body_energy: empty state");

    Eigen::MatrixXcd spec = f.values;
    fft2_forward_inplace(spec);
    double kin = 0.0;
    for (int j = 0; j < f.gx.n; ++j) {
        const double kx2 = f.gx.k(j) * f.gx.k(j) / (2.0 * m1);
        for (int l = 0; l < f.gy.n; ++l) {
            const double ky2 = f.gy.k(l) * f.gy.k(l) / (2.0 * m2);
            kin += (kx2 + ky2) * std::norm(spec(j, l));
        }
    }
    kin *= f.gx.dx * f.gy.dx / (double(f.gx.n) * double(f.gy.n));
    const double pot = f.gx.dx * f.gy.dx * (V.array() * f.values.cwiseAbs2().array()).sum();
    return (kin + pot) / nrm2;
}

struct GroundState2D {
    Field2D state;
    double energy = 0.0;
    int iterations = 0;
};

/// Imaginary-time relaxation to the two-particle ground state at a fixed pair
/// strength. A ladder of shrinking imaginary steps removes the splitting bias;
/// each rung runs until the per-step state change stalls. The returned energy
/// is the Rayleigh quotient of the true Hamiltonian, whose error is quadratic
/// in the residual state error.
inline GroundState2D ground_state_2body(const TwoBodySpec& spec, const Grid1D& gx,
                                        const Grid1D& gy, double strength,
                                        double state_tol = 1e-9) {
    spec.validate();
    if (!(spec.trap1.k > 0.0) || !(spec.trap2.k > 0.0))
        throw std::invalid_argument("ground_state_2body: both particles need confining traps");

    const double var_x = 0.5 / std::sqrt(spec.trap1.mass * spec.trap1.k);
    const double var_y = 0.5 / std::sqrt(spec.trap2.mass * spec.trap2.k);
    Field2D f(gx, gy);
    for (int j = 0; j < gx.n; ++j) {
        const double x = gx.x(j);
        for (int l = 0; l < gy.n; ++l) {
            const double y = gy.x(l);
            f.values(j, l) = std::exp(-x * x / (4.0 * var_x) - y * y / (4.0 * var_y));
        }
    }
    f.normalize();

    GroundState2D out{f, 0.0, 0};
    Eigen::MatrixXcd prev;
    for (const double dtau : {0.05, 0.012, 0.004}) {
        TwoBodyStepper stepper(spec, gx, gy, Complex(0.0, -dtau));
        bool settled = false;
        for (int iter = 0; iter < 50000; ++iter) {
            prev = out.state.values;
            stepper.step(out.state, strength);
            out.state.normalize();
            ++out.iterations;
            const double delta =
                std::sqrt((out.state.values - prev).squaredNorm() * gx.dx * gy.dx);
            if (delta < state_tol) {
                settled = true;
                break;
            }
        }
        if (!settled)
            throw std::runtime_error("ground_state_2body: relaxation failed to settle");
    }
    out.energy = two_body_energy(out.state, potential_2body(spec, gx, gy, strength),
                                 spec.trap1.mass, spec.trap2.mass);
    return out;
}

namespace detail {

/// Sampling phase vector p_q = (i k_q)^order exp(i k_q (x - x_min)) with the
/// real-signal Nyquist convention (cosine for even orders, i sine for odd), so
/// spectrum.dot-style sums reproduce trigonometric interpolation and its
/// derivatives.
inline Eigen::VectorXcd sampling_phase(const Grid1D& g, double x, int order) {
    if (!g.contains(x)) throw std::domain_error("sampling_phase: point off the grid");
    if (order < 0) throw std::invalid_argument("sampling_phase: negative derivative order");
    Eigen::VectorXcd p(g.n);
    const double theta = x - g.x_min;
    for (int q = 0; q < g.n; ++q) {
        const double kq = g.k(q);
        Complex ph;
        if (q == g.n / 2)
            ph = (order % 2 == 0) ? Complex(std::cos(kq * theta), 0.0)
                                  : Complex(0.0, std::sin(kq * theta));
        else
            ph = std::polar(1.0, kq * theta);
        Complex factor = 1.0;
        for (int m = 0; m < order; ++m) factor *= Complex(0.0, kq);
        p[q] = factor * ph;
    }
    return p;
}

}  // namespace detail

/// Conditional slice of a two-particle state: with axis 0 the result is
/// x -> d^order/dY^order Psi(x, Y) on the first grid, with axis 1 it is
/// y -> d^order/dX^order Psi(X, y) on the second. The fixed coordinate may sit
/// anywhere inside its domain; trigonometric interpolation fills between
/// samples.
inline ComplexField conditional_slice(const Field2D& f, int axis, double partner_pos,
                                      int order = 0) {
    if (axis == 0) {
        const Eigen::VectorXcd p = detail::sampling_phase(f.gy, partner_pos, order);
        ComplexField out(f.gx, fft_rows(f.values) * p / double(f.gy.n));
        return out;
    }
    if (axis == 1) {
        const Eigen::VectorXcd p = detail::sampling_phase(f.gx, partner_pos, order);
        ComplexField out(f.gy, fft_cols(f.values).transpose() * p / double(f.gx.n));
        return out;
    }
    throw std::invalid_argument("conditional_slice: axis must be 0 or 1");
}

/// Position density of one particle, integrated over the other. Unnormalized
/// states give a density with the same total weight.
inline Eigen::VectorXd marginal_density(const Field2D& f, int axis) {
    if (axis == 0) return f.values.cwiseAbs2().rowwise().sum() * f.gy.dx;
    if (axis == 1) return f.values.cwiseAbs2().colwise().sum().transpose() * f.gx.dx;
    throw std::invalid_argument("marginal_density: axis must be 0 or 1");
}

/// Normalized second moment <x_axis^2>.
inline double moment_x2(const Field2D& f, int axis) {
    const Eigen::VectorXd rho = marginal_density(f, axis);
    const Grid1D& g = axis == 0 ? f.gx : f.gy;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < g.n; ++j) {
        num += rho[j] * g.x(j) * g.x(j);
        den += rho[j];
    }
    if (!(den > 0.0)) throw std::domain_error("moment_x2: empty state");
    return num / den;
}

/// Guidance-field evaluator for one two-particle snapshot. The 2D spectrum is
/// truncated to its significant rows and columns once, after which each phase
/// point costs two short matrix-vector products; batched evaluation shares one
/// matrix-matrix product across all points. Velocities are Im(grad psi / psi)
/// over the mass; points where |psi| falls below rel_cut times the field
/// maximum get zero velocity and are counted as regularized.
class TwoBodyFlow {
public:
    struct Sample {
        Complex psi;
        double v1 = 0.0;
        double v2 = 0.0;
        bool regularized = false;
    };

    TwoBodyFlow(const Field2D& f, double m1, double m2, double rel_cut = 1e-6,
                double spectrum_cut = 1e-14)
        : gx_(f.gx), gy_(f.gy), m1_(m1), m2_(m2) {
        if (!(m1 > 0.0) || !(m2 > 0.0))
            throw std::invalid_argument("TwoBodyFlow: masses must be positive");
        max_abs_ = f.values.cwiseAbs().maxCoeff();
        abs_cut_ = rel_cut * max_abs_;

        Eigen::MatrixXcd spec = f.values;
        fft2_forward_inplace(spec);
        spec /= double(gx_.n) * double(gy_.n);

        const Eigen::MatrixXd mag = spec.cwiseAbs();
        const double cut = spectrum_cut * std::max(mag.maxCoeff(), 0.0);
        for (int q = 0; q < gx_.n; ++q)
            if (mag.row(q).maxCoeff() > cut || q == 0) qx_.push_back(q);
        for (int q = 0; q < gy_.n; ++q)
            if (mag.col(q).maxCoeff() > cut || q == 0) qy_.push_back(q);

        kx_.resize(qx_.size());
        ky_.resize(qy_.size());
        for (std::size_t i = 0; i < qx_.size(); ++i) kx_[static_cast<Eigen::Index>(i)] = gx_.k(qx_[i]);
        for (std::size_t i = 0; i < qy_.size(); ++i) ky_[static_cast<Eigen::Index>(i)] = gy_.k(qy_[i]);

        F_.resize(qx_.size(), qy_.size());
        for (std::size_t a = 0; a < qx_.size(); ++a)
            for (std::size_t b = 0; b < qy_.size(); ++b)
                F_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    spec(qx_[a], qy_[b]);
    }

    double max_abs() const { return max_abs_; }

    Sample at(double x1, double x2, Diagnostics* diag = nullptr) const {
        Eigen::VectorXcd px, pdx, py, pdy;
        phases(gx_, qx_, kx_, x1, px, pdx);
        phases(gy_, qy_, ky_, x2, py, pdy);
        const Eigen::VectorXcd t = F_ * py;
        const Eigen::VectorXcd t2 = F_ * pdy;
        Sample s;
        s.psi = (px.array() * t.array()).sum();
        const Complex dx = (pdx.array() * t.array()).sum();
        const Complex dy = (px.array() * t2.array()).sum();
        finish(s, dx, dy, diag);
        return s;
    }

    /// Velocities for many phase points (columns x1;x2) against one snapshot.
    Eigen::Matrix2Xd velocities(const Eigen::Matrix2Xd& pts, Diagnostics* diag = nullptr) const {
        const Eigen::Index n = pts.cols();
        Eigen::MatrixXcd Py(qy_.size(), n), Pyd(qy_.size(), n);
        Eigen::VectorXcd py, pdy;
        for (Eigen::Index w = 0; w < n; ++w) {
            phases(gy_, qy_, ky_, pts(1, w), py, pdy);
            Py.col(w) = py;
            Pyd.col(w) = pdy;
        }
        const Eigen::MatrixXcd T = F_ * Py;
        const Eigen::MatrixXcd T2 = F_ * Pyd;

        Eigen::Matrix2Xd v(2, n);
        Eigen::VectorXcd px, pdx;
        for (Eigen::Index w = 0; w < n; ++w) {
            phases(gx_, qx_, kx_, pts(0, w), px, pdx);
            Sample s;
            s.psi = (px.array() * T.col(w).array()).sum();
            const Complex dx = (pdx.array() * T.col(w).array()).sum();
            const Complex dy = (px.array() * T2.col(w).array()).sum();
            finish(s, dx, dy, diag);
            v(0, w) = s.v1;
            v(1, w) = s.v2;
        }
        return v;
    }

private:
    void finish(Sample& s, Complex dx, Complex dy, Diagnostics* diag) const {
        if (std::abs(s.psi) <= abs_cut_) {
            s.regularized = true;
            if (diag) ++diag->velocity_regularizations;
            return;
        }
        s.v1 = std::imag(dx / s.psi) / m1_;
        s.v2 = std::imag(dy / s.psi) / m2_;
    }

    static void phases(const Grid1D& g, const std::vector<int>& qs, const Eigen::VectorXd& ks,
                       double x, Eigen::VectorXcd& val, Eigen::VectorXcd& der) {
        if (!g.contains(x)) throw std::domain_error("TwoBodyFlow: point off the grid");
        const double theta = x - g.x_min;
        const Eigen::Index r = static_cast<Eigen::Index>(qs.size());
        val.resize(r);
        der.resize(r);
        for (Eigen::Index i = 0; i < r; ++i) {
            const double k = ks[i];
            if (qs[static_cast<std::size_t>(i)] == g.n / 2) {
                val[i] = std::cos(k * theta);
                der[i] = -k * std::sin(k * theta);
            } else {
                const Complex ph = std::polar(1.0, k * theta);
                val[i] = ph;
                der[i] = Complex(0.0, k) * ph;
            }
        }
    }

    Grid1D gx_, gy_;
    double m1_, m2_, max_abs_ = 0.0, abs_cut_ = 0.0;
    std::vector<int> qx_, qy_;
    Eigen::VectorXd kx_, ky_;
    Eigen::MatrixXcd F_;
};

struct ExactTrajectories {
    std::vector<double> times;
    std::vector<Eigen::Matrix2Xd> positions;
    Field2D state;
    Diagnostics diag;
};

/// Co-evolve the two-particle state and an ensemble of phase points along its
/// guidance field. Each step uses the midpoint rule: a half step with the
/// start-of-step velocity, then a full step with the velocity of the averaged
/// old/new field at the midpoint. Points that would leave the domain freeze in
/// place and are counted once.
inline ExactTrajectories exact_bohmian_trajectories(const TwoBodySpec& spec, Field2D psi,
                                                    Eigen::Matrix2Xd walkers, double t0,
                                                    double dt, int steps,
                                                    int record_stride = 1) {
    spec.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("exact_bohmian_trajectories: dt must be positive");
    if (steps < 0 || record_stride < 1)
        throw std::invalid_argument("exact_bohmian_trajectories: bad step counts");
    const Eigen::Index n_w = walkers.cols();
    for (Eigen::Index w = 0; w < n_w; ++w)
        if (!psi.gx.contains(walkers(0, w)) || !psi.gy.contains(walkers(1, w)))
            throw std::invalid_argument("exact_bohmian_trajectories: walker starts off the grid");

    ExactTrajectories out{{}, {}, psi, {}};
    out.times.push_back(t0);
    out.positions.push_back(walkers);

    TwoBodyStepper stepper(spec, psi.gx, psi.gy, dt);
    const double m1 = spec.trap1.mass, m2 = spec.trap2.mass;
    std::vector<char> frozen(static_cast<std::size_t>(n_w), 0);
    Eigen::MatrixXcd old_values;

    for (int s = 0; s < steps; ++s) {
        const double t = t0 + s * dt;
        const TwoBodyFlow flow_start(psi, m1, m2);
        old_values = psi.values;
        stepper.step(psi, schedule_strength(spec.schedule, spec.pair, t + 0.5 * dt));
        Field2D mid(psi.gx, psi.gy, 0.5 * (old_values + psi.values));
        const TwoBodyFlow flow_mid(mid, m1, m2);

        std::vector<Eigen::Index> active;
        for (Eigen::Index w = 0; w < n_w; ++w)
            if (!frozen[static_cast<std::size_t>(w)]) active.push_back(w);
        if (!active.empty()) {
            Eigen::Matrix2Xd pts(2, static_cast<Eigen::Index>(active.size()));
            for (std::size_t i = 0; i < active.size(); ++i)
                pts.col(static_cast<Eigen::Index>(i)) = walkers.col(active[i]);
            const Eigen::Matrix2Xd v1 = flow_start.velocities(pts, &out.diag);

            std::vector<Eigen::Index> still;
            Eigen::Matrix2Xd mids(2, pts.cols());
            Eigen::Index kept = 0;
            for (std::size_t i = 0; i < active.size(); ++i) {
                const Eigen::Vector2d m =
                    pts.col(static_cast<Eigen::Index>(i)) + 0.5 * dt * v1.col(static_cast<Eigen::Index>(i));
                if (!psi.gx.contains(m[0]) || !psi.gy.contains(m[1])) {
                    frozen[static_cast<std::size_t>(active[i])] = 1;
                    ++out.diag.frozen_configs;
                    continue;
                }
                mids.col(kept++) = m;
                still.push_back(active[i]);
            }
            if (kept > 0) {
                const Eigen::Matrix2Xd vm =
                    flow_mid.velocities(mids.leftCols(kept), &out.diag);
                for (Eigen::Index i = 0; i < kept; ++i) {
                    const Eigen::Vector2d next = walkers.col(still[static_cast<std::size_t>(i)]) +
                                                 dt * vm.col(i);
                    if (!psi.gx.contains(next[0]) || !psi.gy.contains(next[1])) {
                        frozen[static_cast<std::size_t>(still[static_cast<std::size_t>(i)])] = 1;
                        ++out.diag.frozen_configs;
                        continue;
                    }
                    walkers.col(still[static_cast<std::size_t>(i)]) = next;
                }
            }
        }

        if ((s + 1) % record_stride == 0) {
            out.times.push_back(t0 + (s + 1) * dt);
            out.positions.push_back(walkers);
        }
    }
    out.state = std::move(psi);
    return out;
}

namespace analytic {

/// Per-particle <x^2>(t) for identical unit-mass bosons in a unit trap,
/// prepared in the noninteracting ground state and hit at t=0 with a sudden
/// pairwise harmonic coupling of strength k_pair. Normal modes: the center of
/// mass keeps frequency 1, the n-1 relative modes oscillate at
/// sqrt(1 + n k_pair), each starting from variance 1/2.
inline double quench_position_variance(double t, int n_bosons, double k_pair) {
    if (n_bosons < 1) throw std::invalid_argument("quench_position_variance: need n >= 1");
    const double w2 = 1.0 + n_bosons * k_pair;
    const double c = std::cos(std::sqrt(w2) * t);
    const double s = std::sin(std::sqrt(w2) * t);
    const double rel = 0.5 * (c * c + s * s / w2);
    return (0.5 + (n_bosons - 1) * rel) / n_bosons;
}

/// Ground-state energy of the same model at fixed coupling: one center-of-mass
/// quantum plus n-1 relative modes.
inline double coupled_ground_energy(int n_bosons, double k_pair) {
    if (n_bosons < 1) throw std::invalid_argument("coupled_ground_energy: need n >= 1");
    return 0.5 + (n_bosons - 1) * 0.5 * std::sqrt(1.0 + n_bosons * k_pair);
}

}  // namespace analytic

}  // namespace ipw
