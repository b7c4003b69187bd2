#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipw/ensemble.hpp"
#include "ipw/exactref.hpp"
#include "ipw/observables.hpp"

namespace ipw {

/// Shortest decimal that round-trips a double (17 significant digits).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

inline std::vector<double> split_csv_row(const std::string& line) {
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string::npos) end = line.size();
        const std::string cell = line.substr(start, end - start);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            return {};
        }
        if (used == 0) return {};
        row.push_back(v);
        start = end + 1;
        if (end == line.size()) break;
    }
    return row;
}

}  // namespace detail

/// Time series rows `t,value`.
inline void write_series_csv(const std::string& path, const ObservableSeries& s) {
    s.validate();
    auto out = detail::open_out(path);
    out << "t,value\n";
    for (std::size_t i = 0; i < s.times.size(); ++i)
        out << format_g17(s.times[i]) << ',' << format_g17(s.values[i]) << '\n';
}

/// Reads `t,value` rows, skipping any non-numeric header line.
inline ObservableSeries read_series_csv(const std::string& path, std::string name = "") {
    auto in = detail::open_in(path);
    ObservableSeries s;
    s.name = std::move(name);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<double> row = detail::split_csv_row(line);
        if (row.empty()) continue;  // header or comment
        if (row.size() != 2) throw std::runtime_error(path + ": expected 2 columns");
        s.push(row[0], row[1]);
    }
    if (s.times.empty()) throw std::runtime_error(path + ": no data rows");
    return s;
}

/// Grid field rows `x,re,im`.
inline void write_field_csv(const std::string& path, const ComplexField& f) {
    auto out = detail::open_out(path);
    out << "x,re,im\n";
    for (int j = 0; j < f.grid.n; ++j)
        out << format_g17(f.grid.x(j)) << ',' << format_g17(f.values[j].real()) << ','
            << format_g17(f.values[j].imag()) << '\n';
}

/// One walker of a trajectory bundle as rows `t,X1,X2`.
inline void write_trajectory_csv(const std::string& path, const ExactTrajectories& traj,
                                 int walker = 0) {
    if (traj.positions.empty() || walker < 0 || walker >= traj.positions.front().cols())
        throw std::invalid_argument("write_trajectory_csv: walker out of range");
    auto out = detail::open_out(path);
    out << "t,X1,X2\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        out << format_g17(traj.times[i]) << ',' << format_g17(traj.positions[i](0, walker)) << ','
            << format_g17(traj.positions[i](1, walker)) << '\n';
}

/// Depth-sweep rows `t,X1,X1_exact,depth`.
inline void write_hierarchy_csv(const std::string& path, const std::vector<double>& times,
                                const std::vector<double>& x1,
                                const std::vector<double>& x1_exact, int depth) {
    if (times.size() != x1.size() || times.size() != x1_exact.size())
        throw std::invalid_argument("write_hierarchy_csv: column length mismatch");
    auto out = detail::open_out(path);
    out << "t,X1,X1_exact,depth\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        out << format_g17(times[i]) << ',' << format_g17(x1[i]) << ','
            << format_g17(x1_exact[i]) << ',' << depth << '\n';
}

/// Density-matrix dump: a header row of grid points, then one row per grid
/// point with complex entries `re+imi`.
inline void write_rdm_csv(const std::string& path, const ReducedDensityMatrix& r) {
    r.validate();
    auto out = detail::open_out(path);
    for (int j = 0; j < r.grid.n; ++j) out << (j ? "," : "") << format_g17(r.grid.x(j));
    out << '\n';
    for (int j = 0; j < r.grid.n; ++j) {
        for (int l = 0; l < r.grid.n; ++l) {
            const Complex z = r.rho(j, l);
            out << (l ? "," : "") << format_g17(z.real()) << (z.imag() < 0.0 ? "" : "+")
                << format_g17(z.imag()) << 'i';
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Binary checkpoints: bit-exact snapshots sufficient to resume a run.

namespace detail {

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <class T>
void put_pod(std::ostream& out, const T& v) {
    put_bytes(out, &v, sizeof v);
}
inline void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}
template <class T>
T get_pod(std::istream& in) {
    T v;
    get_bytes(in, &v, sizeof v);
    return v;
}

inline void put_cmat(std::ostream& out, const Eigen::MatrixXcd& m) {
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(m.rows()));
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(m.cols()));
    put_bytes(out, m.data(), sizeof(Complex) * static_cast<std::size_t>(m.size()));
}
inline Eigen::MatrixXcd get_cmat(std::istream& in) {
    const auto rows = get_pod<std::int32_t>(in);
    const auto cols = get_pod<std::int32_t>(in);
    if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols > (1LL << 28))
        throw std::runtime_error("checkpoint: implausible matrix shape");
    Eigen::MatrixXcd m(rows, cols);
    get_bytes(in, m.data(), sizeof(Complex) * static_cast<std::size_t>(m.size()));
    return m;
}

inline void put_cvec(std::ostream& out, const Eigen::VectorXcd& v) {
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(v.size()));
    put_bytes(out, v.data(), sizeof(Complex) * static_cast<std::size_t>(v.size()));
}
inline Eigen::VectorXcd get_cvec(std::istream& in) {
    const auto n = get_pod<std::int32_t>(in);
    if (n < 0 || n > (1 << 26)) throw std::runtime_error("checkpoint: implausible vector size");
    Eigen::VectorXcd v(n);
    get_bytes(in, v.data(), sizeof(Complex) * static_cast<std::size_t>(v.size()));
    return v;
}

inline void put_rvec(std::ostream& out, const Eigen::VectorXd& v) {
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(v.size()));
    put_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}
inline Eigen::VectorXd get_rvec(std::istream& in) {
    const auto n = get_pod<std::int32_t>(in);
    if (n < 0 || n > (1 << 26)) throw std::runtime_error("checkpoint: implausible vector size");
    Eigen::VectorXd v(n);
    get_bytes(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    return v;
}

inline void put_grid(std::ostream& out, const Grid1D& g) {
    put_pod(out, g.x_min);
    put_pod(out, g.x_max);
    put_pod<std::int32_t>(out, g.n);
}
inline Grid1D get_grid(std::istream& in) {
    const double x_min = get_pod<double>(in);
    const double x_max = get_pod<double>(in);
    const auto n = get_pod<std::int32_t>(in);
    return Grid1D::make(x_min, x_max, n);
}

inline void put_system(std::ostream& out, const SystemSpec& s) {
    put_pod<std::int32_t>(out, s.n_bosons);
    put_pod(out, s.trap.k);
    put_pod(out, s.trap.mass);
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(s.pair.kind));
    put_pod(out, s.pair.k);
    put_pod(out, s.pair.sigma);
    put_pod<std::int32_t>(out, static_cast<std::int32_t>(s.schedule.kind));
    put_pod(out, s.schedule.k_max);
    put_pod(out, s.schedule.rate);
}
inline SystemSpec get_system(std::istream& in) {
    SystemSpec s;
    s.n_bosons = get_pod<std::int32_t>(in);
    s.trap.k = get_pod<double>(in);
    s.trap.mass = get_pod<double>(in);
    s.pair.kind = static_cast<PairKind>(get_pod<std::int32_t>(in));
    s.pair.k = get_pod<double>(in);
    s.pair.sigma = get_pod<double>(in);
    s.schedule.kind = static_cast<Schedule::Kind>(get_pod<std::int32_t>(in));
    s.schedule.k_max = get_pod<double>(in);
    s.schedule.rate = get_pod<double>(in);
    return s;
}

inline void put_diag(std::ostream& out, const Diagnostics& d) {
    put_pod(out, d.renormalized_density);
    put_pod(out, d.ill_conditioned_solves);
    put_pod(out, d.velocity_regularizations);
    put_pod(out, d.frozen_configs);
    put_pod(out, d.zero_norm_skips);
}
inline Diagnostics get_diag(std::istream& in) {
    Diagnostics d;
    d.renormalized_density = get_pod<long long>(in);
    d.ill_conditioned_solves = get_pod<long long>(in);
    d.velocity_regularizations = get_pod<long long>(in);
    d.frozen_configs = get_pod<long long>(in);
    d.zero_norm_skips = get_pod<long long>(in);
    return d;
}

constexpr char kCheckpointMagic[8] = {'I', 'P', 'W', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kPayloadEnsemble = 0;
constexpr std::uint32_t kPayloadField2D = 1;

}  // namespace detail

/// Either an ensemble snapshot (IPW runs) or a two-body field snapshot (exact
/// runs), tagged by which member is set.
struct Checkpoint {
    std::uint64_t spec_hash = 0;
    double time = 0.0;
    std::optional<Ensemble> ensemble;
    std::optional<Field2D> field;
};

inline void write_checkpoint(const std::string& path, const Ensemble& e,
                             std::uint64_t spec_hash) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    detail::put_bytes(out, detail::kCheckpointMagic, 8);
    detail::put_pod(out, detail::kCheckpointVersion);
    detail::put_pod(out, detail::kPayloadEnsemble);
    detail::put_pod(out, spec_hash);
    detail::put_pod(out, e.time);
    detail::put_pod(out, e.rng_seed);
    detail::put_system(out, e.system);
    detail::put_grid(out, e.basis.grid);
    detail::put_cmat(out, e.basis.values);
    detail::put_rvec(out, e.basis.energies);
    detail::put_diag(out, e.diag);
    detail::put_pod<std::int32_t>(out, e.n_configs());
    for (const Configuration& c : e.configs) {
        detail::put_pod<std::int32_t>(out, c.id);
        detail::put_pod<std::uint8_t>(out, c.frozen ? 1 : 0);
        detail::put_rvec(out, c.positions);
        for (const ConditionalWavefunction& cw : c.cws) detail::put_cvec(out, cw.values.values);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline void write_checkpoint(const std::string& path, const Field2D& f, double time,
                             std::uint64_t spec_hash) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    detail::put_bytes(out, detail::kCheckpointMagic, 8);
    detail::put_pod(out, detail::kCheckpointVersion);
    detail::put_pod(out, detail::kPayloadField2D);
    detail::put_pod(out, spec_hash);
    detail::put_pod(out, time);
    detail::put_grid(out, f.gx);
    detail::put_grid(out, f.gy);
    detail::put_cmat(out, f.values);
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    char magic[8];
    detail::get_bytes(in, magic, 8);
    if (std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path);
    if (detail::get_pod<std::uint32_t>(in) != detail::kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version: " + path);
    const auto payload = detail::get_pod<std::uint32_t>(in);

    Checkpoint ck;
    ck.spec_hash = detail::get_pod<std::uint64_t>(in);
    ck.time = detail::get_pod<double>(in);

    if (payload == detail::kPayloadField2D) {
        const Grid1D gx = detail::get_grid(in);
        const Grid1D gy = detail::get_grid(in);
        ck.field.emplace(gx, gy, detail::get_cmat(in));
        return ck;
    }
    if (payload != detail::kPayloadEnsemble)
        throw std::runtime_error("checkpoint: unknown payload tag: " + path);

    const auto seed = detail::get_pod<std::uint64_t>(in);
    const SystemSpec system = detail::get_system(in);
    const Grid1D grid = detail::get_grid(in);
    Eigen::MatrixXcd values = detail::get_cmat(in);
    Eigen::VectorXd energies = detail::get_rvec(in);
    OrbitalBasis basis(grid, std::move(values), std::move(energies));
    const Diagnostics diag = detail::get_diag(in);

    Ensemble e{{}, std::move(basis), system, ck.time, seed, diag};
    const auto n_configs = detail::get_pod<std::int32_t>(in);
    if (n_configs < 1 || n_configs > (1 << 24))
        throw std::runtime_error("checkpoint: implausible configuration count");
    e.configs.resize(static_cast<std::size_t>(n_configs));
    for (Configuration& c : e.configs) {
        c.id = detail::get_pod<std::int32_t>(in);
        c.frozen = detail::get_pod<std::uint8_t>(in) != 0;
        c.positions = detail::get_rvec(in);
        c.cws.reserve(static_cast<std::size_t>(system.n_bosons));
        for (int p = 0; p < system.n_bosons; ++p)
            c.cws.push_back({ComplexField(e.basis.grid, detail::get_cvec(in)), p, c.id});
    }
    e.validate();
    ck.ensemble.emplace(std::move(e));
    return ck;
}

}  // namespace ipw
