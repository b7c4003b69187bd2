#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ipw/ensemble.hpp"
#include "ipw/exactref.hpp"
#include "ipw/hierarchy.hpp"
#include "ipw/io.hpp"
#include "ipw/observables.hpp"
#include "ipw/orbitals.hpp"
#include "ipw/runconfig.hpp"
#include "ipw/stepper.hpp"

namespace ipw {

inline constexpr const char* kCodeVersion = "1.0.0";

struct RunReport {
    RunConfig config;
    std::vector<std::string> outputs;  // file names inside config.output_dir
    std::string checkpoint;            // last checkpoint file name; empty if none
    double final_time = 0.0;
    double wall_seconds = 0.0;
    bool diverged = false;
    std::string error;  // what stopped the run early, if anything
    Diagnostics diag;
};

/// State handed back to run() by checkpoint resumption.
struct ResumeHandle {
    double time = 0.0;
    std::optional<Ensemble> ensemble;
    std::optional<Field2D> field;
};

namespace detail {

inline std::string file_name(const RunConfig& c, const std::string& name) {
    return c.label + "_" + name;
}
inline std::string file_path(const RunConfig& c, const std::string& name) {
    return c.output_dir + "/" + file_name(c, name);
}

inline long long total_steps(const RunConfig& c) { return std::llround(c.t_max / c.dt); }

/// Step indices that get a recorded row: 0, every stride-th step, and the
/// final step.
inline std::vector<long long> record_steps(long long n_steps, int stride) {
    std::vector<long long> pts{0};
    for (long long s = stride; s < n_steps; s += stride) pts.push_back(s);
    pts.push_back(n_steps);
    return pts;
}

inline int zero_index(const Grid1D& g) {
    int j0 = 0;
    for (int j = 1; j < g.n; ++j)
        if (std::abs(g.x(j)) < std::abs(g.x(j0))) j0 = j;
    return j0;
}

inline bool ensemble_finite(const Ensemble& e) {
    for (const Configuration& c : e.configs) {
        if (c.frozen) continue;
        if (!c.positions.allFinite()) return false;
        for (const ConditionalWavefunction& cw : c.cws)
            if (!cw.values.values.allFinite()) return false;
    }
    return true;
}

/// Record rows already on disk, kept up to the resume time; recorded times
/// round-trip through the CSV bit-exactly, so continuing appends to an
/// identical prefix.
inline ObservableSeries reload_series(const RunConfig& c, const std::string& name,
                                      double resume_time) {
    const ObservableSeries full = read_series_csv(file_path(c, name + ".csv"), name);
    ObservableSeries kept;
    kept.name = name;
    for (std::size_t i = 0; i < full.times.size(); ++i) {
        if (full.times[i] > resume_time + 0.5 * c.dt) break;
        kept.push(full.times[i], full.values[i]);
    }
    return kept;
}

/// The trap ground state on the given grid, used as the pre-quench (or
/// pre-ramp) single-particle state of every run.
inline ComplexField trap_ground_state(const TrapSpec& trap, const Grid1D& g) {
    return build_orbitals(g, trap_potential(trap, g), 1, trap.mass).orbital(0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solver drivers

namespace detail {

inline nlohmann::json diagnostics_json(const Diagnostics& d) {
    return {{"renormalized_density", d.renormalized_density},
            {"ill_conditioned_solves", d.ill_conditioned_solves},
            {"velocity_regularizations", d.velocity_regularizations},
            {"frozen_configs", d.frozen_configs},
            {"zero_norm_skips", d.zero_norm_skips}};
}

inline void write_manifest(const RunConfig& c, const RunReport& r) {
    nlohmann::json m;
    m["version"] = kCodeVersion;
    m["seed"] = c.seed;
    m["config"] = to_json(c);
    m["outputs"] = r.outputs;
    m["checkpoint"] = r.checkpoint;
    m["final_time"] = r.final_time;
    m["wall_seconds"] = r.wall_seconds;
    m["diverged"] = r.diverged;
    if (!r.error.empty()) m["error"] = r.error;
    m["diagnostics"] = diagnostics_json(r.diag);
    auto out = open_out(file_path(c, "manifest.json"));
    out << m.dump(2) << '\n';
}

struct WallTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

inline RunReport run_exact(const RunConfig& c, const ResumeHandle* resume) {
    RunReport r;
    r.config = c;
    const WallTimer timer;
    const std::uint64_t hash = config_hash(c);
    const TwoBodySpec spec2 = two_body(c.system);
    const Grid1D gx = c.exact_grid.make("exact_grid");
    const Grid1D gy = gx;

    Field2D f = resume ? *resume->field
                       : product_state(trap_ground_state(c.system.trap, gx),
                                       trap_ground_state(c.system.trap, gx));
    double t = resume ? resume->time : 0.0;

    const long long n_steps = total_steps(c);
    const std::vector<long long> points = record_steps(n_steps, c.record_stride);
    const long long s0 = resume ? std::llround(resume->time / c.dt) : 0;
    const auto start_it = std::find(points.begin(), points.end(), s0);
    if (start_it == points.end())
        throw ConfigError("", "checkpoint time does not sit on the record grid");

    std::vector<ObservableSeries> series;
    for (const std::string& name : c.observables) {
        if (name == "rdm") continue;
        series.push_back(resume ? reload_series(c, name, resume->time)
                                : ObservableSeries{name, {}, {}});
        r.outputs.push_back(file_name(c, name + ".csv"));
    }
    const int j0 = zero_index(gx);

    const auto write_series = [&] {
        for (const ObservableSeries& s : series)
            write_series_csv(file_path(c, s.name + ".csv"), s);
    };
    const auto save = [&](const Field2D& st, double ts) {
        write_checkpoint(file_path(c, "checkpoint.bin"), st, ts, hash);
        r.checkpoint = file_name(c, "checkpoint.bin");
    };
    // An intermediate flush leaves a consistent resume point on disk: the
    // checkpoint, every row recorded up to it, and a manifest pointing at both.
    const auto flush = [&](const Field2D& st, double ts) {
        save(st, ts);
        write_series();
        r.final_time = ts;
        r.wall_seconds = timer.seconds();
        write_manifest(c, r);
    };

    Field2D last_good = f;
    double last_good_t = t;
    for (auto it = start_it; it != points.end(); ++it) {
        if (it != start_it)
            evolve_2body(f, spec2, t, c.dt, static_cast<int>(*it - *(it - 1)));
        if (!f.finite()) {
            r.diverged = true;
            r.error = "non-finite state detected at t = " + format_g17(t);
            break;
        }
        if (!(resume && it == start_it)) {
            std::vector<double> row;
            row.reserve(series.size());
            for (const ObservableSeries& s : series) {
                if (s.name == "rho0") row.push_back(marginal_density(f, 0)[j0]);
                else if (s.name == "xsq")
                    row.push_back(0.5 * (moment_x2(f, 0) + moment_x2(f, 1)));
                else if (s.name == "energy") {
                    const double k_eff = schedule_strength(spec2.schedule, spec2.pair, t);
                    row.push_back(two_body_energy(f, potential_2body(spec2, gx, gy, k_eff),
                                                  spec2.trap1.mass, spec2.trap2.mass));
                }
            }
            for (std::size_t i = 0; i < series.size(); ++i) series[i].push(t, row[i]);
        }
        last_good = f;
        last_good_t = t;
        const std::size_t pi = static_cast<std::size_t>(it - points.begin());
        if (it + 1 == points.end())
            save(f, t);
        else if (c.checkpoint_stride > 0 && pi > 0 && pi % c.checkpoint_stride == 0)
            flush(f, t);
    }

    if (r.diverged) save(last_good, last_good_t);
    r.final_time = r.diverged ? last_good_t : t;
    write_series();
    if (!r.diverged &&
        std::find(c.observables.begin(), c.observables.end(), "rdm") != c.observables.end()) {
        write_rdm_csv(file_path(c, "rdm.csv"), reduced_density_matrix(f, 0));
        r.outputs.push_back(file_name(c, "rdm.csv"));
    }
    r.wall_seconds = timer.seconds();
    return r;
}

inline RunReport run_ipw(const RunConfig& c, const ResumeHandle* resume) {
    RunReport r;
    r.config = c;
    const WallTimer timer;
    const std::uint64_t hash = config_hash(c);
    const IpwMode mode =
        c.solver == SolverKind::IpwFull ? IpwMode::Full : IpwMode::HermitianLimit;

    Ensemble e = [&] {
        if (resume) return *resume->ensemble;
        const Grid1D g = c.grid.make("grid");
        OrbitalBasis basis =
            build_orbitals(g, trap_potential(c.system.trap, g), c.ipw.m_orbitals,
                           c.system.trap.mass);
        const ComplexField phi0 = basis.orbital(0);
        const Eigen::MatrixXd pos = sample_configurations(
            g, phi0.values.cwiseAbs2(), c.ipw.n_configs, c.system.n_bosons, c.seed);
        Ensemble fresh = make_ensemble(std::move(basis), c.system, pos, c.seed);
        initialize_cws(fresh, phi0);
        return fresh;
    }();

    const long long n_steps = total_steps(c);
    const std::vector<long long> points = record_steps(n_steps, c.record_stride);
    const long long s0 = resume ? std::llround(resume->time / c.dt) : 0;
    const auto start_it = std::find(points.begin(), points.end(), s0);
    if (start_it == points.end())
        throw ConfigError("", "checkpoint time does not sit on the record grid");

    std::vector<ObservableSeries> series;
    for (const std::string& name : c.observables) {
        if (name == "rdm") continue;
        series.push_back(resume ? reload_series(c, name, resume->time)
                                : ObservableSeries{name, {}, {}});
        r.outputs.push_back(file_name(c, name + ".csv"));
    }
    const Eigen::VectorXd xsq_op = e.basis.grid.points().array().square();
    const int j0 = zero_index(e.basis.grid);

    const auto write_series = [&] {
        for (const ObservableSeries& s : series)
            write_series_csv(file_path(c, s.name + ".csv"), s);
    };
    const auto save = [&](const Ensemble& st) {
        write_checkpoint(file_path(c, "checkpoint.bin"), st, hash);
        r.checkpoint = file_name(c, "checkpoint.bin");
    };
    const auto flush = [&](const Ensemble& st) {
        save(st);
        write_series();
        r.final_time = st.time;
        r.wall_seconds = timer.seconds();
        write_manifest(c, r);
    };

    Ensemble last_good = e;
    for (auto it = start_it; it != points.end(); ++it) {
        if (it != start_it) {
            try {
                ipw_run(e, c.dt, static_cast<int>(*it - *(it - 1)), mode);
            } catch (const std::exception& ex) {
                r.diverged = true;
                r.error = ex.what();
                break;
            }
        }
        if (!ensemble_finite(e)) {
            r.diverged = true;
            r.error = "non-finite state detected at t = " + format_g17(e.time);
            break;
        }
        if (!(resume && it == start_it)) {
            std::vector<double> row;
            row.reserve(series.size());
            try {
                for (const ObservableSeries& s : series) {
                    if (s.name == "xsq_traj") row.push_back(xsq_from_trajectories(e));
                    else if (s.name == "xsq_cw")
                        row.push_back(expectation_normalized(e, xsq_op, &e.diag));
                    else if (s.name == "rho0") row.push_back(density_riemann(e, 0)[j0]);
                    else if (s.name == "energy")
                        row.push_back(instantaneous_energy(e, c.system, e.time, &e.diag));
                }
            } catch (const std::exception& ex) {
                r.diverged = true;
                r.error = ex.what();
                break;
            }
            for (std::size_t i = 0; i < series.size(); ++i) series[i].push(e.time, row[i]);
        }
        last_good = e;
        const std::size_t pi = static_cast<std::size_t>(it - points.begin());
        if (it + 1 == points.end())
            save(e);
        else if (c.checkpoint_stride > 0 && pi > 0 && pi % c.checkpoint_stride == 0)
            flush(e);
    }

    if (r.diverged) save(last_good);
    r.final_time = r.diverged ? last_good.time : e.time;
    r.diag = r.diverged ? last_good.diag : e.diag;
    write_series();
    if (!r.diverged &&
        std::find(c.observables.begin(), c.observables.end(), "rdm") != c.observables.end()) {
        write_rdm_csv(file_path(c, "rdm.csv"), reduced_density_matrix(e, &r.diag));
        r.outputs.push_back(file_name(c, "rdm.csv"));
    }
    r.wall_seconds = timer.seconds();
    return r;
}

/// Grids of the light/heavy benchmark; wide enough for the breathing light
/// particle, fixed so every depth sees identical discretization.
inline Grid1D hierarchy_light_grid() { return Grid1D::make(-14.0, 14.0, 256); }
inline Grid1D hierarchy_heavy_grid() { return Grid1D::make(-12.0, 12.0, 128); }

inline RunReport run_hierarchy(const RunConfig& c) {
    RunReport r;
    r.config = c;
    const WallTimer timer;
    const HierarchyParams& h = c.hierarchy;
    const Grid1D gl = hierarchy_light_grid();
    const Grid1D gh = hierarchy_heavy_grid();

    const TwoBodySpec prep{TrapSpec{h.trap_k, h.light_mass},
                           TrapSpec{h.trap_k, h.prep_heavy_mass},
                           PairInteractionSpec::harmonic(h.prep_pair_k), Schedule::sudden()};
    const TwoBodySpec evolution{TrapSpec{h.trap_k, h.light_mass},
                                TrapSpec{h.trap_k, h.heavy_mass}, PairInteractionSpec::none(),
                                Schedule::sudden()};

    const GroundState2D gs = ground_state_2body(prep, gl, gh, h.prep_pair_k);

    const long long n_steps = total_steps(c);
    Eigen::Matrix2Xd start(2, 1);
    start << h.start[0], h.start[1];
    const ExactTrajectories traj =
        exact_bohmian_trajectories(evolution, gs.state, start, 0.0, c.dt,
                                   static_cast<int>(n_steps), c.record_stride);
    r.diag.merge(traj.diag);

    HierarchyState s = init_from_2body(gs.state, h.depth, {h.start[0], h.start[1]},
                                       {h.light_mass, h.heavy_mass});

    std::vector<double> times{traj.times[0]};
    std::vector<double> x1{s.positions[0]};
    std::vector<double> x1_exact{traj.positions[0](0, 0)};

    long long done = 0;
    std::size_t ri = 1;
    while (done + c.record_stride <= n_steps && ri < traj.times.size()) {
        bool alive = true;
        try {
            for (int k = 0; k < c.record_stride; ++k) {
                s = hierarchy_step(s, evolution, c.dt);
                ++done;
                if (s.frozen) {
                    alive = false;
                    break;
                }
            }
        } catch (const std::exception& ex) {
            r.diverged = true;
            r.error = ex.what();
            break;
        }
        if (alive) {
            bool finite = s.positions.allFinite();
            for (int i = 0; i < 2 && finite; ++i)
                for (const ComplexField& cf : s.cw[i])
                    if (!cf.values.allFinite()) finite = false;
            if (!finite) {
                r.diverged = true;
                r.error = "non-finite state detected at t = " + format_g17(s.time);
                break;
            }
            times.push_back(traj.times[ri]);
            x1.push_back(s.positions[0]);
            x1_exact.push_back(traj.positions[ri](0, 0));
            ++ri;
        } else {
            break;  // trajectory left its grid; the table ends here
        }
    }
    r.diag.merge(s.diag);
    r.final_time = times.back();

    write_hierarchy_csv(file_path(c, "trace.csv"), times, x1, x1_exact, h.depth);
    r.outputs.push_back(file_name(c, "trace.csv"));
    r.wall_seconds = timer.seconds();
    return r;
}

inline void write_plot_script(const RunConfig& c, const std::vector<std::string>& files) {
    auto out = open_out(file_path(c, "plot.py"));
    out << "#!/usr/bin/env python3\n"
           "\"\"\"Renders this run's CSV outputs as PNGs written beside the data.\"\"\"\n"
           "import csv\n"
           "import os\n\n"
           "import matplotlib\n"
           "matplotlib.use(\"Agg\")\n"
           "import matplotlib.pyplot as plt\n\n"
           "HERE = os.path.dirname(os.path.abspath(__file__))\n"
           "FILES = [\n";
    for (const std::string& f : files) out << "    \"" << f << "\",\n";
    out << "]\n\n"
           "def render(name):\n"
           "    path = os.path.join(HERE, name)\n"
           "    with open(path) as fh:\n"
           "        rows = list(csv.reader(fh))\n"
           "    header, data = rows[0], rows[1:]\n"
           "    fig, ax = plt.subplots(figsize=(7, 4.5))\n"
           "    try:\n"
           "        float(header[0])\n"
           "        matrix = [[complex(cell.replace(\"i\", \"j\")) for cell in row]\n"
           "                  for row in data]\n"
           "        im = ax.imshow([[abs(z) for z in row] for row in matrix],\n"
           "                       origin=\"lower\", aspect=\"auto\")\n"
           "        fig.colorbar(im, ax=ax)\n"
           "        ax.set_title(name)\n"
           "    except ValueError:\n"
           "        cols = list(zip(*[[float(c) for c in row] for row in data]))\n"
           "        for label, ys in list(zip(header, cols))[1:]:\n"
           "            if label == \"depth\":\n"
           "                continue\n"
           "            ax.plot(cols[0], ys, label=label)\n"
           "        ax.set_xlabel(header[0])\n"
           "        ax.legend()\n"
           "        ax.set_title(name)\n"
           "    fig.tight_layout()\n"
           "    fig.savefig(os.path.splitext(path)[0] + \".png\", dpi=150)\n"
           "    plt.close(fig)\n\n"
           "for name in FILES:\n"
           "    render(name)\n";
}

}  // namespace detail

/// Executes one configured run end to end: prepares the initial state, steps
/// the selected solver, records the requested observables, writes CSVs, a
/// checkpoint, and a manifest. A numerical failure mid-run (non-finite state
/// or a solver abort) ends the run with `diverged` set and the checkpoint
/// rewound to the last recorded state.
inline RunReport run(const RunConfig& c, const ResumeHandle* resume = nullptr) {
    c.validate();
    std::filesystem::create_directories(c.output_dir);

    RunReport r;
    switch (c.solver) {
        case SolverKind::Exact2Body: r = detail::run_exact(c, resume); break;
        case SolverKind::IpwFull:
        case SolverKind::IpwHermitianLimit: r = detail::run_ipw(c, resume); break;
        case SolverKind::Hierarchy:
            if (resume) throw ConfigError("solver", "hierarchy runs do not write checkpoints");
            r = detail::run_hierarchy(c);
            break;
    }

    if (c.emit_plot_script) {
        detail::write_plot_script(c, r.outputs);
        r.outputs.push_back(detail::file_name(c, "plot.py"));
    }
    detail::write_manifest(c, r);
    return r;
}

/// Picks up a run from its manifest: reloads the configuration and the last
/// checkpoint, keeps the already-recorded rows, and continues to t_max. The
/// combined outputs are bit-identical to an uninterrupted run.
inline RunReport resume(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("", "cannot open manifest: " + manifest_path);
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("", manifest_path + " is not valid JSON: " + ex.what());
    }
    if (!m.is_object() || !m.contains("config") || !m.contains("checkpoint"))
        throw ConfigError("", manifest_path + " is not a run manifest");
    const RunConfig c = parse_config(m["config"]);
    const std::string ck_name = m["checkpoint"].get<std::string>();
    if (ck_name.empty()) throw ConfigError("", "manifest records no checkpoint to resume from");

    Checkpoint ck = read_checkpoint(c.output_dir + "/" + ck_name);
    if (ck.spec_hash != config_hash(c))
        throw ConfigError("", "checkpoint was written by a different configuration");
    if (c.is_ipw() != ck.ensemble.has_value())
        throw ConfigError("", "checkpoint payload does not match the configured solver");

    ResumeHandle h{ck.time, std::move(ck.ensemble), std::move(ck.field)};
    return run(c, &h);
}

// ---------------------------------------------------------------------------
// Recipes: the benchmark experiments as plain configurations.

struct Recipe {
    std::string name;
    std::string summary;
    std::vector<RunConfig> runs;
    bool variance_oracle = false;  // also emit the analytic post-quench variance
};

/// Analytic per-particle variance after the sudden quench, tabulated on the
/// record grid of the given run.
inline ObservableSeries variance_oracle_series(const RunConfig& c) {
    ObservableSeries s;
    s.name = "xsq_oracle";
    const double k_full = full_strength(c.system.schedule, c.system.pair);
    for (const long long p : detail::record_steps(detail::total_steps(c), c.record_stride)) {
        const double t = static_cast<double>(p) * c.dt;
        s.push(t, analytic::quench_position_variance(t, c.system.n_bosons, k_full));
    }
    return s;
}

inline std::vector<Recipe> builtin_recipes(const std::string& out_base = "out") {
    std::vector<Recipe> recipes;
    const std::uint64_t seed = 20260819;

    const auto ipw_run_config = [&](const std::string& recipe, const std::string& label,
                                    SystemSpec system, SolverKind solver, int m, int nw,
                                    double t_max, std::vector<std::string> obs) {
        RunConfig c;
        c.solver = solver;
        c.label = label;
        c.system = std::move(system);
        c.ipw = {m, nw};
        c.dt = 0.005;
        c.t_max = t_max;
        c.record_stride = 10;
        c.seed = seed;
        c.observables = std::move(obs);
        c.output_dir = out_base + "/" + recipe;
        c.emit_plot_script = true;
        return c;
    };
    const auto exact_run_config = [&](const std::string& recipe, SystemSpec system,
                                      double t_max, std::vector<std::string> obs) {
        RunConfig c;
        c.solver = SolverKind::Exact2Body;
        c.label = "exact";
        c.system = std::move(system);
        c.dt = 0.002;
        c.t_max = t_max;
        c.record_stride = 25;
        c.seed = seed;
        c.observables = std::move(obs);
        c.output_dir = out_base + "/" + recipe;
        c.emit_plot_script = true;
        return c;
    };

    {
        const SystemSpec sys{2, TrapSpec{1.0, 1.0}, PairInteractionSpec::harmonic(1.0),
                             Schedule::sudden()};
        Recipe r;
        r.name = "quench_density";
        r.summary = "2 bosons, strong sudden quench: central density, 6-orbital ansatz vs exact";
        r.runs.push_back(ipw_run_config(r.name, "ipw", sys, SolverKind::IpwFull, 6, 5000, 15.0,
                                        {"rho0"}));
        r.runs.push_back(exact_run_config(r.name, sys, 15.0, {"rho0"}));
        recipes.push_back(std::move(r));
    }
    {
        const SystemSpec sys{5, TrapSpec{1.0, 1.0}, PairInteractionSpec::harmonic(0.1),
                             Schedule::sudden()};
        Recipe r;
        r.name = "quench_variance";
        r.summary = "5 bosons, weak sudden quench: trajectory variance, entangling sources "
                    "on/off vs analytic";
        r.runs.push_back(ipw_run_config(r.name, "full", sys, SolverKind::IpwFull, 3, 1000, 10.0,
                                        {"xsq_traj"}));
        r.runs.push_back(ipw_run_config(r.name, "hermitian", sys, SolverKind::IpwHermitianLimit,
                                        3, 1000, 10.0, {"xsq_traj"}));
        r.variance_oracle = true;
        recipes.push_back(std::move(r));

        Recipe r4 = recipes.back();
        r4.name = "quench_variance_m4";
        r4.summary = "same quench with a 4-orbital ansatz";
        for (RunConfig& rc : r4.runs) {
            rc.ipw.m_orbitals = 4;
            rc.output_dir = out_base + "/" + r4.name;
        }
        recipes.push_back(std::move(r4));
    }
    {
        const SystemSpec sys{2, TrapSpec{1.0, 1.0}, PairInteractionSpec::gaussian(0.1, 0.25),
                             Schedule::sudden()};
        Recipe r;
        r.name = "gaussian_variance";
        r.summary = "2 bosons, soft Gaussian interaction: wave-estimated variance vs exact";
        r.runs.push_back(ipw_run_config(r.name, "ipw", sys, SolverKind::IpwFull, 3, 1000, 10.0,
                                        {"xsq_cw"}));
        r.runs.push_back(exact_run_config(r.name, sys, 10.0, {"xsq"}));
        recipes.push_back(std::move(r));
    }
    {
        const SystemSpec sys{5, TrapSpec{1.0, 1.0}, PairInteractionSpec::harmonic(0.1),
                             Schedule::adiabatic(0.1, 0.02)};
        Recipe r;
        r.name = "adiabatic_energy";
        r.summary = "5 bosons, slow interaction ramp: instantaneous energy along the sweep";
        r.runs.push_back(ipw_run_config(r.name, "ipw", sys, SolverKind::IpwFull, 3, 1000, 25.0,
                                        {"energy"}));
        recipes.push_back(std::move(r));
    }
    {
        Recipe r;
        r.name = "mass_hierarchy";
        r.summary = "light particle entangled with a heavy one: closure depth 0 vs 7 against "
                    "the exact trajectory";
        for (const int depth : {0, 7}) {
            RunConfig c;
            c.solver = SolverKind::Hierarchy;
            c.label = "depth" + std::to_string(depth);
            c.dt = 0.002;
            c.t_max = 20.0;
            c.record_stride = 50;
            c.hierarchy.depth = depth;
            c.output_dir = out_base + "/" + r.name;
            c.emit_plot_script = true;
            r.runs.push_back(std::move(c));
        }
        recipes.push_back(std::move(r));
    }
    return recipes;
}

namespace detail {

/// Overwrites one already-present field addressed by a dotted path; absent
/// paths are left untouched so the caller can tell a typo from a field that
/// only some runs have.
inline bool set_existing(nlohmann::json& j, const std::string& dotted,
                         const nlohmann::json& value) {
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot - start);
        if (!node->is_object() || !node->contains(key)) return false;
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return true;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace detail

/// `path=value` overrides applied to every run of a recipe that has the field;
/// values parse as JSON, bare words as strings. An override no run accepts is
/// an error.
inline Recipe apply_overrides(Recipe recipe, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("", "override must look like path=value: " + kv);
        const std::string path = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::parse_error&) {
            value = raw;
        }
        int hits = 0;
        for (RunConfig& rc : recipe.runs) {
            nlohmann::json j = to_json(rc);
            if (detail::set_existing(j, path, value)) {
                rc = parse_config(j);
                ++hits;
            }
        }
        if (hits == 0) throw ConfigError(path, "no run in this recipe has that field");
    }
    return recipe;
}

/// Runs every configuration of a recipe in order, plus the analytic variance
/// table when the recipe calls for one. Stops at the first divergence.
inline std::vector<RunReport> run_recipe(const Recipe& recipe) {
    std::vector<RunReport> reports;
    for (const RunConfig& c : recipe.runs) {
        reports.push_back(run(c));
        if (reports.back().diverged) return reports;
    }
    if (recipe.variance_oracle && !recipe.runs.empty()) {
        const RunConfig& lead = recipe.runs.front();
        std::filesystem::create_directories(lead.output_dir);
        write_series_csv(lead.output_dir + "/oracle_xsq.csv", variance_oracle_series(lead));
    }
    return reports;
}

}  // namespace ipw
