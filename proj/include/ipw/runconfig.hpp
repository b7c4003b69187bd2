#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipw/grid.hpp"
#include "ipw/model.hpp"

namespace ipw {

/// Rejected configuration, carrying the dotted path of the offending field.
struct ConfigError : std::runtime_error {
    std::string path;
    ConfigError(std::string p, const std::string& what)
        : std::runtime_error(p.empty() ? what : p + ": " + what), path(std::move(p)) {}
};

enum class SolverKind { Exact2Body, IpwFull, IpwHermitianLimit, Hierarchy };

inline std::string solver_name(SolverKind s) {
    switch (s) {
        case SolverKind::Exact2Body: return "exact2body";
        case SolverKind::IpwFull: return "ipw_full";
        case SolverKind::IpwHermitianLimit: return "ipw_hermitian_limit";
        case SolverKind::Hierarchy: return "hierarchy";
    }
    throw std::logic_error("solver_name: unreachable");
}

inline SolverKind parse_solver(const std::string& name, const std::string& path) {
    if (name == "exact2body") return SolverKind::Exact2Body;
    if (name == "ipw_full") return SolverKind::IpwFull;
    if (name == "ipw_hermitian_limit") return SolverKind::IpwHermitianLimit;
    if (name == "hierarchy") return SolverKind::Hierarchy;
    throw ConfigError(path, "unknown solver '" + name +
                                "' (expected exact2body, ipw_full, ipw_hermitian_limit, or "
                                "hierarchy)");
}

struct GridSpec {
    double x_min = 0.0;
    double x_max = 0.0;
    int n = 0;

    Grid1D make(const std::string& path) const {
        try {
            return Grid1D::make(x_min, x_max, n);
        } catch (const std::exception& ex) {
            throw ConfigError(path, ex.what());
        }
    }
};

struct IpwParams {
    int m_orbitals = 0;
    int n_configs = 0;
};

/// Light probe in a trap, prepared entangled with a heavier partner that is
/// then made very heavy for the evolution.
struct HierarchyParams {
    int depth = 0;
    double light_mass = 1.0;
    double heavy_mass = 100.0;
    double prep_heavy_mass = 2.0;
    double trap_k = 0.1;
    double prep_pair_k = 1.0;
    std::array<double, 2> start{1.0, 2.0};
};

struct RunConfig {
    SolverKind solver = SolverKind::Exact2Body;
    std::string label;
    double t_max = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 1;
    int record_stride = 10;
    int checkpoint_stride = 0;  // 0: checkpoint only at the final time
    SystemSpec system;
    GridSpec grid{-16.0, 16.0, 256};      // conditional-wave grid
    GridSpec exact_grid{-8.0, 8.0, 128};  // per-axis grid of the 2D reference
    IpwParams ipw;
    HierarchyParams hierarchy;
    std::vector<std::string> observables;
    std::string output_dir = ".";
    bool emit_plot_script = false;

    bool is_ipw() const {
        return solver == SolverKind::IpwFull || solver == SolverKind::IpwHermitianLimit;
    }

    void validate() const {
        if (label.empty()) throw ConfigError("label", "must not be empty");
        if (!(t_max > 0.0)) throw ConfigError("t_max", "must be > 0");
        if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
        if (dt > t_max) throw ConfigError("dt", "must not exceed t_max");
        const double steps = std::round(t_max / dt);
        if (steps > 2e9 || std::abs(steps * dt - t_max) > 1e-9 * std::max(1.0, t_max))
            throw ConfigError("t_max", "must be a whole number of dt steps");
        if (record_stride < 1) throw ConfigError("record_stride", "must be >= 1");
        if (checkpoint_stride < 0) throw ConfigError("checkpoint_stride", "must be >= 0");
        if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

        if (solver == SolverKind::Hierarchy) {
            if (hierarchy.depth < 0) throw ConfigError("hierarchy.depth", "must be >= 0");
            if (!(hierarchy.light_mass > 0.0))
                throw ConfigError("hierarchy.light_mass", "must be > 0");
            if (!(hierarchy.heavy_mass > 0.0))
                throw ConfigError("hierarchy.heavy_mass", "must be > 0");
            if (!(hierarchy.prep_heavy_mass > 0.0))
                throw ConfigError("hierarchy.prep_heavy_mass", "must be > 0");
            if (!(hierarchy.trap_k > 0.0))
                throw ConfigError("hierarchy.trap_k",
                                  "must be > 0 to prepare the entangled ground state");
            if (!(hierarchy.prep_pair_k > 0.0))
                throw ConfigError("hierarchy.prep_pair_k",
                                  "must be > 0 to prepare the entangled ground state");
            if (!observables.empty())
                throw ConfigError("observables",
                                  "the hierarchy solver writes a fixed trajectory table");
            return;
        }

        try {
            system.validate();
        } catch (const std::exception& ex) {
            throw ConfigError("system", ex.what());
        }
        if (!(system.trap.k > 0.0))
            throw ConfigError("system.trap.k", "must be > 0 to prepare the trap ground state");
        grid.make("grid");
        exact_grid.make("exact_grid");

        if (is_ipw()) {
            if (ipw.m_orbitals < 1) throw ConfigError("ipw.m_orbitals", "must be >= 1");
            if (ipw.n_configs < 1) throw ConfigError("ipw.n_configs", "must be >= 1");
        } else if (system.n_bosons != 2) {
            throw ConfigError("system.n_bosons", "the exact reference handles exactly 2");
        }

        for (std::size_t i = 0; i < observables.size(); ++i) {
            const std::string& name = observables[i];
            const std::string path = "observables[" + std::to_string(i) + "]";
            const bool common = name == "rho0" || name == "energy" || name == "rdm";
            const bool ok = is_ipw() ? (common || name == "xsq_traj" || name == "xsq_cw")
                                     : (common || name == "xsq");
            if (!ok)
                throw ConfigError(path, "unknown observable '" + name + "' for solver " +
                                            solver_name(solver));
            if (name == "rho0" && system.n_bosons != 2)
                throw ConfigError(path, "rho0 needs exactly two bosons");
        }
    }
};

namespace detail {

/// Position in the JSON tree; every getter names its full dotted path when the
/// shape is wrong.
struct Cursor {
    const nlohmann::json& j;
    std::string path;

    std::string sub(const std::string& key) const {
        return path.empty() ? key : path + "." + key;
    }
    bool has(const std::string& key) const { return j.is_object() && j.contains(key); }
    Cursor field(const std::string& key) const {
        if (!j.is_object()) throw ConfigError(path, "expected an object");
        const auto it = j.find(key);
        if (it == j.end()) throw ConfigError(sub(key), "missing required field");
        return {*it, sub(key)};
    }

    /// Rejects keys outside the allowed set, so typos never pass silently.
    void check_keys(std::initializer_list<const char*> allowed) const {
        if (!j.is_object()) throw ConfigError(path, "expected an object");
        for (const auto& [key, value] : j.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) throw ConfigError(sub(key), "unknown field");
        }
    }

    double number() const {
        if (!j.is_number()) throw ConfigError(path, "expected a number");
        return j.get<double>();
    }
    int integer() const {
        if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
        return j.get<int>();
    }
    std::uint64_t unsigned64() const {
        if (!j.is_number_unsigned()) throw ConfigError(path, "expected a nonnegative integer");
        return j.get<std::uint64_t>();
    }
    bool boolean() const {
        if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
        return j.get<bool>();
    }
    std::string str() const {
        if (!j.is_string()) throw ConfigError(path, "expected a string");
        return j.get<std::string>();
    }
};

inline GridSpec parse_grid(const Cursor& c) {
    c.check_keys({"x_min", "x_max", "n"});
    GridSpec g;
    g.x_min = c.field("x_min").number();
    g.x_max = c.field("x_max").number();
    g.n = c.field("n").integer();
    g.make(c.path);
    return g;
}

inline PairInteractionSpec parse_pair(const Cursor& c) {
    const std::string kind = c.field("kind").str();
    if (kind == "none") {
        c.check_keys({"kind"});
        return PairInteractionSpec::none();
    }
    if (kind == "harmonic") {
        c.check_keys({"kind", "k"});
        return PairInteractionSpec::harmonic(c.field("k").number());
    }
    if (kind == "gaussian") {
        c.check_keys({"kind", "k", "sigma"});
        return PairInteractionSpec::gaussian(c.field("k").number(), c.field("sigma").number());
    }
    throw ConfigError(c.sub("kind"),
                      "unknown interaction '" + kind + "' (expected none, harmonic, or gaussian)");
}

inline Schedule parse_schedule(const Cursor& c) {
    const std::string kind = c.field("kind").str();
    if (kind == "sudden") {
        c.check_keys({"kind"});
        return Schedule::sudden();
    }
    if (kind == "adiabatic") {
        c.check_keys({"kind", "k_max", "rate"});
        return Schedule::adiabatic(c.field("k_max").number(), c.field("rate").number());
    }
    throw ConfigError(c.sub("kind"),
                      "unknown schedule '" + kind + "' (expected sudden or adiabatic)");
}

inline SystemSpec parse_system(const Cursor& c) {
    c.check_keys({"n_bosons", "trap", "pair", "schedule"});
    SystemSpec s;
    s.n_bosons = c.field("n_bosons").integer();
    const Cursor trap = c.field("trap");
    trap.check_keys({"k", "mass"});
    s.trap.k = trap.field("k").number();
    s.trap.mass = trap.has("mass") ? trap.field("mass").number() : 1.0;
    s.pair = c.has("pair") ? parse_pair(c.field("pair")) : PairInteractionSpec::none();
    s.schedule = c.has("schedule") ? parse_schedule(c.field("schedule")) : Schedule::sudden();
    return s;
}

inline HierarchyParams parse_hierarchy(const Cursor& c) {
    c.check_keys({"depth", "light_mass", "heavy_mass", "prep_heavy_mass", "trap_k",
                  "prep_pair_k", "start"});
    HierarchyParams h;
    h.depth = c.field("depth").integer();
    if (c.has("light_mass")) h.light_mass = c.field("light_mass").number();
    if (c.has("heavy_mass")) h.heavy_mass = c.field("heavy_mass").number();
    if (c.has("prep_heavy_mass")) h.prep_heavy_mass = c.field("prep_heavy_mass").number();
    if (c.has("trap_k")) h.trap_k = c.field("trap_k").number();
    if (c.has("prep_pair_k")) h.prep_pair_k = c.field("prep_pair_k").number();
    if (c.has("start")) {
        const Cursor s = c.field("start");
        if (!s.j.is_array() || s.j.size() != 2)
            throw ConfigError(s.path, "expected an array of two numbers");
        h.start[0] = Cursor{s.j[0], s.path + "[0]"}.number();
        h.start[1] = Cursor{s.j[1], s.path + "[1]"}.number();
    }
    return h;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
    const detail::Cursor top{root, ""};
    if (!root.is_object()) throw ConfigError("", "expected a configuration object");

    RunConfig c;
    c.solver = parse_solver(top.field("solver").str(), "solver");

    const bool hier = c.solver == SolverKind::Hierarchy;
    if (hier)
        top.check_keys({"solver", "label", "t_max", "dt", "record_stride", "checkpoint_stride",
                        "hierarchy", "output_dir", "emit_plot_script"});
    else if (c.solver == SolverKind::Exact2Body)
        top.check_keys({"solver", "label", "t_max", "dt", "seed", "record_stride",
                        "checkpoint_stride", "system", "exact_grid", "observables", "output_dir",
                        "emit_plot_script"});
    else
        top.check_keys({"solver", "label", "t_max", "dt", "seed", "record_stride",
                        "checkpoint_stride", "system", "grid", "exact_grid", "ipw", "observables",
                        "output_dir", "emit_plot_script"});

    c.label = top.has("label") ? top.field("label").str() : solver_name(c.solver);
    c.t_max = top.field("t_max").number();
    c.dt = top.field("dt").number();
    if (top.has("seed")) c.seed = top.field("seed").unsigned64();
    if (top.has("record_stride")) c.record_stride = top.field("record_stride").integer();
    if (top.has("checkpoint_stride")) c.checkpoint_stride = top.field("checkpoint_stride").integer();
    if (top.has("output_dir")) c.output_dir = top.field("output_dir").str();
    if (top.has("emit_plot_script")) c.emit_plot_script = top.field("emit_plot_script").boolean();

    if (hier) {
        c.hierarchy = detail::parse_hierarchy(top.field("hierarchy"));
    } else {
        c.system = detail::parse_system(top.field("system"));
        if (top.has("grid")) c.grid = detail::parse_grid(top.field("grid"));
        if (top.has("exact_grid")) c.exact_grid = detail::parse_grid(top.field("exact_grid"));
        if (c.is_ipw()) {
            const detail::Cursor ipw = top.field("ipw");
            ipw.check_keys({"m_orbitals", "n_configs"});
            c.ipw.m_orbitals = ipw.field("m_orbitals").integer();
            c.ipw.n_configs = ipw.field("n_configs").integer();
        }
        if (top.has("observables")) {
            const detail::Cursor obs = top.field("observables");
            if (!obs.j.is_array()) throw ConfigError(obs.path, "expected an array of names");
            for (std::size_t i = 0; i < obs.j.size(); ++i)
                c.observables.push_back(
                    detail::Cursor{obs.j[i], obs.path + "[" + std::to_string(i) + "]"}.str());
        }
    }

    c.validate();
    return c;
}

/// Canonical echo of a validated configuration; parse_config(to_json(c))
/// reproduces c, and the dump of this object is the hashing surface.
inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["solver"] = solver_name(c.solver);
    j["label"] = c.label;
    j["t_max"] = c.t_max;
    j["dt"] = c.dt;
    j["record_stride"] = c.record_stride;
    j["checkpoint_stride"] = c.checkpoint_stride;
    j["output_dir"] = c.output_dir;
    j["emit_plot_script"] = c.emit_plot_script;

    if (c.solver == SolverKind::Hierarchy) {
        j["hierarchy"] = {{"depth", c.hierarchy.depth},
                          {"light_mass", c.hierarchy.light_mass},
                          {"heavy_mass", c.hierarchy.heavy_mass},
                          {"prep_heavy_mass", c.hierarchy.prep_heavy_mass},
                          {"trap_k", c.hierarchy.trap_k},
                          {"prep_pair_k", c.hierarchy.prep_pair_k},
                          {"start", {c.hierarchy.start[0], c.hierarchy.start[1]}}};
        return j;
    }

    j["seed"] = c.seed;
    nlohmann::json sys;
    sys["n_bosons"] = c.system.n_bosons;
    sys["trap"] = {{"k", c.system.trap.k}, {"mass", c.system.trap.mass}};
    switch (c.system.pair.kind) {
        case PairKind::None: sys["pair"] = {{"kind", "none"}}; break;
        case PairKind::Harmonic:
            sys["pair"] = {{"kind", "harmonic"}, {"k", c.system.pair.k}};
            break;
        case PairKind::Gaussian:
            sys["pair"] = {{"kind", "gaussian"}, {"k", c.system.pair.k},
                           {"sigma", c.system.pair.sigma}};
            break;
    }
    if (c.system.schedule.kind == Schedule::Kind::Sudden)
        sys["schedule"] = {{"kind", "sudden"}};
    else
        sys["schedule"] = {{"kind", "adiabatic"}, {"k_max", c.system.schedule.k_max},
                           {"rate", c.system.schedule.rate}};
    j["system"] = sys;

    j["exact_grid"] = {{"x_min", c.exact_grid.x_min}, {"x_max", c.exact_grid.x_max},
                       {"n", c.exact_grid.n}};
    if (c.is_ipw()) {
        j["grid"] = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"n", c.grid.n}};
        j["ipw"] = {{"m_orbitals", c.ipw.m_orbitals}, {"n_configs", c.ipw.n_configs}};
    }
    j["observables"] = c.observables;
    return j;
}

/// Reads a configuration file; a run manifest (which echoes the run under a
/// top-level "config" key) is accepted in place of a bare configuration.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file: " + path);
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("", path + " is not valid JSON: " + ex.what());
    }
    if (root.is_object() && root.contains("config")) return parse_config(root["config"]);
    return parse_config(root);
}

/// FNV-1a over the canonical dump; ties checkpoints to the exact run recipe.
inline std::uint64_t config_hash(const RunConfig& c) {
    const std::string dump = to_json(c).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char ch : dump) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace ipw
