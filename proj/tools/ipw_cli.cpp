#include <algorithm>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "ipw/io.hpp"
#include "ipw/runconfig.hpp"
#include "ipw/runner.hpp"
#include "ipw/series.hpp"

namespace {

void print_report(const ipw::RunReport& r) {
    std::cout << r.config.label << ": reached t = " << r.final_time << " in " << r.wall_seconds
              << " s";
    if (r.diverged) std::cout << "  ** diverged: " << r.error;
    std::cout << "\n";
    for (const std::string& f : r.outputs)
        std::cout << "  " << r.config.output_dir << "/" << f << "\n";
    if (!r.checkpoint.empty())
        std::cout << "  " << r.config.output_dir << "/" << r.checkpoint << "\n";
    if (r.diag.total() > 0)
        std::cout << "  numerical events: " << r.diag.total()
                  << " (see the manifest for the breakdown)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entangled pilot-wave dynamics of trapped interacting bosons"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap linear-algebra worker threads");

    std::string config_path;
    CLI::App* run_cmd = app.add_subcommand("run", "execute one configured run");
    run_cmd->add_option("config", config_path, "JSON configuration or run manifest")->required();

    std::string recipe_name;
    std::string out_base = "out";
    std::vector<std::string> sets;
    bool list_recipes = false;
    CLI::App* recipe_cmd = app.add_subcommand("recipe", "execute a built-in experiment");
    recipe_cmd->add_option("name", recipe_name, "recipe name; see --list");
    recipe_cmd->add_option("--out", out_base, "base output directory")->capture_default_str();
    recipe_cmd->add_option("--set", sets, "override a field, path=value (repeatable)");
    recipe_cmd->add_flag("--list", list_recipes, "list available recipes");

    std::string series_a, series_b, metric_name;
    double t_at = 0.0;
    CLI::App* cmp_cmd = app.add_subcommand("compare", "distance between two recorded series");
    cmp_cmd->add_option("a", series_a, "first t,value CSV")->required();
    cmp_cmd->add_option("b", series_b, "second t,value CSV")->required();
    cmp_cmd->add_option("--metric", metric_name, "max_abs | time_integrated_abs | rel_at")
        ->required();
    CLI::Option* at_opt = cmp_cmd->add_option("--at", t_at, "evaluation time for rel_at");

    std::string manifest_path;
    CLI::App* resume_cmd =
        app.add_subcommand("checkpoint-resume", "continue a run from its manifest");
    resume_cmd->add_option("manifest", manifest_path, "run manifest (…_manifest.json)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) Eigen::setNbThreads(threads);

    try {
        if (*run_cmd) {
            const ipw::RunReport r = ipw::run(ipw::load_config(config_path));
            print_report(r);
            return r.diverged ? 3 : 0;
        }
        if (*recipe_cmd) {
            const std::vector<ipw::Recipe> recipes = ipw::builtin_recipes(out_base);
            if (list_recipes) {
                for (const ipw::Recipe& r : recipes)
                    std::cout << r.name << "\n    " << r.summary << "\n";
                return 0;
            }
            if (recipe_name.empty())
                throw ipw::ConfigError("", "give a recipe name, or --list to see them");
            const auto it = std::find_if(recipes.begin(), recipes.end(),
                                         [&](const ipw::Recipe& r) { return r.name == recipe_name; });
            if (it == recipes.end()) {
                std::string names;
                for (const ipw::Recipe& r : recipes) names += " " + r.name;
                throw ipw::ConfigError("", "unknown recipe '" + recipe_name + "'; available:" +
                                               names);
            }
            const std::vector<ipw::RunReport> reports =
                ipw::run_recipe(ipw::apply_overrides(*it, sets));
            bool diverged = false;
            for (const ipw::RunReport& r : reports) {
                print_report(r);
                diverged = diverged || r.diverged;
            }
            return diverged ? 3 : 0;
        }
        if (*cmp_cmd) {
            const ipw::CompareMetric metric = ipw::parse_metric(metric_name);
            if (metric == ipw::CompareMetric::RelAt && at_opt->count() == 0)
                throw ipw::ConfigError("", "rel_at needs --at <time>");
            const double d = ipw::compare_series(ipw::read_series_csv(series_a),
                                                 ipw::read_series_csv(series_b), metric, t_at);
            std::cout << ipw::format_g17(d) << "\n";
            return 0;
        }
        if (*resume_cmd) {
            const ipw::RunReport r = ipw::resume(manifest_path);
            print_report(r);
            return r.diverged ? 3 : 0;
        }
    } catch (const ipw::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
