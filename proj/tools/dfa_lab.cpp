// dfa-lab: preference-based RL experiments on tabular MDPs.
//
// Subcommands:
//   verify      run the numerical verification battery
//   gridworld   run the stochastic-GridWorld comparison and write CSVs
//   plot        render learning-curve CSVs into an SVG chart
//   synth-demo  off-policy DFA vs tabular SAC on the same GridWorld
//
// Exit codes: 0 success / all checks pass, 1 check or run failure,
// 2 configuration error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfa/config.hpp"
#include "dfa/experiment.hpp"
#include "dfa/svg_plot.hpp"
#include "dfa/verify.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string seed_list;
};

dfa::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
    dfa::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = dfa::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (!opts.seed_list.empty()) dfa::apply_config_key(cfg, "run.seeds", opts.seed_list);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key = value config file");
    cmd->add_option("--out", opts.out_dir, "output directory override");
    cmd->add_option("--seed-list", opts.seed_list, "comma-separated seed override");
}

int cmd_verify(const CommonOpts& opts, std::uint64_t seed) {
    dfa::VerifyOptions vopt;
    vopt.seed = seed;
    const auto checks = dfa::verify_suite(vopt);
    dfa::print_verify_report(checks, std::cout);
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        dfa::write_verify_report_json(checks, opts.out_dir + "/verify_report.json");
        std::cout << "report: " << opts.out_dir << "/verify_report.json\n";
    }
    return dfa::all_pass(checks) ? 0 : 1;
}

int cmd_gridworld(const CommonOpts& opts) {
    auto cfg = load_with_overrides(opts);
    const auto records = dfa::run_experiment(cfg);
    std::printf("wrote %zu run records to %s\n", records.size(), cfg.out_dir.c_str());
    for (const auto& rec : records)
        if (!rec.points.empty())
            std::printf("  %-18s seed %2llu  final return %.4f at %ld steps\n",
                        rec.algorithm.c_str(), static_cast<unsigned long long>(rec.seed),
                        rec.points.back().second, rec.points.back().first);
    return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const CommonOpts& opts,
             const std::string& name) {
    const std::string dir = opts.out_dir.empty() ? "." : opts.out_dir;
    std::filesystem::create_directories(dir);
    const std::string out = dir + "/" + name;
    dfa::plot_curves(csvs, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_synth_demo(const CommonOpts& opts) {
    auto cfg = load_with_overrides(opts);
    if (opts.config_path.empty()) {
        // compact demo defaults when no config is given
        cfg.env_step_budget = 60000;
        cfg.eval_interval = 2000;
        cfg.eval_episodes = 50;
        cfg.grid.side = 5;
        cfg.grid.horizon = 20;
    }
    cfg.algorithms = {"dfa-offpolicy", "sac"};
    const auto records = dfa::run_experiment(cfg);
    std::printf("wrote %zu run records to %s\n", records.size(), cfg.out_dir.c_str());
    for (const auto& rec : records)
        if (!rec.points.empty())
            std::printf("  %-14s seed %2llu  final return %.4f\n", rec.algorithm.c_str(),
                        static_cast<unsigned long long>(rec.seed), rec.points.back().second);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"preference-based RL laboratory for tabular MDPs"};
    app.require_subcommand(1);

    CommonOpts verify_opts, grid_opts, plot_opts, synth_opts;
    std::uint64_t verify_seed = 20240601;
    std::vector<std::string> plot_csvs;
    std::string plot_name = "curves.svg";

    auto* verify = app.add_subcommand("verify", "run the verification battery");
    add_common(verify, verify_opts);
    verify->add_option("--seed", verify_seed, "seed for the randomized checks");

    auto* gridworld = app.add_subcommand("gridworld", "run the GridWorld comparison");
    add_common(gridworld, grid_opts);

    auto* plot = app.add_subcommand("plot", "render CSV learning curves as SVG");
    add_common(plot, plot_opts);
    plot->add_option("csvs", plot_csvs, "input CSV files")->required()->expected(-1);
    plot->add_option("--name", plot_name, "output SVG file name");

    auto* synth = app.add_subcommand("synth-demo", "off-policy DFA vs tabular SAC demo");
    add_common(synth, synth_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return cmd_verify(verify_opts, verify_seed);
        if (gridworld->parsed()) return cmd_gridworld(grid_opts);
        if (plot->parsed()) return cmd_plot(plot_csvs, plot_opts, plot_name);
        if (synth->parsed()) return cmd_synth_demo(synth_opts);
    } catch (const dfa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
