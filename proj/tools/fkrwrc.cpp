#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fkrwrc/config.hpp"
#include "fkrwrc/experiments.hpp"
#include "fkrwrc/joint.hpp"
#include "fkrwrc/regen.hpp"

using namespace fkrwrc;

namespace {

int header_dimension(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory '" + path + "'");
    std::string tag;
    int d = 0;
    in >> tag >> d;
    if (tag != "d" || d < 1) throw std::runtime_error(path + ": trajectory header must start with 'd <dim>'");
    return d;
}

Trajectory load_trajectory(const std::string& path, const LatticeConfig& cfg)
{
    std::ifstream in(path);
    return read_trajectory(in, cfg);
}

int cmd_run(const std::string& config_path, int threads, const std::string& out)
{
    ExperimentConfig c = load_config(config_path);
    apply_environment_overrides(c);
    if (threads > 0) c.threads = unsigned(threads);
    if (!out.empty()) c.out = out;
    const ExperimentReport rep = run_experiment(c);
    write_report(rep, c.out);
    std::fprintf(stderr, "%s: %zu summary rows, %.3f s, output in %s\n", c.experiment.c_str(), rep.summary.size(),
                 rep.wall_seconds, c.out.c_str());
    for (const auto& f : rep.failures) std::fprintf(stderr, "FAILED: %s\n", f.c_str());
    return rep.ok() ? 0 : 1;
}

int cmd_validate(const std::string& config_path)
{
    ExperimentConfig c = load_config(config_path);
    apply_environment_overrides(c);
    c.lattice();
    std::cout << emit_config(c);
    return 0;
}

int cmd_inject(const std::string& p1, const std::string& p2, const std::string& experiment,
               const std::string& config_path)
{
    const int d = header_dimension(p1);
    ExperimentConfig c;
    if (!config_path.empty()) {
        c = load_config(config_path);
        if (c.d != d) throw std::runtime_error("trajectory dimension does not match the config");
    } else {
        c = parse_config("experiment = " + experiment + "\n[lattice]\nd = " + std::to_string(d) +
                         "\n[law]\nuniform_conductance = 1\n");
    }
    const LatticeConfig cfg = c.lattice();
    Environment env(cfg, c.law(), environment_seed(c.seed, 0));
    if (c.uniform_conductance) env.set_uniform(*c.uniform_conductance);
    JointTrajectory j;
    j.env1 = j.env2 = &env;
    j.traj1 = load_trajectory(p1, cfg);
    j.traj2 = load_trajectory(p2, cfg);

    if (experiment == "separation") {
        const auto r = separation_event(cfg, trace_of(j.traj1), trace_of(j.traj2), c.R_grid);
        CsvTable t{"separation", {"R", "event", "min_distance"}, {}};
        for (std::size_t i = 0; i < r.R_grid.size(); ++i)
            t.add({std::to_string(r.R_grid[i]), std::to_string(int(r.event[i])), std::to_string(r.min_distance[i])});
        std::cout << to_csv(t);
        return 0;
    }
    const std::size_t cap = std::max(j.traj1.size(), j.traj2.size());
    const auto brute = joint_regeneration_levels_bruteforce(j, cap, c.delta);
    const auto k_open = [&](const Point& x) { return is_k_open(env, x); };
    const auto stream = joint_regeneration_levels(cfg, {k_open, k_open}, {replay_moves(j.traj1), replay_moves(j.traj2)},
                                                  {j.traj1.start().x, j.traj2.start().x}, {cap, 0}, c.delta);
    CsvTable t{"joint", {"method", "k", "level", "hit_time_1", "hit_time_2"}, {}};
    auto emit = [&](const std::string& method, const std::vector<JointRegenRecord>& recs) {
        for (const auto& r : recs)
            t.add({method, std::to_string(r.k), std::to_string(r.level), std::to_string(r.hit_time[0]),
                   std::to_string(r.hit_time[1])});
    };
    emit("bruteforce", brute);
    emit("streaming", stream.records);
    std::cout << to_csv(t);
    for (std::size_t k = 0; k < std::min(brute.size(), stream.records.size()); ++k)
        if (brute[k].level != stream.records[k].level) {
            std::fprintf(stderr, "FAILED: streaming and brute-force levels differ at k = %zu\n", k + 1);
            return 1;
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Biased random walk among heavy-tailed random conductances: simulation and estimators"};
    app.require_subcommand(1);

    std::string config_path, out, traj1, traj2, inject_experiment, inject_config;
    int threads = 0;

    auto* run = app.add_subcommand("run", "Run the experiment named in a config file");
    run->add_option("--config", config_path, "INI config file")->required();
    run->add_option("--threads", threads, "Worker threads (overrides FKRWRC_THREADS and the config)")
        ->check(CLI::Range(1, 1024));
    run->add_option("--out", out, "Output directory (overrides the config)");

    auto* validate = app.add_subcommand("validate", "Parse a config and print it with all defaults resolved");
    validate->add_option("--config", config_path, "INI config file")->required();

    auto* inject = app.add_subcommand("inject", "Evaluate injected trajectory fixtures");
    inject->add_option("--traj1", traj1, "First trajectory dump")->required();
    inject->add_option("--traj2", traj2, "Second trajectory dump")->required();
    inject->add_option("--experiment", inject_experiment, "joint or separation")
        ->required()
        ->check(CLI::IsMember({"joint", "separation"}));
    inject->add_option("--config", inject_config, "Optional config (default: unit conductances, ell = e_1)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, threads, out);
        if (*validate) return cmd_validate(config_path);
        return cmd_inject(traj1, traj2, inject_experiment, inject_config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
