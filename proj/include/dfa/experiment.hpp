#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dfa/baselines.hpp"
#include "dfa/config.hpp"
#include "dfa/dfa.hpp"
#include "dfa/synth_replay.hpp"

namespace dfa {

namespace detail {

// Fixed string hash (FNV-1a) so derived seeds never depend on the standard
// library's std::hash, keeping outputs identical across toolchains.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string format_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

}  // namespace detail

/// `algorithm,seed,env_steps,avg_return` rows for one algorithm, sorted by
/// seed then env_steps. UTF-8, LF endings, header row, newline-terminated.
inline void write_run_csv(const std::string& path, std::vector<RunRecord> records) {
    std::sort(records.begin(), records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_run_csv: cannot open " + path);
    out << "algorithm,seed,env_steps,avg_return\n";
    for (const auto& rec : records)
        for (const auto& [steps, ret] : rec.points)
            out << rec.algorithm << ',' << rec.seed << ',' << steps << ','
                << detail::format_g(ret) << '\n';
}

inline std::vector<RunRecord> read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_run_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "algorithm,seed,env_steps,avg_return")
        throw std::runtime_error("read_run_csv: bad header in " + path);
    std::map<std::pair<std::string, std::uint64_t>, RunRecord> by_run;
    std::vector<std::pair<std::string, std::uint64_t>> order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string algo, seed_s, steps_s, ret_s;
        if (!std::getline(ss, algo, ',') || !std::getline(ss, seed_s, ',') ||
            !std::getline(ss, steps_s, ',') || !std::getline(ss, ret_s))
            throw std::runtime_error("read_run_csv: bad row in " + path + ": " + line);
        const auto key = std::make_pair(algo, static_cast<std::uint64_t>(std::stoull(seed_s)));
        auto it = by_run.find(key);
        if (it == by_run.end()) {
            RunRecord rec;
            rec.algorithm = algo;
            rec.seed = key.second;
            it = by_run.emplace(key, std::move(rec)).first;
            order.push_back(key);
        }
        it->second.points.emplace_back(std::stol(steps_s), std::stod(ret_s));
    }
    std::vector<RunRecord> out;
    out.reserve(order.size());
    for (const auto& key : order) out.push_back(std::move(by_run[key]));
    return out;
}

namespace detail {

inline std::uint64_t run_stream_seed(std::uint64_t seed, const std::string& algorithm,
                                     const char* role) {
    return mix64(mix64(seed) ^ mix64(fnv1a(algorithm)) ^ fnv1a(role));
}

struct RunPlan {
    std::string name;          // CSV/legend name
    std::string kind;          // dfa | ppo | rm-ppo | dfa-offpolicy | sac
    double dfa_alpha = 0.0;    // for dfa runs
    long rm_pretrain_steps = 0;  // for rm-ppo runs
};

inline std::vector<RunPlan> expand_algorithms(const ExperimentConfig& cfg) {
    std::vector<RunPlan> plans;
    for (const auto& a : cfg.algorithms) {
        if (a == "dfa") {
            plans.push_back({"dfa", "dfa", cfg.dfa.alpha, 0});
        } else if (a == "alpha-sweep") {
            for (double alpha : cfg.alpha_sweep)
                plans.push_back({"dfa-alpha-" + format_g(alpha), "dfa", alpha, 0});
        } else if (a == "oracle-ppo") {
            plans.push_back({"oracle-ppo", "ppo", 0, 0});
        } else if (a == "rm1-ppo") {
            plans.push_back({"rm1-ppo", "rm-ppo", 0, cfg.rm1_pretrain_steps});
        } else if (a == "rm2-ppo") {
            plans.push_back({"rm2-ppo", "rm-ppo", 0, cfg.rm2_pretrain_steps});
        } else if (a == "dfa-offpolicy") {
            plans.push_back({"dfa-offpolicy", "dfa-offpolicy", cfg.dfa.alpha, 0});
        } else if (a == "sac") {
            plans.push_back({"sac", "sac", 0, 0});
        } else {
            throw ConfigError("config: unknown algorithm '" + a + "'");
        }
    }
    return plans;
}

}  // namespace detail

/// One (algorithm, seed) cell under the shared step budget. All algorithms
/// consume environment steps through rollouts; reward-model pretraining
/// pairs bill 2*H steps each against the same budget.
inline RunRecord run_cell(const TabularMdp& mdp, const ExperimentConfig& cfg,
                          const detail::RunPlan& plan, std::uint64_t seed) {
    using detail::run_stream_seed;
    const int H = mdp.horizon;
    Rng train_rng(run_stream_seed(seed, plan.name, "train"));
    EvalSettings eval{cfg.eval_interval, cfg.eval_episodes,
                      detail::mix64(detail::mix64(seed) ^ detail::fnv1a("eval"))};

    if (plan.kind == "dfa") {
        DfaConfig dc = cfg.dfa;
        dc.alpha = plan.dfa_alpha;
        dc.iterations = cfg.env_step_budget / (2L * dc.pairs_per_iter * H);
        AnnotatorPanel panel(cfg.panel_size, cfg.panel_beta,
                             Rng(run_stream_seed(seed, plan.name, "panel")));
        auto [policy, rec] = dfa_train_onpolicy(mdp, panel, dc, train_rng, eval, plan.name, seed);
        return rec;
    }
    if (plan.kind == "ppo") {
        PpoConfig pc = cfg.ppo;
        pc.iterations = cfg.env_step_budget / (static_cast<long>(pc.rollouts_per_iter) * H);
        auto [policy, rec] = ppo_train(mdp, nullptr, pc, train_rng, eval, plan.name, seed);
        return rec;
    }
    if (plan.kind == "rm-ppo") {
        // Offline pretraining phase: uniform-policy trajectory pairs labeled
        // by the panel, billed against the budget before PPO starts.
        const long n_pairs = plan.rm_pretrain_steps / (2L * H);
        AnnotatorPanel panel(cfg.panel_size, cfg.panel_beta,
                             Rng(run_stream_seed(seed, plan.name, "panel")));
        const LogitPolicy uniform = LogitPolicy::zeros(mdp.n_states, mdp.n_actions);
        EvalRecorder recorder(plan.name, seed, eval);
        long steps = 0;
        recorder.maybe_record(mdp, uniform, steps);
        std::vector<TrajPrefPair> pairs;
        pairs.reserve(n_pairs);
        for (long k = 0; k < n_pairs; ++k) {
            Trajectory a = rollout(mdp, uniform, train_rng);
            Trajectory b = rollout(mdp, uniform, train_rng);
            steps += 2L * H;
            pairs.push_back(panel.annotate_trajectories(a, b, 1.0));
            recorder.maybe_record(mdp, uniform, steps);
        }
        const auto fit = fit_reward_model(pairs, 1.0, cfg.rm_learning_rate, cfg.rm_epochs,
                                          OptimizerKind::Adam, mdp.n_states, mdp.n_actions);
        // RM+PPO consumes the remaining budget in rm_ppo_iters large-batch
        // updates (many fewer policy updates than the oracle run).
        PpoConfig pc = cfg.ppo;
        const long remaining = std::max(0L, cfg.env_step_budget - steps);
        pc.iterations = std::min(cfg.rm_ppo_iters, remaining / H);
        pc.rollouts_per_iter =
            pc.iterations > 0
                ? std::max(1, static_cast<int>(remaining / (pc.iterations * H)))
                : 1;
        auto [policy, rec] =
            ppo_train(mdp, &fit.model, pc, train_rng, eval, plan.name, seed, steps);
        // merge the pretraining segment with the PPO segment
        RunRecord merged = std::move(recorder).take();
        merged.points.insert(merged.points.end(), rec.points.begin(), rec.points.end());
        return merged;
    }
    if (plan.kind == "dfa-offpolicy") {
        OffPolicyConfig oc = cfg.offpolicy;
        oc.dfa = cfg.dfa;
        oc.dfa.alpha = plan.dfa_alpha;
        oc.iterations = cfg.env_step_budget;
        if (mdp.cell_reward) oc.state_embedding = grid_embedding(cfg.grid.side);
        auto [policy, rec] = dfa_train_offpolicy(mdp, oc, train_rng, eval, plan.name, seed);
        return rec;
    }
    if (plan.kind == "sac") {
        OffPolicyConfig oc = cfg.offpolicy;
        oc.iterations = cfg.env_step_budget;
        if (mdp.cell_reward) oc.state_embedding = grid_embedding(cfg.grid.side);
        auto [policy, rec] = sac_tabular_train(mdp, oc, train_rng, eval, plan.name, seed);
        return rec;
    }
    throw ConfigError("run_cell: unhandled algorithm kind " + plan.kind);
}

/// Runs every selected algorithm for every seed on one shared GridWorld and
/// writes one CSV per algorithm into cfg.out_dir. Deterministic given the
/// config: identical configs produce byte-identical files.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto plans = detail::expand_algorithms(cfg);
    const TabularMdp mdp = build_gridworld(cfg.grid);
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<RunRecord> all;
    for (const auto& plan : plans) {
        std::vector<RunRecord> records;
        records.reserve(cfg.seeds.size());
        for (const auto seed : cfg.seeds) records.push_back(run_cell(mdp, cfg, plan, seed));
        write_run_csv(cfg.out_dir + "/" + plan.name + ".csv", records);
        for (auto& r : records) all.push_back(std::move(r));
    }
    return all;
}

}  // namespace dfa
