#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfa/baselines.hpp"
#include "dfa/dfa.hpp"
#include "dfa/mdp.hpp"
#include "dfa/synth_replay.hpp"

namespace dfa {

/// Configuration problems map to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    GridWorldSpec grid;
    std::vector<std::string> algorithms = {"dfa", "rm1-ppo", "rm2-ppo", "oracle-ppo"};
    std::vector<std::uint64_t> seeds = {3, 1, 14, 4, 50};
    long env_step_budget = 4000000;
    long eval_interval = 2000;
    int eval_episodes = 100;
    std::string out_dir = "out";

    int panel_size = 500;
    double panel_beta = 1.0;

    DfaConfig dfa;                                     // iterations derived from the budget
    std::vector<double> alpha_sweep = {1e-8, 1e-3, 1.0};

    PpoConfig ppo;

    long rm1_pretrain_steps = 200000;
    long rm2_pretrain_steps = 400000;
    double rm_learning_rate = 3e-2;
    int rm_epochs = 200;
    // RM+PPO runs far fewer (larger-batch) policy updates than Oracle-PPO
    // under the same step budget; the per-iteration rollout count is derived
    // from the remaining budget.
    long rm_ppo_iters = 1000;

    OffPolicyConfig offpolicy;

    void validate() const {
        grid.validate();
        if (seeds.empty()) throw ConfigError("config: run.seeds must be nonempty");
        if (eval_episodes < 1) throw ConfigError("config: run.eval_episodes must be >= 1");
        if (eval_interval < 1) throw ConfigError("config: run.eval_interval must be >= 1");
        if (env_step_budget < 1) throw ConfigError("config: run.env_step_budget must be >= 1");
        static const std::vector<std::string> known = {
            "dfa", "alpha-sweep", "rm1-ppo", "rm2-ppo", "oracle-ppo", "dfa-offpolicy", "sac"};
        for (const auto& a : algorithms) {
            bool ok = false;
            for (const auto& k : known)
                if (a == k) ok = true;
            if (!ok) throw ConfigError("config: unknown algorithm '" + a + "'");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean value for " + key + ": '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

/// Applies one `key = value` assignment. Unknown keys are a hard error.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
    using namespace detail;
    if (key == "grid.side")
        cfg.grid.side = static_cast<int>(parse_long(key, value));
    else if (key == "grid.horizon")
        cfg.grid.horizon = static_cast<int>(parse_long(key, value));
    else if (key == "grid.reverse_prob")
        cfg.grid.reverse_prob = parse_double(key, value);
    else if (key == "grid.reward_coin_prob")
        cfg.grid.reward_coin_prob = parse_double(key, value);
    else if (key == "grid.seed")
        cfg.grid.rng_seed = static_cast<std::uint64_t>(parse_long(key, value));
    else if (key == "run.algorithms")
        cfg.algorithms = split_list(value);
    else if (key == "run.seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(value))
            cfg.seeds.push_back(static_cast<std::uint64_t>(parse_long(key, s)));
    } else if (key == "run.env_step_budget")
        cfg.env_step_budget = parse_long(key, value);
    else if (key == "run.eval_interval")
        cfg.eval_interval = parse_long(key, value);
    else if (key == "run.eval_episodes")
        cfg.eval_episodes = static_cast<int>(parse_long(key, value));
    else if (key == "run.out_dir")
        cfg.out_dir = value;
    else if (key == "panel.size")
        cfg.panel_size = static_cast<int>(parse_long(key, value));
    else if (key == "panel.beta")
        cfg.panel_beta = parse_double(key, value);
    else if (key == "dfa.alpha")
        cfg.dfa.alpha = parse_double(key, value);
    else if (key == "dfa.learning_rate")
        cfg.dfa.learning_rate = parse_double(key, value);
    else if (key == "dfa.pairs_per_iter")
        cfg.dfa.pairs_per_iter = static_cast<int>(parse_long(key, value));
    else if (key == "dfa.optimizer")
        cfg.dfa.optimizer = optimizer_from_name(value);
    else if (key == "dfa.reweight_pairs")
        cfg.dfa.reweight_pairs = parse_bool(key, value);
    else if (key == "dfa.adam_eps")
        cfg.dfa.adam_eps = parse_double(key, value);
    else if (key == "dfa.alpha_sweep") {
        cfg.alpha_sweep.clear();
        for (const auto& s : split_list(value)) cfg.alpha_sweep.push_back(parse_double(key, s));
    } else if (key == "ppo.kl_coeff")
        cfg.ppo.kl_coeff = parse_double(key, value);
    else if (key == "ppo.gae_lambda")
        cfg.ppo.gae_lambda = parse_double(key, value);
    else if (key == "ppo.gamma")
        cfg.ppo.gamma = parse_double(key, value);
    else if (key == "ppo.learning_rate")
        cfg.ppo.learning_rate = parse_double(key, value);
    else if (key == "ppo.rollouts_per_iter")
        cfg.ppo.rollouts_per_iter = static_cast<int>(parse_long(key, value));
    else if (key == "ppo.inner_steps")
        cfg.ppo.inner_steps = static_cast<int>(parse_long(key, value));
    else if (key == "rm.pretrain_steps_1")
        cfg.rm1_pretrain_steps = parse_long(key, value);
    else if (key == "rm.pretrain_steps_2")
        cfg.rm2_pretrain_steps = parse_long(key, value);
    else if (key == "rm.learning_rate")
        cfg.rm_learning_rate = parse_double(key, value);
    else if (key == "rm.epochs")
        cfg.rm_epochs = static_cast<int>(parse_long(key, value));
    else if (key == "rm.ppo_iters")
        cfg.rm_ppo_iters = parse_long(key, value);
    else if (key == "offpolicy.batch_size")
        cfg.offpolicy.batch_size = static_cast<int>(parse_long(key, value));
    else if (key == "offpolicy.buffer_capacity")
        cfg.offpolicy.buffer_capacity = static_cast<int>(parse_long(key, value));
    else if (key == "offpolicy.warmup")
        cfg.offpolicy.warmup = static_cast<int>(parse_long(key, value));
    else if (key == "offpolicy.critic_lr")
        cfg.offpolicy.critic_lr = parse_double(key, value);
    else if (key == "offpolicy.entropy_coeff")
        cfg.offpolicy.entropy_coeff = parse_double(key, value);
    else if (key == "offpolicy.soft_label_beta")
        cfg.offpolicy.soft_label_beta = parse_double(key, value);
    else
        throw ConfigError("config: unknown key '" + key + "'");
}

inline ExperimentConfig parse_config_text(std::istream& in, const std::string& origin) {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        apply_config_key(cfg, key, value);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config_text(in, path);
}

}  // namespace dfa
