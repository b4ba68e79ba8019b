#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfa/mdp.hpp"
#include "dfa/policy.hpp"
#include "dfa/rng.hpp"

namespace dfa {

/// Learning curve of one (algorithm, seed) run: average true return sampled
/// at increasing environment-step counts.
struct RunRecord {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<std::pair<long, double>> points;  // (env_steps, avg_return)
};

/// Mean true cumulative reward over eval_episodes stochastic rollouts.
/// The episodes come from a dedicated stream seeded by eval_seed, so
/// evaluation never perturbs training randomness and repeated calls with the
/// same seed reproduce the same episodes.
inline double evaluate_policy(const TabularMdp& mdp, const LogitPolicy& policy, int eval_episodes,
                              std::uint64_t eval_seed) {
    if (eval_episodes < 1)
        throw std::invalid_argument("evaluate_policy: eval_episodes must be >= 1");
    Rng rng(eval_seed);
    double total = 0.0;
    for (int e = 0; e < eval_episodes; ++e)
        total += trajectory_return(rollout(mdp, policy, rng), 1.0);
    return total / eval_episodes;
}

struct EvalSettings {
    long eval_interval = 2000;
    int eval_episodes = 100;
    std::uint64_t eval_seed = 0;
};

/// Appends an evaluation point whenever the cumulative step count crosses the
/// next multiple of eval_interval (several marks can be emitted at once when
/// a phase consumes a large block of steps, e.g. reward-model pretraining).
class EvalRecorder {
  public:
    EvalRecorder(std::string algorithm, std::uint64_t seed, EvalSettings settings,
                 long start_mark = 0)
        : settings_(settings), next_mark_(start_mark) {
        record_.algorithm = std::move(algorithm);
        record_.seed = seed;
    }

    void maybe_record(const TabularMdp& mdp, const LogitPolicy& policy, long env_steps) {
        while (env_steps >= next_mark_) {
            record_.points.emplace_back(
                next_mark_, evaluate_policy(mdp, policy, settings_.eval_episodes,
                                            settings_.eval_seed));
            next_mark_ += settings_.eval_interval;
        }
    }

    RunRecord take() && { return std::move(record_); }
    const RunRecord& record() const { return record_; }

  private:
    EvalSettings settings_;
    RunRecord record_;
    long next_mark_ = 0;
};

}  // namespace dfa
