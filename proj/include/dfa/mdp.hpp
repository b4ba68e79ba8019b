#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dfa/policy.hpp"
#include "dfa/rng.hpp"

namespace dfa {

/// Finite MDP with an explicit transition tensor and reward table.
/// `cell_reward`, when present, marks a GridWorld-style environment whose
/// realized per-step reward is the destination cell's reward; `reward(s,a)`
/// then stores the expectation over next states, which is what the planners
/// and PPO training lookups consume.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;    // (s, a, s') row-major
    std::vector<double> reward;        // (s, a)
    double gamma = 1.0;                // in (0, 1]
    int horizon = 1;
    std::vector<double> initial_dist;  // over states
    std::optional<std::vector<double>> cell_reward;  // per-state realized reward

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p_ref(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
    double& r_ref(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    std::span<const double> transition_row(int s, int a) const {
        return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }

    /// Validates invariants and builds the sparse sampling cache. Call after
    /// filling the tensors; every constructor path below does.
    void finalize() {
        if (n_states <= 0 || n_actions <= 0)
            throw std::invalid_argument("TabularMdp: state/action counts must be positive");
        if (gamma <= 0.0 || gamma > 1.0)
            throw std::invalid_argument("TabularMdp: gamma must be in (0, 1]");
        if (horizon <= 0) throw std::invalid_argument("TabularMdp: horizon must be positive");
        if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
            reward.size() != static_cast<std::size_t>(n_states) * n_actions ||
            initial_dist.size() != static_cast<std::size_t>(n_states))
            throw std::invalid_argument("TabularMdp: tensor shape mismatch");
        for (double r_sa : reward)
            if (!std::isfinite(r_sa)) throw std::invalid_argument("TabularMdp: non-finite reward");
        double p0 = 0.0;
        for (double p : initial_dist) {
            if (p < 0.0) throw std::invalid_argument("TabularMdp: negative initial probability");
            p0 += p;
        }
        if (std::abs(p0 - 1.0) > 1e-12)
            throw std::invalid_argument("TabularMdp: initial_dist must sum to 1");
        next_cdf_.assign(static_cast<std::size_t>(n_states) * n_actions, {});
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) {
                double sum = 0.0;
                auto& cdf = next_cdf_[static_cast<std::size_t>(s) * n_actions + a];
                for (int s2 = 0; s2 < n_states; ++s2) {
                    const double pr = p(s, a, s2);
                    if (pr < 0.0)
                        throw std::invalid_argument("TabularMdp: negative transition probability");
                    if (pr > 0.0) {
                        sum += pr;
                        cdf.emplace_back(s2, sum);
                    }
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("TabularMdp: transition row must sum to 1");
            }
        initial_cdf_.clear();
        double cum = 0.0;
        for (int s = 0; s < n_states; ++s)
            if (initial_dist[s] > 0.0) {
                cum += initial_dist[s];
                initial_cdf_.emplace_back(s, cum);
            }
    }

    int sample_initial(Rng& rng) const { return sample_cdf(initial_cdf_, rng); }
    int sample_next(int s, int a, Rng& rng) const {
        return sample_cdf(next_cdf_[static_cast<std::size_t>(s) * n_actions + a], rng);
    }

  private:
    static int sample_cdf(const std::vector<std::pair<int, double>>& cdf, Rng& rng) {
        const double u = rng.uniform01();
        for (const auto& [idx, cum] : cdf)
            if (u < cum) return idx;
        return cdf.back().first;
    }

    std::vector<std::vector<std::pair<int, double>>> next_cdf_;
    std::vector<std::pair<int, double>> initial_cdf_;
};

/// One episode: H (state, action) pairs plus the realized reward per step.
struct Trajectory {
    std::vector<std::pair<int, int>> steps;
    std::vector<double> rewards;

    int length() const { return static_cast<int>(steps.size()); }
};

struct GridWorldSpec {
    int side = 5;
    double reverse_prob = 0.4;
    double reward_coin_prob = 0.5;
    int horizon = 20;
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (side < 2) throw std::invalid_argument("GridWorldSpec: side must be >= 2");
        if (reverse_prob < 0.0 || reverse_prob > 1.0)
            throw std::invalid_argument("GridWorldSpec: reverse_prob must be in [0, 1]");
        if (reward_coin_prob < 0.0 || reward_coin_prob > 1.0)
            throw std::invalid_argument("GridWorldSpec: reward_coin_prob must be in [0, 1]");
        if (horizon < 1) throw std::invalid_argument("GridWorldSpec: horizon must be positive");
    }
};

/// Stochastic GridWorld. side^2 cells; 4 actions (up, down, left, right);
/// a chosen action is replaced by its spatial opposite with probability
/// reverse_prob; moves off the grid leave the agent in place. Each cell
/// holds a standard-normal reward with probability reward_coin_prob
/// (0 otherwise), paid every time the cell is entered. The agent starts at
/// the exact center (floor(side/2) in both coordinates). gamma = 1.
inline TabularMdp build_gridworld(const GridWorldSpec& spec) {
    spec.validate();
    const int side = spec.side;
    const int n = side * side;
    TabularMdp mdp;
    mdp.n_states = n;
    mdp.n_actions = 4;
    mdp.gamma = 1.0;
    mdp.horizon = spec.horizon;
    mdp.transition.assign(static_cast<std::size_t>(n) * 4 * n, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(n) * 4, 0.0);
    mdp.initial_dist.assign(n, 0.0);

    Rng rng(spec.rng_seed);
    std::vector<double> cell(n, 0.0);
    for (int i = 0; i < n; ++i)
        if (rng.bernoulli(spec.reward_coin_prob)) cell[i] = rng.normal();

    // actions: 0=up, 1=down, 2=left, 3=right; reversal maps to the opposite
    const int drow[4] = {-1, 1, 0, 0};
    const int dcol[4] = {0, 0, -1, 1};
    const int opposite[4] = {1, 0, 3, 2};
    auto move = [&](int s, int dir) {
        const int row = s / side, col = s % side;
        const int nr = row + drow[dir], nc = col + dcol[dir];
        if (nr < 0 || nr >= side || nc < 0 || nc >= side) return s;
        return nr * side + nc;
    };

    for (int s = 0; s < n; ++s)
        for (int a = 0; a < 4; ++a) {
            mdp.p_ref(s, a, move(s, a)) += 1.0 - spec.reverse_prob;
            mdp.p_ref(s, a, move(s, opposite[a])) += spec.reverse_prob;
            double exp_r = 0.0;
            for (int s2 = 0; s2 < n; ++s2) exp_r += mdp.p(s, a, s2) * cell[s2];
            mdp.r_ref(s, a) = exp_r;
        }

    const int center = (side / 2) * side + (side / 2);
    mdp.initial_dist[center] = 1.0;
    mdp.cell_reward = std::move(cell);
    mdp.finalize();
    return mdp;
}

/// (row, col) coordinates per state, the embedding the replay buffer's
/// nearest-state lookup uses for GridWorld.
inline std::vector<std::vector<double>> grid_embedding(int side) {
    std::vector<std::vector<double>> emb(static_cast<std::size_t>(side) * side);
    for (int s = 0; s < side * side; ++s)
        emb[s] = {static_cast<double>(s / side), static_cast<double>(s % side)};
    return emb;
}

/// Samples one episode of mdp.horizon steps. The recorded reward is the
/// destination cell's realized reward when the MDP carries cell rewards,
/// and r(s, a) otherwise. Deterministic given the rng state.
inline Trajectory rollout(const TabularMdp& mdp, const LogitPolicy& policy, Rng& rng) {
    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
        throw std::invalid_argument("rollout: policy/mdp dimension mismatch");
    Trajectory traj;
    traj.steps.reserve(mdp.horizon);
    traj.rewards.reserve(mdp.horizon);
    int s = mdp.sample_initial(rng);
    for (int t = 0; t < mdp.horizon; ++t) {
        const auto probs = policy.probs(t, s);
        const int a = rng.categorical(probs);
        const int s2 = mdp.sample_next(s, a, rng);
        traj.steps.emplace_back(s, a);
        traj.rewards.push_back(mdp.cell_reward ? (*mdp.cell_reward)[s2] : mdp.r(s, a));
        s = s2;
    }
    return traj;
}

/// Discounted return of the realized rewards.
inline double trajectory_return(const Trajectory& traj, double gamma) {
    if (traj.steps.empty()) throw std::invalid_argument("trajectory_return: empty trajectory");
    double g = 0.0, w = 1.0;
    for (double r : traj.rewards) {
        g += w * r;
        w *= gamma;
    }
    return g;
}

}  // namespace dfa
