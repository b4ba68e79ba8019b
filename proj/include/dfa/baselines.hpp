#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfa/evaluation.hpp"
#include "dfa/math.hpp"
#include "dfa/mdp.hpp"
#include "dfa/preference.hpp"

namespace dfa {

/// Tabular reward model fitted from trajectory comparisons.
struct RewardModel {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> r_hat;

    static RewardModel zeros(int n_states, int n_actions) {
        RewardModel m;
        m.n_states = n_states;
        m.n_actions = n_actions;
        m.r_hat.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        return m;
    }

    double r(int s, int a) const { return r_hat[static_cast<std::size_t>(s) * n_actions + a]; }
    double& r_ref(int s, int a) { return r_hat[static_cast<std::size_t>(s) * n_actions + a]; }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("RewardModel::save: cannot open " + path);
        char buf[64];
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g\n", s, a, r(s, a));
                out << buf;
            }
    }
};

/// Discounted model return along a trajectory.
inline double model_return(const RewardModel& model, const Trajectory& traj, double gamma) {
    double g = 0.0, w = 1.0;
    for (const auto& [s, a] : traj.steps) {
        g += w * model.r(s, a);
        w *= gamma;
    }
    return g;
}

inline double reward_model_loss(const RewardModel& model, std::span<const TrajPrefPair> pairs,
                                double gamma) {
    double total = 0.0;
    for (const auto& p : pairs)
        total += -log_sigmoid(model_return(model, p.preferred, gamma) -
                              model_return(model, p.rejected, gamma));
    return total / static_cast<double>(pairs.size());
}

struct RmFitResult {
    RewardModel model;
    double final_loss = 0.0;
};

/// Bradley-Terry maximum likelihood over the tabular reward: full-batch
/// first-order minimization of -mean log sigma(R(tau+) - R(tau-)) for the
/// given number of epochs.
inline RmFitResult fit_reward_model(std::span<const TrajPrefPair> pairs, double gamma,
                                    double learning_rate, int epochs,
                                    OptimizerKind optimizer = OptimizerKind::Adam,
                                    int n_states = 0, int n_actions = 0) {
    if (pairs.empty()) throw std::invalid_argument("fit_reward_model: empty dataset");
    if (n_states == 0 || n_actions == 0) {
        for (const auto& p : pairs)
            for (const auto* t : {&p.preferred, &p.rejected})
                for (const auto& [s, a] : t->steps) {
                    n_states = std::max(n_states, s + 1);
                    n_actions = std::max(n_actions, a + 1);
                }
    }
    RewardModel model = RewardModel::zeros(n_states, n_actions);
    Optimizer opt(optimizer, learning_rate);
    std::vector<double> grad(model.r_hat.size());
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (const auto& p : pairs) {
            const double delta = model_return(model, p.preferred, gamma) -
                                 model_return(model, p.rejected, gamma);
            const double coeff = -sigmoid(-delta) * inv_n;  // d(-log sigma)/ddelta
            auto add = [&](const Trajectory& t, double sign) {
                double w = 1.0;
                for (const auto& [s, a] : t.steps) {
                    grad[static_cast<std::size_t>(s) * n_actions + a] += sign * coeff * w;
                    w *= gamma;
                }
            };
            add(p.preferred, +1.0);
            add(p.rejected, -1.0);
        }
        opt.step(model.r_hat, grad);
    }
    const double final_loss = reward_model_loss(model, pairs, gamma);
    return {std::move(model), final_loss};
}

struct PpoConfig {
    double kl_coeff = 0.1;
    double gae_lambda = 0.95;
    double gamma = 1.0;
    double learning_rate = 3e-2;  // initial trial step of the line search
    long iterations = 1000;
    int rollouts_per_iter = 2;
    int inner_steps = 10;    // line-searched gradient steps per collected batch
    double value_lr = 0.25;  // per-iteration regression step toward the batch MC returns

    void validate() const {
        if (kl_coeff < 0.0 || gae_lambda < 0.0 || gae_lambda > 1.0 || gamma <= 0.0 ||
            gamma > 1.0 || learning_rate <= 0.0 || iterations < 0 || rollouts_per_iter < 1 ||
            inner_steps < 1 || value_lr <= 0.0 || value_lr > 1.0)
            throw std::invalid_argument("PpoConfig: field out of range");
    }
};

/// Generalized advantage estimates for one finite trajectory. values holds
/// V(s_0..s_{H-1}); the value past the horizon is 0 (episode boundary).
/// With gae_lambda = 1 and gamma = 1 this reduces exactly to
/// return-to-go minus baseline.
inline std::vector<double> compute_gae(std::span<const double> rewards,
                                       std::span<const double> values, double gamma,
                                       double gae_lambda) {
    const int H = static_cast<int>(rewards.size());
    std::vector<double> adv(H, 0.0);
    double running = 0.0;
    for (int t = H - 1; t >= 0; --t) {
        const double v_next = t + 1 < H ? values[t + 1] : 0.0;
        const double delta = rewards[t] + gamma * v_next - values[t];
        running = delta + gamma * gae_lambda * running;
        adv[t] = running;
    }
    return adv;
}

/// KL-penalized policy-gradient training. Per iteration: collect rollouts,
/// refit the tabular value baseline by Monte-Carlo regression on observed
/// returns-to-go, compute GAE advantages, and minimize
///   -(1/T) sum_t ratio_t * A_t + kl_coeff * (1/T) sum_t KL(pi_new(.|s_t) || pi_old(.|s_t))
/// over the full batch with a few backtracking gradient steps. The line
/// search is what makes the penalty bind: a huge kl_coeff forces tiny
/// steps, so the per-iteration policy change shrinks accordingly.
///
/// The training reward is a per-(s,a) table lookup: the true MDP reward for
/// the oracle run, or the fitted model for RM+PPO — so a perfect model
/// reproduces the oracle run exactly. Evaluation always uses the true
/// realized returns.
inline std::pair<LogitPolicy, RunRecord> ppo_train(const TabularMdp& mdp,
                                                   const RewardModel* reward_model,
                                                   const PpoConfig& config, Rng& rng,
                                                   const EvalSettings& eval,
                                                   const std::string& run_name = "ppo",
                                                   std::uint64_t run_seed = 0,
                                                   long initial_steps = 0) {
    config.validate();
    const int S = mdp.n_states, A = mdp.n_actions;
    LogitPolicy policy = LogitPolicy::zeros(S, A);
    // When resuming after a pretraining phase, the caller's recorder already
    // emitted every mark up to initial_steps; continue from the next one.
    const long start_mark =
        initial_steps == 0 ? 0 : (initial_steps / eval.eval_interval + 1) * eval.eval_interval;
    EvalRecorder recorder(run_name, run_seed, eval, start_mark);
    long steps = initial_steps;
    recorder.maybe_record(mdp, policy, steps);

    std::vector<double> value(S, 0.0);  // MC-fitted baseline, kept for unvisited states
    std::vector<double> mc_sum(S), rewards(mdp.horizon), traj_values(mdp.horizon);
    std::vector<int> mc_count(S);
    // Per-state sufficient statistics of the batch.
    std::vector<double> adv_sum(static_cast<std::size_t>(S) * A);  // sum of A_t per (s,a)
    std::vector<int> visits(S);
    std::vector<int> visited;
    auto train_reward = [&](int s, int a) {
        return reward_model ? reward_model->r(s, a) : mdp.r(s, a);
    };

    for (long it = 0; it < config.iterations; ++it) {
        std::vector<Trajectory> batch;
        batch.reserve(config.rollouts_per_iter);
        for (int k = 0; k < config.rollouts_per_iter; ++k) {
            batch.push_back(rollout(mdp, policy, rng));
            steps += mdp.horizon;
        }
        // Monte-Carlo value regression on this batch's returns-to-go.
        std::fill(mc_sum.begin(), mc_sum.end(), 0.0);
        std::fill(mc_count.begin(), mc_count.end(), 0);
        for (const auto& traj : batch) {
            double g = 0.0;
            for (int t = mdp.horizon - 1; t >= 0; --t) {
                const auto [s, a] = traj.steps[t];
                g = train_reward(s, a) + config.gamma * g;
                mc_sum[s] += g;
                ++mc_count[s];
            }
        }
        for (int s = 0; s < S; ++s)
            if (mc_count[s] > 0)
                value[s] += config.value_lr * (mc_sum[s] / mc_count[s] - value[s]);

        std::fill(adv_sum.begin(), adv_sum.end(), 0.0);
        std::fill(visits.begin(), visits.end(), 0);
        visited.clear();
        for (const auto& traj : batch) {
            for (int t = 0; t < mdp.horizon; ++t) {
                const auto [s, a] = traj.steps[t];
                rewards[t] = train_reward(s, a);
                traj_values[t] = value[s];
            }
            const auto adv = compute_gae(rewards, traj_values, config.gamma, config.gae_lambda);
            for (int t = 0; t < mdp.horizon; ++t) {
                const auto [s, a] = traj.steps[t];
                adv_sum[static_cast<std::size_t>(s) * A + a] += adv[t];
                if (visits[s]++ == 0) visited.push_back(s);
            }
        }
        const double inv_t = 1.0 / (static_cast<double>(batch.size()) * mdp.horizon);

        // Penalized objective and gradient, grouped by visited state.
        const LogitPolicy old_policy = policy;
        std::vector<std::vector<double>> old_probs(visited.size());
        for (std::size_t i = 0; i < visited.size(); ++i)
            old_probs[i] = old_policy.probs(0, visited[i]);
        auto objective = [&](const LogitPolicy& p) {
            double f = 0.0;
            for (std::size_t i = 0; i < visited.size(); ++i) {
                const int s = visited[i];
                const auto pn = p.probs(0, s);
                const std::size_t base = static_cast<std::size_t>(s) * A;
                double surr = 0.0, kl = 0.0;
                for (int x = 0; x < A; ++x) {
                    surr += adv_sum[base + x] * pn[x] / old_probs[i][x];
                    kl += pn[x] * (std::log(pn[x]) - std::log(old_probs[i][x]));
                }
                f += -surr * inv_t + config.kl_coeff * visits[s] * kl * inv_t;
            }
            return f;
        };
        auto gradient = [&](const LogitPolicy& p, std::vector<double>& g) {
            std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t i = 0; i < visited.size(); ++i) {
                const int s = visited[i];
                const auto pn = p.probs(0, s);
                const std::size_t base = static_cast<std::size_t>(s) * A;
                double surr = 0.0, kl = 0.0;
                for (int x = 0; x < A; ++x) {
                    surr += adv_sum[base + x] * pn[x] / old_probs[i][x];
                    kl += pn[x] * (std::log(pn[x]) - std::log(old_probs[i][x]));
                }
                for (int x = 0; x < A; ++x) {
                    const double dsurr = pn[x] * (adv_sum[base + x] / old_probs[i][x] - surr);
                    const double dkl =
                        pn[x] * (std::log(pn[x]) - std::log(old_probs[i][x]) - kl);
                    g[base + x] = (-dsurr + config.kl_coeff * visits[s] * dkl) * inv_t;
                }
            }
        };

        std::vector<double> grad(policy.logits.size());
        LogitPolicy cand = policy;
        double f_cur = objective(policy);
        for (int k = 0; k < config.inner_steps; ++k) {
            gradient(policy, grad);
            double g2 = 0.0;
            for (std::size_t i = 0; i < grad.size(); ++i) g2 += grad[i] * grad[i];
            if (g2 == 0.0) break;
            double step = config.learning_rate;
            bool accepted = false;
            while (step >= 1e-12) {
                for (std::size_t i = 0; i < policy.logits.size(); ++i)
                    cand.logits[i] = policy.logits[i] - step * grad[i];
                const double f_cand = objective(cand);
                if (f_cand <= f_cur - 1e-4 * step * g2) {
                    policy.logits = cand.logits;
                    f_cur = f_cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        recorder.maybe_record(mdp, policy, steps);
    }
    return {std::move(policy), std::move(recorder).take()};
}

}  // namespace dfa
