#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dfa/dfa.hpp"
#include "dfa/evaluation.hpp"
#include "dfa/math.hpp"
#include "dfa/mdp.hpp"
#include "dfa/preference.hpp"
#include "dfa/soft_planning.hpp"

namespace dfa {

struct ReplayEntry {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool terminal = false;
};

/// Bounded FIFO of transitions with a per-state coordinate embedding for
/// nearest-state retrieval. Logical index 0 is the oldest stored entry.
/// An empty embedding means one-hot coordinates: the nearest distinct state
/// is then any other state at equal distance, resolved by recency.
///
/// Entries are additionally bucketed by state (insertion order preserved),
/// which turns the nearest-entry query into a scan over occupied states
/// instead of the whole ring. The state space is tiny in this setting while
/// buffers hold tens of thousands of transitions, so this is the difference
/// between O(|S|) and O(capacity) per synthesized pair.
class ReplayBuffer {
  public:
    ReplayBuffer(int capacity, std::vector<std::vector<double>> state_embedding = {})
        : capacity_(capacity), embedding_(std::move(state_embedding)) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        entries_.reserve(capacity);
    }

    void push(const ReplayEntry& e) {
        if (static_cast<int>(entries_.size()) < capacity_) {
            entries_.push_back(e);
        } else {
            // evict the globally oldest entry; it is the front of its bucket
            const int old_state = entries_[head_].state;
            auto& old_bucket = buckets_[old_state];
            old_bucket.erase(old_bucket.begin());
            if (old_bucket.empty()) buckets_.erase(old_state);
            entries_[head_] = e;
            head_ = (head_ + 1) % capacity_;
            ++evicted_;
        }
        buckets_[e.state].push_back(next_seq_++);
    }

    int size() const { return static_cast<int>(entries_.size()); }
    int capacity() const { return capacity_; }

    /// Entry by age: index 0 = oldest surviving entry.
    const ReplayEntry& entry(int logical_idx) const {
        return entries_[(head_ + logical_idx) % entries_.size()];
    }

    double distance2(int s1, int s2) const {
        if (embedding_.empty()) return s1 == s2 ? 0.0 : 2.0;  // one-hot distance^2
        const auto& e1 = embedding_[s1];
        const auto& e2 = embedding_[s2];
        double d = 0.0;
        for (std::size_t i = 0; i < e1.size(); ++i) d += (e1[i] - e2[i]) * (e1[i] - e2[i]);
        return d;
    }

    /// Logical index of the entry nearest to state s (Euclidean distance on
    /// the embedding), excluding one entry; distance ties go to the most
    /// recent entry. Returns -1 when no eligible entry exists.
    int nearest_entry(int s, int exclude_logical) const {
        const long exclude_seq =
            exclude_logical >= 0 ? exclude_logical + evicted_ : -1;
        double best_d = 0.0;
        long best_seq = -1;
        for (const auto& [state, bucket] : buckets_) {
            long seq = bucket.back();
            if (seq == exclude_seq) {
                if (bucket.size() < 2) continue;
                seq = bucket[bucket.size() - 2];
            }
            const double d = distance2(s, state);
            if (best_seq < 0 || d < best_d || (d == best_d && seq > best_seq)) {
                best_d = d;
                best_seq = seq;
            }
        }
        return best_seq < 0 ? -1 : static_cast<int>(best_seq - evicted_);
    }

  private:
    int capacity_;
    std::vector<ReplayEntry> entries_;
    int head_ = 0;      // index of the oldest entry once the ring is full
    long next_seq_ = 0;  // total pushes; seq - evicted_ = logical index
    long evicted_ = 0;
    std::vector<std::vector<double>> embedding_;
    std::map<int, std::vector<long>> buckets_;  // state -> ascending entry seqs
};

/// (state, action) of the buffer entry whose state embedding is nearest to
/// state s in Euclidean distance, skipping the query's own entry. Distance
/// ties go to the most recent entry.
inline std::pair<int, int> nearest_state_action(const ReplayBuffer& buffer, int s,
                                                int exclude_entry) {
    if (buffer.size() < 2)
        throw std::invalid_argument("nearest_state_action: need at least 2 entries");
    const int idx = buffer.nearest_entry(s, exclude_entry);
    if (idx < 0) throw std::invalid_argument("nearest_state_action: no eligible entry");
    const auto& e = buffer.entry(idx);
    return {e.state, e.action};
}

/// Tabular soft-Q critic updated by temporal-difference steps toward the
/// log-sum-exp Bellman target.
struct TabularCritic {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q;
    double entropy_coeff = 0.1;
    double learning_rate = 0.1;
    double gamma = 0.99;

    static TabularCritic zeros(int n_states, int n_actions, double entropy_coeff,
                               double learning_rate, double gamma) {
        if (entropy_coeff <= 0.0)
            throw std::invalid_argument("TabularCritic: entropy_coeff must be positive");
        TabularCritic c;
        c.n_states = n_states;
        c.n_actions = n_actions;
        c.entropy_coeff = entropy_coeff;
        c.learning_rate = learning_rate;
        c.gamma = gamma;
        c.q.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        return c;
    }

    double qv(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
    double& qv_ref(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }

    std::span<const double> q_row(int s) const {
        return {q.data() + static_cast<std::size_t>(s) * n_actions,
                static_cast<std::size_t>(n_actions)};
    }
};

/// One TD step toward r + gamma * lambda * lse_a'(q_target(s',a')/lambda)
/// (plain r for terminal transitions). `target_q` selects a frozen target
/// table; by default the critic bootstraps from itself.
inline void soft_q_update(TabularCritic& critic, const ReplayEntry& e,
                          const std::vector<double>* target_q = nullptr) {
    double target = e.reward;
    if (!e.terminal) {
        const double lam = critic.entropy_coeff;
        const std::vector<double>& src = target_q ? *target_q : critic.q;
        std::vector<double> scaled(critic.n_actions);
        for (int a = 0; a < critic.n_actions; ++a)
            scaled[a] = src[static_cast<std::size_t>(e.next_state) * critic.n_actions + a] / lam;
        target += critic.gamma * lam * logsumexp(scaled);
    }
    double& qsa = critic.qv_ref(e.state, e.action);
    qsa += critic.learning_rate * (target - qsa);
}

/// Turns sampled buffer entries into state-wise preference pairs: the stored
/// action competes against the action retrieved from the nearest other
/// entry; the higher critic Q wins. Retrievals that return the stored action
/// itself are discarded, and exact Q ties keep the buffer's own action as
/// the preferred one.
inline std::vector<StatePrefPair> synthesize_batch(const ReplayBuffer& buffer,
                                                   const TabularCritic& critic,
                                                   std::span<const int> batch) {
    if (batch.empty()) throw std::invalid_argument("synthesize_batch: empty batch");
    std::vector<StatePrefPair> out;
    out.reserve(batch.size());
    for (int idx : batch) {
        if (idx < 0 || idx >= buffer.size())
            throw std::invalid_argument("synthesize_batch: batch index out of range");
        const auto& e = buffer.entry(idx);
        const auto [s_near, a_near] = nearest_state_action(buffer, e.state, idx);
        (void)s_near;
        if (a_near == e.action) continue;
        if (critic.qv(e.state, e.action) >= critic.qv(e.state, a_near))
            out.push_back({e.state, e.action, a_near});
        else
            out.push_back({e.state, a_near, e.action});
    }
    return out;
}

/// Soft-label variant: the winner is sampled with probability
/// sigma(beta * (Q(s, a) - Q(s, a'))) instead of taken by argmax, modeling a
/// Bradley-Terry annotator of sharpness beta reading the critic.
inline std::vector<StatePrefPair> synthesize_batch_soft(const ReplayBuffer& buffer,
                                                        const TabularCritic& critic,
                                                        std::span<const int> batch, double beta,
                                                        Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("synthesize_batch_soft: empty batch");
    std::vector<StatePrefPair> out;
    out.reserve(batch.size());
    for (int idx : batch) {
        if (idx < 0 || idx >= buffer.size())
            throw std::invalid_argument("synthesize_batch_soft: batch index out of range");
        const auto& e = buffer.entry(idx);
        const auto [s_near, a_near] = nearest_state_action(buffer, e.state, idx);
        (void)s_near;
        if (a_near == e.action) continue;
        const double p_stored =
            bt_prob(critic.qv(e.state, e.action), critic.qv(e.state, a_near), beta);
        if (rng.bernoulli(p_stored))
            out.push_back({e.state, e.action, a_near});
        else
            out.push_back({e.state, a_near, e.action});
    }
    return out;
}

struct OffPolicyConfig {
    DfaConfig dfa;
    long iterations = 20000;      // one environment step each
    int buffer_capacity = 20000;
    int batch_size = 64;
    int warmup = 128;             // buffer size before updates begin
    double critic_lr = 0.2;
    double entropy_coeff = 0.1;   // critic temperature lambda
    double soft_label_beta = 0.0;  // > 0 samples labels at this sharpness
    std::vector<std::vector<double>> state_embedding;  // empty = one-hot
    // Whether the horizon boundary stops the critic's bootstrap. Unset means
    // gamma-based: episodes at gamma = 1 genuinely end (bootstrapping would
    // diverge), while at gamma < 1 the horizon is a truncation of the
    // discounted problem and the bootstrap continues through it.
    std::optional<bool> horizon_terminal;

    bool effective_horizon_terminal(const TabularMdp& mdp) const {
        return horizon_terminal.value_or(mdp.gamma >= 1.0);
    }
};

namespace detail {
// Shared environment-interaction state for the step-per-iteration loops.
struct EnvCursor {
    int state = 0;
    int t_in_episode = 0;

    void reset(const TabularMdp& mdp, Rng& rng) {
        state = mdp.sample_initial(rng);
        t_in_episode = 0;
    }

    ReplayEntry step(const TabularMdp& mdp, int action, bool horizon_terminal, Rng& rng) {
        const int s2 = mdp.sample_next(state, action, rng);
        ReplayEntry e;
        e.state = state;
        e.action = action;
        e.reward = mdp.cell_reward ? (*mdp.cell_reward)[s2] : mdp.r(state, action);
        e.next_state = s2;
        const bool episode_end = (t_in_episode + 1 >= mdp.horizon);
        e.terminal = episode_end && horizon_terminal;
        if (episode_end) {
            reset(mdp, rng);
        } else {
            state = s2;
            ++t_in_episode;
        }
        return e;
    }
};
}  // namespace detail

/// Off-policy DFA: interact, soft-Q critic updates on sampled minibatches,
/// preference synthesis from the buffer, and policy steps on the state-wise
/// preference loss over the synthetic pairs.
inline std::pair<LogitPolicy, RunRecord> dfa_train_offpolicy(
    const TabularMdp& mdp, const OffPolicyConfig& config, Rng& rng, const EvalSettings& eval,
    const std::string& run_name = "dfa-offpolicy", std::uint64_t run_seed = 0) {
    config.dfa.validate();
    LogitPolicy policy = LogitPolicy::zeros(mdp.n_states, mdp.n_actions, config.dfa.alpha);
    TabularCritic critic = TabularCritic::zeros(mdp.n_states, mdp.n_actions,
                                                config.entropy_coeff, config.critic_lr,
                                                mdp.gamma);
    ReplayBuffer buffer(config.buffer_capacity, config.state_embedding);
    Optimizer opt(config.dfa.optimizer, config.dfa.learning_rate, config.dfa.adam_eps);
    EvalRecorder recorder(run_name, run_seed, eval);
    const bool horizon_terminal = config.effective_horizon_terminal(mdp);
    detail::EnvCursor env;
    env.reset(mdp, rng);
    long steps = 0;
    recorder.maybe_record(mdp, policy, steps);
    std::vector<int> batch(config.batch_size);
    for (long it = 0; it < config.iterations; ++it) {
        const auto probs = policy.probs(0, env.state);
        buffer.push(env.step(mdp, rng.categorical(probs), horizon_terminal, rng));
        ++steps;
        if (buffer.size() >= std::max(2, config.warmup)) {
            for (int k = 0; k < config.batch_size; ++k)
                soft_q_update(critic, buffer.entry(rng.uniform_int(buffer.size())));
            for (int k = 0; k < config.batch_size; ++k) batch[k] = rng.uniform_int(buffer.size());
            const auto pairs =
                config.soft_label_beta > 0.0
                    ? synthesize_batch_soft(buffer, critic, batch, config.soft_label_beta, rng)
                    : synthesize_batch(buffer, critic, batch);
            if (!pairs.empty()) {
                const auto grad = pref_loss_grad(policy, pairs, config.dfa.reweight_pairs);
                opt.step(policy.logits, grad);
            }
        }
        recorder.maybe_record(mdp, policy, steps);
    }
    return {std::move(policy), std::move(recorder).take()};
}

/// Tabular SAC comparator: same interaction and critic updates, with the
/// actor held at the closed-form Gibbs policy of the current critic
/// (inverse temperature 1/lambda).
inline std::pair<LogitPolicy, RunRecord> sac_tabular_train(const TabularMdp& mdp,
                                                           const OffPolicyConfig& config, Rng& rng,
                                                           const EvalSettings& eval,
                                                           const std::string& run_name = "sac",
                                                           std::uint64_t run_seed = 0) {
    TabularCritic critic = TabularCritic::zeros(mdp.n_states, mdp.n_actions,
                                                config.entropy_coeff, config.critic_lr,
                                                mdp.gamma);
    ReplayBuffer buffer(config.buffer_capacity, config.state_embedding);
    EvalRecorder recorder(run_name, run_seed, eval);
    const bool horizon_terminal = config.effective_horizon_terminal(mdp);
    auto gibbs_from_critic = [&] {
        LogitPolicy p = LogitPolicy::zeros(mdp.n_states, mdp.n_actions);
        for (std::size_t i = 0; i < critic.q.size(); ++i)
            p.logits[i] = critic.q[i] / critic.entropy_coeff;
        return p;
    };
    detail::EnvCursor env;
    env.reset(mdp, rng);
    long steps = 0;
    LogitPolicy actor = gibbs_from_critic();
    recorder.maybe_record(mdp, actor, steps);
    for (long it = 0; it < config.iterations; ++it) {
        const auto probs = actor.probs(0, env.state);
        buffer.push(env.step(mdp, rng.categorical(probs), horizon_terminal, rng));
        ++steps;
        if (buffer.size() >= std::max(2, config.warmup)) {
            for (int k = 0; k < config.batch_size; ++k)
                soft_q_update(critic, buffer.entry(rng.uniform_int(buffer.size())));
            actor = gibbs_from_critic();
        }
        recorder.maybe_record(mdp, actor, steps);
    }
    return {std::move(actor), std::move(recorder).take()};
}

}  // namespace dfa
