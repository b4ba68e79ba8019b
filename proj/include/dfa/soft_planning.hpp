#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dfa/math.hpp"
#include "dfa/mdp.hpp"
#include "dfa/policy.hpp"

namespace dfa {

enum class PlanningMode { Auto, FiniteHorizon, DiscountedFixedPoint };

/// Soft-optimal value tables for entropy coefficient lambda: the log-sum-exp
/// Bellman backup Q(s,a) = r(s,a) + gamma * E[V(s')],
/// V(s) = lambda * lse_a(Q(s,a)/lambda). Finite-horizon mode stores one
/// (state, action) slab per time step (V_H = 0); discounted mode stores a
/// single stationary table.
struct SoftValues {
    PlanningMode mode = PlanningMode::DiscountedFixedPoint;
    int n_states = 0;
    int n_actions = 0;
    int horizon = 1;  // number of q slabs in finite mode, 1 otherwise
    double entropy_coeff = 1.0;
    std::vector<double> q;  // (t, s, a) finite / (s, a) discounted
    std::vector<double> v;  // (t, s) finite / (s) discounted

    double q_at(int t, int s, int a) const {
        return q[(static_cast<std::size_t>(t) * n_states + s) * n_actions + a];
    }
    double v_at(int t, int s) const { return v[static_cast<std::size_t>(t) * n_states + s]; }

    // Stationary accessors (discounted mode; t = 0 slab in finite mode).
    double q_sa(int s, int a) const { return q_at(0, s, a); }
    double v_s(int s) const { return v_at(0, s); }

    std::span<const double> q_row(int t, int s) const {
        return {q.data() + (static_cast<std::size_t>(t) * n_states + s) * n_actions,
                static_cast<std::size_t>(n_actions)};
    }
};

/// Exact entropy-regularized planning. gamma = 1 selects backward induction
/// over mdp.horizon; gamma < 1 selects fixed-point iteration to max-norm
/// tolerance tol (a ConvergenceError carries the residual if max_iter runs
/// out). Pass an explicit mode to override the gamma-based choice.
inline SoftValues soft_value_iteration(const TabularMdp& mdp, double entropy_coeff,
                                       double tol = 1e-10, int max_iter = 100000,
                                       PlanningMode mode = PlanningMode::Auto) {
    if (entropy_coeff <= 0.0)
        throw std::invalid_argument("soft_value_iteration: entropy_coeff must be positive");
    if (tol <= 0.0) throw std::invalid_argument("soft_value_iteration: tol must be positive");
    if (mode == PlanningMode::Auto)
        mode = mdp.gamma < 1.0 ? PlanningMode::DiscountedFixedPoint : PlanningMode::FiniteHorizon;

    const int S = mdp.n_states, A = mdp.n_actions;
    const double lam = entropy_coeff;
    SoftValues out;
    out.mode = mode;
    out.n_states = S;
    out.n_actions = A;
    out.entropy_coeff = lam;

    if (mode == PlanningMode::FiniteHorizon) {
        const int H = mdp.horizon;
        out.horizon = H;
        out.q.assign(static_cast<std::size_t>(H) * S * A, 0.0);
        out.v.assign(static_cast<std::size_t>(H) * S, 0.0);
        std::vector<double> v_next(S, 0.0);  // V_H = 0
        for (int t = H - 1; t >= 0; --t) {
            for (int s = 0; s < S; ++s) {
                for (int a = 0; a < A; ++a) {
                    double ev = 0.0;
                    const auto row = mdp.transition_row(s, a);
                    for (int s2 = 0; s2 < S; ++s2) ev += row[s2] * v_next[s2];
                    out.q[(static_cast<std::size_t>(t) * S + s) * A + a] =
                        mdp.r(s, a) + mdp.gamma * ev;
                }
                std::vector<double> scaled(out.q_row(t, s).begin(), out.q_row(t, s).end());
                for (double& x : scaled) x /= lam;
                out.v[static_cast<std::size_t>(t) * S + s] = lam * logsumexp(scaled);
            }
            for (int s = 0; s < S; ++s) v_next[s] = out.v_at(t, s);
        }
        return out;
    }

    out.horizon = 1;
    out.q.assign(static_cast<std::size_t>(S) * A, 0.0);
    out.v.assign(S, 0.0);
    std::vector<double> q_new(out.q.size(), 0.0);
    std::vector<double> vcur(S, 0.0);
    double delta = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        for (int s = 0; s < S; ++s) {
            std::vector<double> scaled(A);
            for (int a = 0; a < A; ++a) scaled[a] = out.q_sa(s, a) / lam;
            vcur[s] = lam * logsumexp(scaled);
        }
        delta = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double ev = 0.0;
                const auto row = mdp.transition_row(s, a);
                for (int s2 = 0; s2 < S; ++s2) ev += row[s2] * vcur[s2];
                const double qn = mdp.r(s, a) + mdp.gamma * ev;
                delta = std::max(delta, std::abs(qn - out.q_sa(s, a)));
                q_new[static_cast<std::size_t>(s) * A + a] = qn;
            }
        out.q.swap(q_new);
        if (delta < tol) {
            for (int s = 0; s < S; ++s) {
                std::vector<double> scaled(A);
                for (int a = 0; a < A; ++a) scaled[a] = out.q_sa(s, a) / lam;
                out.v[s] = lam * logsumexp(scaled);
            }
            return out;
        }
    }
    throw ConvergenceError("soft_value_iteration: discounted mode did not converge", delta);
}

/// Gibbs policy of the soft values: logits = inv_temp * Q. Finite-horizon
/// values yield a time-indexed policy.
inline LogitPolicy gibbs_policy(const SoftValues& values, double inv_temp) {
    if (inv_temp <= 0.0) throw std::invalid_argument("gibbs_policy: inv_temp must be positive");
    const int steps = values.mode == PlanningMode::FiniteHorizon ? values.horizon : 1;
    LogitPolicy p = LogitPolicy::zeros(values.n_states, values.n_actions, 1.0, steps);
    for (std::size_t i = 0; i < values.q.size(); ++i) p.logits[i] = inv_temp * values.q[i];
    return p;
}

/// Entropy-augmented return of a trajectory under the given policy:
/// sum_t gamma^t (r_t + lambda * H(pi(.|s_t))). With the soft-optimal policy
/// this is the soft-optimal return of the trajectory.
inline double soft_return(const Trajectory& traj, const LogitPolicy& policy, double entropy_coeff,
                          double gamma) {
    double g = 0.0, w = 1.0;
    for (int t = 0; t < traj.length(); ++t) {
        const int s = traj.steps[t].first;
        if (s >= policy.n_states) throw std::invalid_argument("soft_return: state out of range");
        double h = 0.0;
        if (entropy_coeff != 0.0) {
            const auto probs = policy.probs(t, s);
            h = entropy(probs);
        }
        g += w * (traj.rewards[t] + entropy_coeff * h);
        w *= gamma;
    }
    return g;
}

/// Bradley-Terry probability of preferring utility qa over qb at sharpness
/// beta: sigma(beta * (qa - qb)).
inline double bt_prob(double qa, double qb, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("bt_prob: beta must be positive");
    return sigmoid(beta * (qa - qb));
}

/// P*(a > b | s) from the soft-optimal Q table (t = 0 slab in finite mode).
inline double bt_state_prob(const SoftValues& values, int s, int a, int b, double beta) {
    return bt_prob(values.q_sa(s, a), values.q_sa(s, b), beta);
}

/// Trajectory-level Bradley-Terry probability from two returns.
inline double bt_traj_prob(double g_plus, double g_minus, double beta) {
    return bt_prob(g_plus, g_minus, beta);
}

}  // namespace dfa
