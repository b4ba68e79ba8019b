#pragma once

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "dfa/evaluation.hpp"
#include "dfa/math.hpp"
#include "dfa/mdp.hpp"
#include "dfa/policy.hpp"
#include "dfa/preference.hpp"
#include "dfa/rng.hpp"

namespace dfa {

// ---------------------------------------------------------------------------
// State-wise preference probability and loss.
// ---------------------------------------------------------------------------

/// P(a+ > a- | s) under the policy: pi(a+|s)^alpha / (pi(a+)^alpha + pi(a-)^alpha),
/// evaluated in log space as sigma(alpha * (log pi(a+|s) - log pi(a-|s))).
inline double pref_prob(const LogitPolicy& policy, int s, int a_plus, int a_minus) {
    if (a_plus == a_minus) throw std::invalid_argument("pref_prob: actions must differ");
    const double gap = policy.log_prob(0, s, a_plus) - policy.log_prob(0, s, a_minus);
    return sigmoid(policy.alpha * gap);
}

namespace detail {
// Inverse-frequency weights over exact (s, a+, a-) triples; with the option
// off every pair weighs 1. Dividing the weighted sum by the weight total
// makes the loss a uniform average over the distinct triples in the batch.
inline std::vector<double> pair_weights(std::span<const StatePrefPair> pairs, bool reweight) {
    std::vector<double> w(pairs.size(), 1.0);
    if (!reweight) return w;
    std::map<std::tuple<int, int, int>, int> freq;
    for (const auto& p : pairs) ++freq[{p.state, p.preferred, p.rejected}];
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        w[k] = 1.0 / freq[{p.state, p.preferred, p.rejected}];
    }
    return w;
}
}  // namespace detail

/// Mean negative log preference probability over a state-wise dataset.
/// With reweight set, each ordered (s, a+, a-) triple is down-weighted by its
/// batch frequency so every distinct triple contributes equally.
inline double pref_loss(const LogitPolicy& policy, std::span<const StatePrefPair> pairs,
                        bool reweight = false) {
    if (pairs.empty()) throw std::invalid_argument("pref_loss: empty dataset");
    const auto w = detail::pair_weights(pairs, reweight);
    double total = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        const double gap = policy.log_prob(0, p.state, p.preferred) -
                           policy.log_prob(0, p.state, p.rejected);
        total += -w[k] * log_sigmoid(policy.alpha * gap);
        wsum += w[k];
    }
    return total / wsum;
}

/// Analytic gradient of pref_loss with respect to every logit of a
/// stationary policy.
inline std::vector<double> pref_loss_grad(const LogitPolicy& policy,
                                          std::span<const StatePrefPair> pairs,
                                          bool reweight = false) {
    if (pairs.empty()) throw std::invalid_argument("pref_loss_grad: empty dataset");
    if (!policy.stationary())
        throw std::invalid_argument("pref_loss_grad: stationary policy required");
    const auto w = detail::pair_weights(pairs, reweight);
    double wsum = 0.0;
    for (double x : w) wsum += x;
    std::vector<double> grad(policy.logits.size(), 0.0);
    const int A = policy.n_actions;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        // log pi(a+|s) - log pi(a-|s) = l(s,a+) - l(s,a-): the lse cancels,
        // so the gap (and its gradient) touch only the two logits involved.
        const double gap = policy.logit(0, p.state, p.preferred) -
                           policy.logit(0, p.state, p.rejected);
        // d(-log sigma(alpha*gap))/dgap = -alpha * sigma(-alpha*gap)
        const double coeff = -policy.alpha * sigmoid(-policy.alpha * gap) * w[k] / wsum;
        const std::size_t base = static_cast<std::size_t>(p.state) * A;
        grad[base + p.preferred] += coeff;
        grad[base + p.rejected] -= coeff;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Population (exact-matrix) loss at a single state: the sampling-free form
// whose unique minimizing softmax is the Gibbs policy. pstar is a row-major
// |A| x |A| matrix of exact Bradley-Terry probabilities.
// ---------------------------------------------------------------------------

namespace detail {
inline void check_pstar(std::span<const double> pstar, int A) {
    if (static_cast<int>(pstar.size()) != A * A)
        throw std::invalid_argument("population loss: pstar must be |A|^2 entries");
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b) {
            const double p = pstar[static_cast<std::size_t>(a) * A + b];
            const double q = pstar[static_cast<std::size_t>(b) * A + a];
            if (!(p > 0.0 && p < 1.0) || std::abs(p + q - 1.0) > 1e-9)
                throw std::invalid_argument("population loss: malformed pstar matrix");
        }
}
}  // namespace detail

/// Exact preference loss under uniform sampling of ordered action pairs:
/// -(1/|A|^2) * sum_{(a,b)} pstar[a,b] * log sigma(alpha*(l_a - l_b)).
/// The diagonal contributes the constant |A| * log2 / (2|A|^2).
inline double population_pref_loss(std::span<const double> logits_row,
                                   std::span<const double> pstar, double alpha) {
    const int A = static_cast<int>(logits_row.size());
    detail::check_pstar(pstar, A);
    double loss = 0.0;
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b)
            loss -= pstar[static_cast<std::size_t>(a) * A + b] *
                    log_sigmoid(alpha * (logits_row[a] - logits_row[b]));
    return loss / (static_cast<double>(A) * A);
}

/// Analytic gradient: dL/dl_k = -(alpha/|A|^2) * sum_{b != k} [pstar_kb - P_kb(l)]
/// where P_kb(l) = sigma(alpha*(l_k - l_b)). Components sum to zero.
inline std::vector<double> population_pref_grad(std::span<const double> logits_row,
                                                std::span<const double> pstar, double alpha) {
    const int A = static_cast<int>(logits_row.size());
    detail::check_pstar(pstar, A);
    std::vector<double> grad(A, 0.0);
    for (int k = 0; k < A; ++k) {
        double acc = 0.0;
        for (int b = 0; b < A; ++b) {
            if (b == k) continue;
            const double model = sigmoid(alpha * (logits_row[k] - logits_row[b]));
            acc += pstar[static_cast<std::size_t>(k) * A + b] - model;
        }
        grad[k] = -alpha * acc / (static_cast<double>(A) * A);
    }
    return grad;
}

/// First-order minimization of the population loss (gradient descent with
/// Armijo backtracking from learning_rate) until the gradient max-norm drops
/// below tol. The minimizing softmax is unique; distinct starts agree on it.
inline std::vector<double> minimize_population_loss(std::span<const double> pstar, double alpha,
                                                    double learning_rate, double tol = 1e-8,
                                                    long max_iter = 200000,
                                                    std::span<const double> init = {}) {
    const int A = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pstar.size()))));
    detail::check_pstar(pstar, A);
    std::vector<double> l(A, 0.0);
    if (!init.empty()) {
        if (static_cast<int>(init.size()) != A)
            throw std::invalid_argument("minimize_population_loss: bad init size");
        l.assign(init.begin(), init.end());
    }
    double loss = population_pref_loss(l, pstar, alpha);
    double residual = 0.0;
    std::vector<double> cand(A);
    // Once the achievable decrease per step drops below double resolution the
    // Armijo test can no longer certify progress; plain steps stay stable
    // because the loss curvature is bounded by alpha^2/(2|A|).
    const double plain_step = std::min(learning_rate, static_cast<double>(A) / (alpha * alpha));
    for (long it = 0; it < max_iter; ++it) {
        const auto grad = population_pref_grad(l, pstar, alpha);
        residual = 0.0;
        double gnorm2 = 0.0;
        for (double g : grad) {
            residual = std::max(residual, std::abs(g));
            gnorm2 += g * g;
        }
        if (residual < tol) return l;
        double step = learning_rate;
        if (0.5 * step * gnorm2 < 1e-14 * (std::abs(loss) + 1e-30)) {
            for (int a = 0; a < A; ++a) l[a] -= plain_step * grad[a];
            continue;
        }
        while (true) {
            for (int a = 0; a < A; ++a) cand[a] = l[a] - step * grad[a];
            const double cand_loss = population_pref_loss(cand, pstar, alpha);
            if (cand_loss <= loss - 0.5 * step * gnorm2 || step < 1e-18) {
                l = cand;
                loss = cand_loss;
                break;
            }
            step *= 0.5;
        }
    }
    throw ConvergenceError("minimize_population_loss: gradient tolerance not reached", residual);
}

// ---------------------------------------------------------------------------
// Trajectory-level preference probability and loss.
// ---------------------------------------------------------------------------

/// Log-likelihood the policy assigns to a trajectory: sum_t log pi(a_t|s_t).
inline double traj_log_likelihood(const LogitPolicy& policy, const Trajectory& traj) {
    double ll = 0.0;
    for (int t = 0; t < traj.length(); ++t)
        ll += policy.log_prob(t, traj.steps[t].first, traj.steps[t].second);
    return ll;
}

/// sigma(alpha * (L(tau+) - L(tau-))), entirely in log space.
inline double traj_pref_prob(const LogitPolicy& policy, const Trajectory& tau_plus,
                             const Trajectory& tau_minus) {
    const double gap = traj_log_likelihood(policy, tau_plus) -
                       traj_log_likelihood(policy, tau_minus);
    return sigmoid(policy.alpha * gap);
}

/// Mean of -log traj_pref_prob over the dataset.
inline double traj_pref_loss(const LogitPolicy& policy, std::span<const TrajPrefPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("traj_pref_loss: empty dataset");
    double total = 0.0;
    for (const auto& p : pairs) {
        const double gap = traj_log_likelihood(policy, p.preferred) -
                           traj_log_likelihood(policy, p.rejected);
        total += -log_sigmoid(policy.alpha * gap);
    }
    return total / static_cast<double>(pairs.size());
}

/// Analytic gradient of traj_pref_loss for a stationary policy.
inline std::vector<double> traj_pref_loss_grad(const LogitPolicy& policy,
                                               std::span<const TrajPrefPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("traj_pref_loss_grad: empty dataset");
    if (!policy.stationary())
        throw std::invalid_argument("traj_pref_loss_grad: stationary policy required");
    const int A = policy.n_actions;
    std::vector<double> grad(policy.logits.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (const auto& p : pairs) {
        const double gap = traj_log_likelihood(policy, p.preferred) -
                           traj_log_likelihood(policy, p.rejected);
        const double coeff = -policy.alpha * sigmoid(-policy.alpha * gap) * inv_n;
        // d log pi(a|s) / d logit(s,x) = 1{x=a} - pi(x|s)
        auto accumulate = [&](const Trajectory& traj, double sign) {
            for (const auto& [s, a] : traj.steps) {
                const auto probs = policy.probs(0, s);
                const std::size_t base = static_cast<std::size_t>(s) * A;
                for (int x = 0; x < A; ++x) grad[base + x] -= sign * coeff * probs[x];
                grad[base + a] += sign * coeff;
            }
        };
        accumulate(p.preferred, +1.0);
        accumulate(p.rejected, -1.0);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// On-policy training: fresh rollout pairs, panel labels, one optimizer step
// per iteration on the trajectory preference loss.
// ---------------------------------------------------------------------------

struct DfaConfig {
    double alpha = 1e-3;
    double learning_rate = 3e-2;
    long iterations = 100000;
    int pairs_per_iter = 1;
    OptimizerKind optimizer = OptimizerKind::Adam;
    // Adam's epsilon sets the gradient scale below which updates shut off.
    // The preference gradient is proportional to alpha, so this knob is what
    // separates "alpha small but alive" (1e-3) from "alpha too small to
    // learn" (1e-8); with the float epsilon at the usual 1e-8 even
    // alpha = 1e-8 gradients pass straight through the normalizer.
    double adam_eps = 1e-5;
    bool reweight_pairs = false;

    void validate() const {
        if (alpha <= 0.0 || learning_rate <= 0.0 || iterations < 0 || pairs_per_iter < 1 ||
            adam_eps <= 0.0)
            throw std::invalid_argument("DfaConfig: positive fields required");
    }
};

inline std::pair<LogitPolicy, RunRecord> dfa_train_onpolicy(const TabularMdp& mdp,
                                                            AnnotatorPanel& panel,
                                                            const DfaConfig& config, Rng& rng,
                                                            const EvalSettings& eval,
                                                            const std::string& run_name = "dfa",
                                                            std::uint64_t run_seed = 0) {
    config.validate();
    LogitPolicy policy = LogitPolicy::zeros(mdp.n_states, mdp.n_actions, config.alpha);
    Optimizer opt(config.optimizer, config.learning_rate, config.adam_eps);
    EvalRecorder recorder(run_name, run_seed, eval);
    long steps = 0;
    recorder.maybe_record(mdp, policy, steps);
    std::vector<TrajPrefPair> pairs;
    for (long it = 0; it < config.iterations; ++it) {
        pairs.clear();
        for (int k = 0; k < config.pairs_per_iter; ++k) {
            Trajectory tau_a = rollout(mdp, policy, rng);
            Trajectory tau_b = rollout(mdp, policy, rng);
            steps += 2L * mdp.horizon;
            pairs.push_back(panel.annotate_trajectories(tau_a, tau_b, 1.0));
        }
        const auto grad = traj_pref_loss_grad(policy, pairs);
        opt.step(policy.logits, grad);
        recorder.maybe_record(mdp, policy, steps);
    }
    return {std::move(policy), std::move(recorder).take()};
}

}  // namespace dfa
