#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfa/math.hpp"

namespace dfa {

/// Tabular softmax policy: free logits per (state, action), or per
/// (time-step, state, action) when n_steps > 1 (finite-horizon planning
/// output). Adding a constant to one state's row leaves the induced
/// probabilities unchanged; that gauge direction carries no preference-loss
/// gradient, so free logits need no normalization constraint.
/// `alpha` is the preference temperature used by the losses built on top.
struct LogitPolicy {
    int n_steps = 1;
    int n_states = 0;
    int n_actions = 0;
    double alpha = 1.0;
    std::vector<double> logits;  // n_steps * n_states * n_actions, row-major

    static LogitPolicy zeros(int n_states, int n_actions, double alpha = 1.0, int n_steps = 1) {
        LogitPolicy p;
        p.n_steps = n_steps;
        p.n_states = n_states;
        p.n_actions = n_actions;
        p.alpha = alpha;
        p.logits.assign(static_cast<std::size_t>(n_steps) * n_states * n_actions, 0.0);
        return p;
    }

    bool stationary() const { return n_steps == 1; }

    /// Time index clamped for stationary tables (and for rollouts that run
    /// past the planning horizon of a finite-horizon policy).
    int step_index(int t) const { return n_steps == 1 ? 0 : std::min(t, n_steps - 1); }

    std::size_t offset(int t, int s) const {
        return (static_cast<std::size_t>(step_index(t)) * n_states + s) * n_actions;
    }

    double& logit(int t, int s, int a) { return logits[offset(t, s) + a]; }
    double logit(int t, int s, int a) const { return logits[offset(t, s) + a]; }

    std::span<const double> row(int t, int s) const {
        return {logits.data() + offset(t, s), static_cast<std::size_t>(n_actions)};
    }

    std::vector<double> probs(int t, int s) const { return softmax(row(t, s)); }

    double log_prob(int t, int s, int a) const {
        const auto r = row(t, s);
        return r[a] - logsumexp(r);
    }

    /// Text table `state action logit` (stationary policies only).
    void save(const std::string& path) const {
        if (!stationary())
            throw std::invalid_argument("LogitPolicy::save: only stationary policies serialize");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("LogitPolicy::save: cannot open " + path);
        char buf[64];
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g\n", s, a, logit(0, s, a));
                out << buf;
            }
    }

    static LogitPolicy load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("LogitPolicy::load: cannot open " + path);
        int s = 0, a = 0;
        double v = 0.0;
        int max_s = -1, max_a = -1;
        std::vector<std::tuple<int, int, double>> rows;
        while (in >> s >> a >> v) {
            rows.emplace_back(s, a, v);
            max_s = std::max(max_s, s);
            max_a = std::max(max_a, a);
        }
        if (rows.empty()) throw std::runtime_error("LogitPolicy::load: empty table " + path);
        LogitPolicy p = zeros(max_s + 1, max_a + 1);
        for (auto& [rs, ra, rv] : rows) p.logit(0, rs, ra) = rv;
        return p;
    }
};

}  // namespace dfa
