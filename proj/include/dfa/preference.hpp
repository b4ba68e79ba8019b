#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfa/mdp.hpp"
#include "dfa/rng.hpp"
#include "dfa/soft_planning.hpp"

namespace dfa {

/// One state-wise comparison: at `state`, `preferred` beat `rejected`.
struct StatePrefPair {
    int state = 0;
    int preferred = 0;
    int rejected = 0;
};

struct TrajPrefPair {
    Trajectory preferred;
    Trajectory rejected;
};

/// Panel of M independent Bradley-Terry annotators; the majority vote is the
/// recorded label, even-split ties are broken by a fair coin.
struct AnnotatorPanel {
    int panel_size = 500;
    double beta = 1.0;
    Rng rng;

    AnnotatorPanel(int panel_size_, double beta_, Rng rng_)
        : panel_size(panel_size_), beta(beta_), rng(rng_) {
        if (panel_size < 1) throw std::invalid_argument("AnnotatorPanel: panel_size must be >= 1");
        if (beta <= 0.0) throw std::invalid_argument("AnnotatorPanel: beta must be positive");
    }

    /// Labels a trajectory pair by majority vote over cumulative returns.
    TrajPrefPair annotate_trajectories(const Trajectory& tau_a, const Trajectory& tau_b,
                                       double gamma = 1.0) {
        if (tau_a.length() != tau_b.length())
            throw std::invalid_argument("annotate_trajectories: horizon mismatch");
        const double p_a = bt_traj_prob(trajectory_return(tau_a, gamma),
                                        trajectory_return(tau_b, gamma), beta);
        int votes_a = 0;
        for (int m = 0; m < panel_size; ++m)
            if (rng.bernoulli(p_a)) ++votes_a;
        bool a_wins;
        if (2 * votes_a == panel_size)
            a_wins = rng.bernoulli(0.5);
        else
            a_wins = 2 * votes_a > panel_size;
        if (a_wins) return {tau_a, tau_b};
        return {tau_b, tau_a};
    }
};

/// Samples one state-wise label with probability bt_state_prob.
inline StatePrefPair annotate_state(const SoftValues& values, int s, int a, int b, double beta,
                                    Rng& rng) {
    if (a == b) throw std::invalid_argument("annotate_state: actions must differ");
    const double p_a = bt_state_prob(values, s, a, b, beta);
    if (rng.bernoulli(p_a)) return {s, a, b};
    return {s, b, a};
}

/// Full |A| x |A| matrix of exact Bradley-Terry probabilities from one
/// Q row; entry (a, b) = sigma(beta * (q[a] - q[b])), diagonal 0.5.
inline std::vector<double> exact_pref_matrix_from_q(std::span<const double> q_row, double beta) {
    const int A = static_cast<int>(q_row.size());
    std::vector<double> m(static_cast<std::size_t>(A) * A);
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b) m[static_cast<std::size_t>(a) * A + b] = bt_prob(q_row[a], q_row[b], beta);
    return m;
}

inline std::vector<double> exact_pref_matrix(const SoftValues& values, int s, double beta) {
    return exact_pref_matrix_from_q(values.q_row(0, s), beta);
}

// ---------------------------------------------------------------------------
// Dataset serialization. State-wise pairs are lines `S <state> <a+> <a->`;
// trajectory pairs are lines `T <id+> <id->` referring to line numbers of an
// adjacent trajectory file holding one whitespace-separated sequence of
// (state, action) pairs per line. Rewards are not part of the exchange
// format; loaded trajectories carry zero rewards.
// ---------------------------------------------------------------------------

inline void save_state_prefs(const std::string& path, std::span<const StatePrefPair> pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_state_prefs: cannot open " + path);
    for (const auto& p : pairs)
        out << "S " << p.state << ' ' << p.preferred << ' ' << p.rejected << '\n';
}

inline std::vector<StatePrefPair> load_state_prefs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_state_prefs: cannot open " + path);
    std::vector<StatePrefPair> pairs;
    std::string tag;
    StatePrefPair p;
    while (in >> tag >> p.state >> p.preferred >> p.rejected) {
        if (tag != "S") throw std::runtime_error("load_state_prefs: bad record tag " + tag);
        pairs.push_back(p);
    }
    return pairs;
}

inline void save_traj_prefs(const std::string& pairs_path, const std::string& trajs_path,
                            std::span<const TrajPrefPair> pairs) {
    std::ofstream tout(trajs_path);
    std::ofstream pout(pairs_path);
    if (!tout || !pout) throw std::runtime_error("save_traj_prefs: cannot open output files");
    auto write_traj = [&](const Trajectory& t) {
        for (std::size_t i = 0; i < t.steps.size(); ++i) {
            if (i) tout << ' ';
            tout << t.steps[i].first << ' ' << t.steps[i].second;
        }
        tout << '\n';
    };
    int next_id = 0;
    for (const auto& pr : pairs) {
        write_traj(pr.preferred);
        write_traj(pr.rejected);
        pout << "T " << next_id << ' ' << next_id + 1 << '\n';
        next_id += 2;
    }
}

inline std::vector<TrajPrefPair> load_traj_prefs(const std::string& pairs_path,
                                                 const std::string& trajs_path) {
    std::ifstream tin(trajs_path);
    if (!tin) throw std::runtime_error("load_traj_prefs: cannot open " + trajs_path);
    std::vector<Trajectory> trajs;
    std::string line;
    while (std::getline(tin, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Trajectory t;
        int s, a;
        while (ss >> s >> a) t.steps.emplace_back(s, a);
        t.rewards.assign(t.steps.size(), 0.0);
        trajs.push_back(std::move(t));
    }
    std::ifstream pin(pairs_path);
    if (!pin) throw std::runtime_error("load_traj_prefs: cannot open " + pairs_path);
    std::vector<TrajPrefPair> pairs;
    std::string tag;
    int ip, ir;
    while (pin >> tag >> ip >> ir) {
        if (tag != "T") throw std::runtime_error("load_traj_prefs: bad record tag " + tag);
        if (ip < 0 || ir < 0 || ip >= static_cast<int>(trajs.size()) ||
            ir >= static_cast<int>(trajs.size()))
            throw std::runtime_error("load_traj_prefs: trajectory id out of range");
        pairs.push_back({trajs[ip], trajs[ir]});
    }
    return pairs;
}

}  // namespace dfa
