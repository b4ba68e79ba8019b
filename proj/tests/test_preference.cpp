#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "dfa/mdp.hpp"
#include "dfa/preference.hpp"
#include "dfa/soft_planning.hpp"

using namespace dfa;

namespace {

Trajectory const_reward_traj(double reward, int len = 4) {
    Trajectory t;
    for (int i = 0; i < len; ++i) {
        t.steps.emplace_back(0, 0);
        t.rewards.push_back(reward);
    }
    return t;
}

SoftValues values_from_q(std::vector<double> q_row) {
    SoftValues sv;
    sv.mode = PlanningMode::DiscountedFixedPoint;
    sv.n_states = 1;
    sv.n_actions = static_cast<int>(q_row.size());
    sv.entropy_coeff = 1.0;
    sv.q = std::move(q_row);
    sv.v = {logsumexp(sv.q)};
    return sv;
}

}  // namespace

TEST_CASE("panel with decisive gap always prefers the better trajectory") {
    // delta R = 10 per exemplar: vote probability sigma(10), majority of 500
    // fails with probability far below 1e-9; 200 runs must all agree.
    const auto good = const_reward_traj(2.5);  // R = 10
    const auto bad = const_reward_traj(0.0);   // R = 0
    AnnotatorPanel panel(500, 1.0, Rng(1));
    for (int i = 0; i < 200; ++i) {
        const auto pair = panel.annotate_trajectories(good, bad, 1.0);
        CHECK(trajectory_return(pair.preferred, 1.0) == doctest::Approx(10.0));
    }
}

TEST_CASE("single annotator is one bernoulli vote") {
    const auto a = const_reward_traj(0.5);  // R = 2
    const auto b = const_reward_traj(0.0);  // R = 0
    const double p = 1.0 / (1.0 + std::exp(-2.0));
    AnnotatorPanel panel(1, 1.0, Rng(7));
    int wins_a = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto pair = panel.annotate_trajectories(a, b, 1.0);
        if (trajectory_return(pair.preferred, 1.0) == doctest::Approx(2.0)) ++wins_a;
    }
    const double freq = static_cast<double>(wins_a) / n;
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(freq - p) < 4 * se);
}

TEST_CASE("equal-return trajectories are labeled at random") {
    // distinct step sequences with identical returns, so the label outcome is
    // observable: vote probability is exactly sigma(0) = 0.5
    AnnotatorPanel panel(500, 1.0, Rng(3));
    Trajectory c = const_reward_traj(2.0, 2);  // R = 4
    Trajectory d;
    d.steps = {{0, 1}, {0, 1}};
    d.rewards = {1.0, 3.0};  // also R = 4
    int first_preferred = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto pair = panel.annotate_trajectories(c, d, 1.0);
        if (pair.preferred.steps == c.steps) ++first_preferred;
    }
    const double freq = static_cast<double>(first_preferred) / n;
    CHECK(freq > 0.47);
    CHECK(freq < 0.53);
}

TEST_CASE("candidate swap symmetry") {
    Trajectory hi = const_reward_traj(0.3);  // R = 1.2
    Trajectory lo = const_reward_traj(0.1);  // R = 0.4
    const int n = 20000;
    AnnotatorPanel p1(11, 1.0, Rng(100));
    AnnotatorPanel p2(11, 1.0, Rng(200));
    int hi_wins_ab = 0, hi_wins_ba = 0;
    for (int i = 0; i < n; ++i) {
        if (p1.annotate_trajectories(hi, lo, 1.0).preferred.steps == hi.steps) ++hi_wins_ab;
        if (p2.annotate_trajectories(lo, hi, 1.0).preferred.steps == hi.steps) ++hi_wins_ba;
    }
    const double f1 = static_cast<double>(hi_wins_ab) / n;
    const double f2 = static_cast<double>(hi_wins_ba) / n;
    CHECK(std::abs(f1 - f2) < 0.02);
}

TEST_CASE("majority vote sharpens with panel size") {
    Trajectory a = const_reward_traj(0.2, 2);  // R = 0.4
    Trajectory b = const_reward_traj(0.0, 2);  // R = 0, vote prob sigma(0.4) ~ 0.599
    b.steps = {{0, 1}, {0, 1}};                // distinguishable from a
    const int n = 4000;
    std::vector<double> rates;
    for (int m : {1, 11, 501}) {
        AnnotatorPanel panel(m, 1.0, Rng(42 + m));
        int wins = 0;
        for (int i = 0; i < n; ++i)
            if (panel.annotate_trajectories(a, b, 1.0).preferred.steps == a.steps) ++wins;
        rates.push_back(static_cast<double>(wins) / n);
    }
    CHECK(rates[0] < rates[1]);
    CHECK(rates[1] < rates[2]);
    CHECK(rates[2] > 0.99);
}

TEST_CASE("annotate_state follows bt_state_prob") {
    const auto sv = values_from_q({0.0, std::log(3.0)});
    Rng rng(9);
    // beta surrogate for the hard-comparison limit
    for (int i = 0; i < 200; ++i) {
        const auto p = annotate_state(sv, 0, 1, 0, 1e6, rng);
        CHECK(p.preferred == 1);
    }
    // equal Q -> 0.5 within 3 SE
    const auto sv_eq = values_from_q({1.0, 1.0});
    int wins = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        if (annotate_state(sv_eq, 0, 0, 1, 1.0, rng).preferred == 0) ++wins;
    double freq = static_cast<double>(wins) / n;
    CHECK(std::abs(freq - 0.5) < 3 * std::sqrt(0.25 / n));
    // delta Q = ln 3, beta = 1 -> winner rate ~ 0.75
    wins = 0;
    for (int i = 0; i < n; ++i)
        if (annotate_state(sv, 0, 1, 0, 1.0, rng).preferred == 1) ++wins;
    freq = static_cast<double>(wins) / n;
    CHECK(std::abs(freq - 0.75) < 4 * std::sqrt(0.75 * 0.25 / n));
    CHECK_THROWS_AS(annotate_state(sv, 0, 1, 1, 1.0, rng), std::invalid_argument);
}

TEST_CASE("exact preference matrix") {
    const auto sv = values_from_q({0.0, 1.0, 2.0});
    const auto m = exact_pref_matrix(sv, 0, 1.0);
    // matrix + transpose = all ones
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(m[a * 3 + b] + m[b * 3 + a] == doctest::Approx(1.0).epsilon(1e-12));
    for (int a = 0; a < 3; ++a) CHECK(m[a * 3 + a] == doctest::Approx(0.5));
    // entry (2,0) = sigma(2)
    CHECK(m[2 * 3 + 0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
    // constant row -> all 0.5
    const auto flat = exact_pref_matrix(values_from_q({1.3, 1.3, 1.3, 1.3}), 0, 2.0);
    for (double x : flat) CHECK(x == doctest::Approx(0.5));
}

TEST_CASE("dataset round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "dfa_pref_io";
    fs::create_directories(dir);
    std::vector<StatePrefPair> sp = {{0, 1, 2}, {3, 0, 1}};
    const auto spath = (dir / "state.txt").string();
    save_state_prefs(spath, sp);
    const auto sp2 = load_state_prefs(spath);
    REQUIRE(sp2.size() == 2);
    CHECK(sp2[1].state == 3);
    CHECK(sp2[1].preferred == 0);
    CHECK(sp2[1].rejected == 1);

    Trajectory a;
    a.steps = {{0, 1}, {2, 3}};
    a.rewards = {0.0, 0.0};
    Trajectory b;
    b.steps = {{4, 0}, {1, 1}};
    b.rewards = {0.0, 0.0};
    std::vector<TrajPrefPair> tp = {{a, b}, {b, a}};
    const auto ppath = (dir / "pairs.txt").string();
    const auto tpath = (dir / "trajs.txt").string();
    save_traj_prefs(ppath, tpath, tp);
    const auto tp2 = load_traj_prefs(ppath, tpath);
    REQUIRE(tp2.size() == 2);
    CHECK(tp2[0].preferred.steps == a.steps);
    CHECK(tp2[0].rejected.steps == b.steps);
    CHECK(tp2[1].preferred.steps == b.steps);
    fs::remove_all(dir);
}
