#include <doctest.h>

#include <cmath>
#include <vector>

#include "tokenlab/advantage.hpp"
#include "tokenlab/rng.hpp"
#include "tokenlab/stats.hpp"

using namespace tokenlab;

TEST_CASE("group advantage on a lopsided group") {
    GroupRewards g;
    g.rewards = {3.0, -1.0, -1.0, -1.0};
    auto adv = grpo_group_advantage(g);
    const double rt3 = std::sqrt(3.0);
    CHECK(adv[0] == doctest::Approx(rt3).epsilon(1e-14));
    for (int i = 1; i < 4; ++i) CHECK(adv[i] == doctest::Approx(-1.0 / rt3).epsilon(1e-14));
}

TEST_CASE("group advantages are whitened and scale-free") {
    Rng rng(19);
    for (int trial = 0; trial < 30; ++trial) {
        GroupRewards g;
        int n = rng.uniform_int(2, 12);
        for (int i = 0; i < n; ++i) g.rewards.push_back(rng.uniform(-4, 4));
        auto adv = grpo_group_advantage(g);
        if (stats::pop_std(g.rewards) < 1e-6) continue;
        CHECK(stats::mean(adv) == doctest::Approx(0.0).epsilon(1).scale(1e-12));
        CHECK(stats::pop_std(adv) == doctest::Approx(1.0).epsilon(1e-12));

        GroupRewards shifted;
        for (double r : g.rewards) shifted.rewards.push_back(2.5 * r - 7.0);
        auto adv2 = grpo_group_advantage(shifted);
        for (int i = 0; i < n; ++i) CHECK(adv2[i] == doctest::Approx(adv[i]).epsilon(1e-11));
    }
}

TEST_CASE("degenerate groups contribute nothing") {
    GroupRewards flat;
    flat.rewards = {2.0, 2.0, 2.0};
    for (double a : grpo_group_advantage(flat)) CHECK(a == 0.0);

    GroupRewards barely;
    barely.rewards = {0.0, 1e-9};
    for (double a : grpo_group_advantage(barely)) CHECK(a == 0.0);

    GroupRewards enough;
    enough.rewards = {0.0, 1e-3};
    CHECK(grpo_group_advantage(enough)[1] > 0.0);

    GroupRewards tiny;
    tiny.rewards = {1.0};
    CHECK_THROWS_AS(grpo_group_advantage(tiny), std::invalid_argument);
    GroupRewards inf;
    inf.rewards = {1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(grpo_group_advantage(inf), std::invalid_argument);
}

TEST_CASE("reweighting interpolates between identity and probability scaling") {
    std::vector<double> adv{1.5, -2.0, 0.5, 0.0};
    std::vector<double> probs{0.9, 0.01, 0.4, 0.6};

    auto same = reweight(adv, probs, 0.0);
    for (size_t i = 0; i < adv.size(); ++i) CHECK(same[i] == adv[i]);

    auto scaled = reweight(adv, probs, 1.0);
    for (size_t i = 0; i < adv.size(); ++i) CHECK(scaled[i] == doctest::Approx(probs[i] * adv[i]).epsilon(1e-15));

    auto mid = reweight(adv, probs, 0.3);
    for (size_t i = 0; i < adv.size(); ++i) {
        CHECK(mid[i] == doctest::Approx((0.3 * probs[i] + 0.7) * adv[i]).epsilon(1e-15));
        // same sign, never amplified
        CHECK(mid[i] * adv[i] >= 0.0);
        CHECK(std::fabs(mid[i]) <= std::fabs(adv[i]) + 1e-15);
    }

    // low-probability tokens are damped hardest
    CHECK(std::fabs(mid[1] / adv[1]) < std::fabs(mid[0] / adv[0]));
}

TEST_CASE("reweighting validates its inputs") {
    std::vector<double> adv{1.0};
    std::vector<double> ok{0.5};
    CHECK_THROWS_AS(reweight(adv, ok, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(reweight(adv, ok, 1.1), std::invalid_argument);
    std::vector<double> zero{0.0};
    CHECK_THROWS_AS(reweight(adv, zero, 0.5), std::invalid_argument);
    std::vector<double> big{1.5};
    CHECK_THROWS_AS(reweight(adv, big, 0.5), std::invalid_argument);
    std::vector<double> two{0.5, 0.5};
    CHECK_THROWS_AS(reweight(adv, two, 0.5), std::invalid_argument);
}

TEST_CASE("probability threshold masks partition the batch") {
    std::vector<double> probs{0.05, 0.5, 0.500001, 0.99, 0.2};
    auto m = lopti_masks(probs, 0.5);
    CHECK(m.low == std::vector<uint8_t>{1, 1, 0, 0, 1});  // boundary counts as low
    for (size_t i = 0; i < probs.size(); ++i) CHECK(m.low[i] + m.high[i] == 1);

    CHECK_THROWS_AS(lopti_masks(probs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lopti_masks(probs, 1.0), std::invalid_argument);
}

TEST_CASE("suffix-penalty advantages: hand example") {
    std::vector<double> rewards{1.0, 0.0};
    std::vector<std::vector<double>> k1{{1.0, 1.0}, {1.0, 1.0}};
    auto out = rpp_advantage(rewards, k1, 0.1);
    // raw rows: {0.8, 0.9} and {-0.2, -0.1}
    CHECK(out.mu == doctest::Approx(0.35).epsilon(1e-14));
    const double sd = std::sqrt(0.2525);
    CHECK(out.sigma == doctest::Approx(sd).epsilon(1e-14));
    CHECK_FALSE(out.zeroed);
    REQUIRE(out.per_token.size() == 2);
    CHECK(out.per_token[0][0] == doctest::Approx((0.8 - 0.35) / sd).epsilon(1e-13));
    CHECK(out.per_token[0][1] == doctest::Approx((0.9 - 0.35) / sd).epsilon(1e-13));
    CHECK(out.per_token[1][0] == doctest::Approx((-0.2 - 0.35) / sd).epsilon(1e-13));
    CHECK(out.per_token[1][1] == doctest::Approx((-0.1 - 0.35) / sd).epsilon(1e-13));
}

TEST_CASE("suffix-penalty advantages: structure and edge cases") {
    // distinct ratios, one response: verify the suffix sums directly
    std::vector<double> rewards{2.0};
    std::vector<std::vector<double>> k1{{0.5, 1.5, 1.0}};
    auto out = rpp_advantage(rewards, k1, 0.2);
    std::vector<double> raw{2.0 - 0.2 * 3.0, 2.0 - 0.2 * 2.5, 2.0 - 0.2 * 1.0};
    double mu = stats::mean(raw);
    double sd = stats::pop_std(raw);
    for (int t = 0; t < 3; ++t) CHECK(out.per_token[0][t] == doctest::Approx((raw[t] - mu) / sd).epsilon(1e-12));

    // beta = 0 reduces to whitened broadcast rewards; the whitening runs over
    // tokens, so the longer response weighs more: values {1,1,1,-1} have mean
    // 0.5 and population std sqrt(0.75)
    std::vector<double> r2{1.0, -1.0};
    std::vector<std::vector<double>> ones{{1.0, 1.0, 1.0}, {1.0}};
    auto plain = rpp_advantage(r2, ones, 0.0);
    const double sd2 = std::sqrt(0.75);
    for (double v : plain.per_token[0]) CHECK(v == doctest::Approx(0.5 / sd2).epsilon(1e-12));
    CHECK(plain.per_token[1][0] == doctest::Approx(-1.5 / sd2).epsilon(1e-12));

    // constant raw values zero out
    std::vector<double> same{1.0, 1.0};
    auto z = rpp_advantage(same, ones, 0.0);
    CHECK(z.zeroed);
    for (const auto& row : z.per_token)
        for (double v : row) CHECK(v == 0.0);

    // empty batch passes through
    auto empty = rpp_advantage(std::vector<double>{}, {}, 0.1);
    CHECK(empty.per_token.empty());
    CHECK_FALSE(empty.zeroed);

    std::vector<std::vector<double>> bad{{1.0, -0.5}};
    std::vector<double> r1{1.0};
    CHECK_THROWS_AS(rpp_advantage(r1, bad, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(rpp_advantage(r1, ones, 0.1), std::invalid_argument);
}
