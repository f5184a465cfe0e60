#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "tokenlab/rng.hpp"
#include "tokenlab/stats.hpp"

using namespace tokenlab;
using namespace tokenlab::stats;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(12345), b(12345);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams separate by label and index") {
    CHECK(Rng::derive_seed(7, "rollout", 3) == Rng::derive_seed(7, "rollout", 3));
    CHECK(Rng::derive_seed(7, "rollout", 3) != Rng::derive_seed(7, "update", 3));
    CHECK(Rng::derive_seed(7, "rollout", 3) != Rng::derive_seed(7, "rollout", 4));
    CHECK(Rng::derive_seed(7, "rollout", 3) != Rng::derive_seed(8, "rollout", 3));
    // trailing default indices are part of the identity
    CHECK(Rng::derive_seed(7, "rollout") == Rng::derive_seed(7, "rollout", 0, 0, 0));
}

TEST_CASE("uniform01 range and moments") {
    Rng rng(99);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        s += u;
        s2 += u * u;
    }
    double m = s / n;
    double var = s2 / n - m * m;
    CHECK(m == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("uniform_int is inclusive on both ends") {
    Rng rng(3);
    bool seen[4] = {false, false, false, false};
    for (int i = 0; i < 1000; ++i) {
        int v = rng.uniform_int(0, 3);
        REQUIRE(v >= 0);
        REQUIRE(v <= 3);
        seen[v] = true;
    }
    for (bool b : seen) CHECK(b);
    CHECK(rng.uniform_int(5, 5) == 5);
}

TEST_CASE("normal moments and fixed draw budget") {
    Rng rng(2024);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(1).scale(0.02));
    CHECK(std::sqrt(s2 / n) == doctest::Approx(1.0).epsilon(0.02));

    // each normal() consumes exactly two generator words
    Rng a(7), b(7);
    a.normal();
    b.next_u64();
    b.next_u64();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("categorical frequencies match the probability vector") {
    Tensor p(1, 3);
    p[0] = 0.2;
    p[1] = 0.5;
    p[2] = 0.3;
    Rng rng(11);
    int counts[3] = {0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(p)];
    CHECK(counts[0] / double(n) == doctest::Approx(0.2).epsilon(0.05));
    CHECK(counts[1] / double(n) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(counts[2] / double(n) == doctest::Approx(0.3).epsilon(0.05));

    Tensor point(1, 3);
    point[2] = 1.0;
    for (int i = 0; i < 100; ++i) CHECK(rng.categorical(point) == 2);
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(20);
    for (int i = 0; i < 20; ++i) v[i] = i;
    std::vector<int> w = v;
    Rng a(55), b(55);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    for (int i = 0; i < 20; ++i) CHECK(v[i] == i);
}

TEST_CASE("mean and standard deviations") {
    std::vector<double> xs{3.0, -1.0, -1.0, -1.0};
    CHECK(mean(xs) == doctest::Approx(0.0));
    CHECK(pop_std(xs) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(sample_std(xs) == doctest::Approx(2.0).epsilon(1e-14));

    std::vector<double> one{4.0};
    CHECK(mean(one) == 4.0);
    CHECK(pop_std(one) == 0.0);
    CHECK_THROWS_AS(sample_std(one), std::invalid_argument);
    CHECK_THROWS_AS(mean(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> xs{4.0, 1.0, 3.0, 2.0};
    CHECK(percentile(xs, 25.0) == 1.0);
    CHECK(percentile(xs, 50.0) == 2.0);
    CHECK(percentile(xs, 75.0) == 3.0);
    CHECK(percentile(xs, 100.0) == 4.0);
    CHECK(percentile(xs, 1.0) == 1.0);

    std::vector<double> ys{15.0, 20.0, 35.0, 40.0, 50.0};
    CHECK(percentile(ys, 30.0) == 20.0);
    CHECK(percentile(ys, 40.0) == 20.0);
    CHECK(percentile(ys, 41.0) == 35.0);

    CHECK_THROWS_AS(percentile(xs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(percentile(xs, 100.5), std::invalid_argument);
    CHECK_THROWS_AS(percentile(std::vector<double>{}, 50.0), std::invalid_argument);
}

TEST_CASE("regularized incomplete beta") {
    // I_x(1,1) is the uniform CDF
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0})
        CHECK(incbeta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    // I_x(2,2) = x^2 (3 - 2x)
    CHECK(incbeta(2.0, 2.0, 0.3) == doctest::Approx(0.216).epsilon(1e-12));
    // reflection identity
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        double a = rng.uniform(0.2, 8.0);
        double b = rng.uniform(0.2, 8.0);
        double x = rng.uniform01();
        CHECK(incbeta(a, b, x) + incbeta(b, a, 1.0 - x) == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK_THROWS_AS(incbeta(1.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("t survival function closed forms") {
    CHECK(t_sf(0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(t_sf(0.0, 17.0) == doctest::Approx(0.5).epsilon(1e-12));
    // df=1 is Cauchy: P(T > t) = 1/2 - atan(t)/pi
    CHECK(t_sf(1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(t_sf(-1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(t_sf(std::tan(0.4 * 3.141592653589793), 1.0) == doctest::Approx(0.1).epsilon(1e-9));
    // df=2: P(T > t) = 1/2 - t / (2 sqrt(2 + t^2))
    CHECK(t_sf(1.0, 2.0) == doctest::Approx(0.5 - 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-10));
    // large df approaches the normal tail
    CHECK(t_sf(1.959963984540054, 1e6) == doctest::Approx(0.025).epsilon(1e-3));
    // monotone decreasing in t
    double prev = 1.0;
    for (double t = -3.0; t <= 3.0; t += 0.5) {
        double v = t_sf(t, 5.0);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("paired t test") {
    std::vector<double> a{2, 4, 6, 8, 10};
    std::vector<double> b{1, 2, 3, 4, 5};
    auto r = paired_t_test(a, b);
    CHECK(r.mean_diff == doctest::Approx(3.0));
    CHECK(r.df == 4.0);
    CHECK(r.t == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.p_greater == doctest::Approx(t_sf(r.t, 4.0)).epsilon(1e-12));
    CHECK(r.p_greater < 0.01);

    auto rev = paired_t_test(b, a);
    CHECK(rev.p_greater == doctest::Approx(1.0 - r.p_greater).epsilon(1e-10));

    // degenerate: constant differences
    std::vector<double> c{2, 3, 4};
    std::vector<double> d{1, 2, 3};
    CHECK(paired_t_test(c, d).p_greater == 0.0);
    CHECK(paired_t_test(d, c).p_greater == 1.0);
    CHECK(paired_t_test(c, c).p_greater == 0.5);

    CHECK_THROWS_AS(paired_t_test(a, c), std::invalid_argument);
    std::vector<double> tiny{1.0};
    CHECK_THROWS_AS(paired_t_test(tiny, tiny), std::invalid_argument);
}
