#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace tokenlab::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Population standard deviation (divide by N, not N-1).
inline double pop_std(std::span<const double> xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

inline double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_std: need at least 2 values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// Nearest-rank percentile: smallest value with at least ceil(p/100 * N)
// observations at or below it. p in (0, 100].
inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("percentile: empty input");
    if (p <= 0.0 || p > 100.0) throw std::invalid_argument("percentile: p out of range");
    std::sort(xs.begin(), xs.end());
    const size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(xs.size())));
    return xs[rank - 1];
}

namespace detail {

inline double log_gamma(double x) { return std::lgamma(x); }

// Continued fraction for the regularized incomplete beta, modified Lentz.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-14;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incbeta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incbeta: x out of range");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = detail::log_gamma(a + b) - detail::log_gamma(a) - detail::log_gamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::betacf(a, b, x) / a;
    }
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Survival function of Student's t with df degrees of freedom: P(T > t).
inline double t_sf(double t, double df) {
    const double x = df / (df + t * t);
    const double tail = 0.5 * incbeta(df / 2.0, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

struct PairedTTest {
    double t = 0.0;
    double df = 0.0;
    double p_greater = 1.0;  // one-sided: mean(a - b) > 0
    double mean_diff = 0.0;
};

// Paired one-sided t-test for H1: mean(a) > mean(b).
inline PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: size mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    PairedTTest r;
    r.mean_diff = mean(d);
    const double sd = sample_std(d);
    r.df = static_cast<double>(d.size() - 1);
    if (sd == 0.0) {
        // Degenerate: all differences identical. Perfect separation one way
        // or the other.
        r.t = r.mean_diff > 0.0 ? 1e30 : (r.mean_diff < 0.0 ? -1e30 : 0.0);
        r.p_greater = r.mean_diff > 0.0 ? 0.0 : (r.mean_diff < 0.0 ? 1.0 : 0.5);
        return r;
    }
    r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p_greater = t_sf(r.t, r.df);
    return r;
}

}  // namespace tokenlab::stats
