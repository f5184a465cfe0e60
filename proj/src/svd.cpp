#include "tokenlab/svd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tokenlab {

namespace {

// One-sided Jacobi (Hestenes): rotate column pairs until all are mutually
// orthogonal; the singular values are then the column norms.
std::vector<double> jacobi_column_norms(std::vector<std::vector<double>> cols) {
    const int n = static_cast<int>(cols.size());
    constexpr int max_sweeps = 60;
    constexpr double tol = 1e-14;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                const size_t m = cols[p].size();
                for (size_t i = 0; i < m; ++i) {
                    alpha += cols[p][i] * cols[p][i];
                    beta += cols[q][i] * cols[q][i];
                    gamma += cols[p][i] * cols[q][i];
                }
                if (gamma == 0.0 || alpha == 0.0 || beta == 0.0) continue;
                if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (size_t i = 0; i < m; ++i) {
                    const double vp = cols[p][i];
                    const double vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (double x : cols[j]) s += x * x;
        sv[j] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

}  // namespace

std::vector<double> singular_values(const Tensor& a) {
    if (a.rows() == 0 || a.cols() == 0) throw std::invalid_argument("singular_values: empty matrix");
    if (!a.all_finite()) throw std::invalid_argument("singular_values: non-finite entries");
    const bool transpose = a.cols() > a.rows();
    const int ncols = transpose ? a.rows() : a.cols();
    const int nrows = transpose ? a.cols() : a.rows();
    std::vector<std::vector<double>> cols(ncols, std::vector<double>(nrows));
    for (int j = 0; j < ncols; ++j)
        for (int i = 0; i < nrows; ++i) cols[j][i] = transpose ? a(j, i) : a(i, j);
    return jacobi_column_norms(std::move(cols));
}

SingularExtremes singular_extremes(const Tensor& a) {
    const std::vector<double> sv = singular_values(a);
    return {sv.front(), sv.back()};
}

}  // namespace tokenlab
