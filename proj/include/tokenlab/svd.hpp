#pragma once

#include <vector>

#include "tokenlab/tensor.hpp"

namespace tokenlab {

// Singular values of a dense matrix, descending, min(rows, cols) of them.
// One-sided Jacobi on whichever orientation has fewer columns.
std::vector<double> singular_values(const Tensor& a);

struct SingularExtremes {
    double sigma_max = 0.0;
    double sigma_min = 0.0;  // smallest of the min(rows, cols) values
};

SingularExtremes singular_extremes(const Tensor& a);

}  // namespace tokenlab
