#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tokenlab {

// Dense row-major matrix/vector of doubles. Vectors are n x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, 0.0) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
    }

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor vec(int n) { return Tensor(n, 1); }
    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v_[0] = x;
        return t;
    }
    static Tensor from(std::span<const double> xs) {
        Tensor t(static_cast<int>(xs.size()), 1);
        for (size_t i = 0; i < xs.size(); ++i) t.v_[i] = xs[i];
        return t;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    bool is_vector() const { return cols_ == 1; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }
    double& operator[](int i) { return v_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v_[static_cast<size_t>(i)]; }
    double value() const {
        if (!is_scalar()) throw std::logic_error("Tensor::value on non-scalar");
        return v_[0];
    }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::span<const double> flat() const { return v_; }
    std::span<double> flat() { return v_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double norm() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return std::sqrt(s);
    }

    void fill(double x) {
        for (double& e : v_) e = x;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

// Shared numeric kernels. The eager forward path and the tape ops both call
// these, so recorded probabilities and re-evaluated probabilities agree to the
// last bit.
namespace kernels {

inline Tensor matvec(const Tensor& w, const Tensor& x) {
    if (!x.is_vector() || w.cols() != x.rows())
        throw std::invalid_argument("matvec: shape mismatch " + std::to_string(w.rows()) + "x" +
                                    std::to_string(w.cols()) + " * " + std::to_string(x.rows()));
    Tensor y = Tensor::vec(w.rows());
    for (int i = 0; i < w.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < w.cols(); ++j) s += w(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor y = a;
    for (int i = 0; i < y.size(); ++i) y[i] += b[i];
    return y;
}

inline Tensor tanh_vec(const Tensor& a) {
    Tensor y = a;
    for (int i = 0; i < y.size(); ++i) y[i] = std::tanh(a[i]);
    return y;
}

// Max-subtracted softmax over a logit vector at the given temperature.
inline Tensor softmax(const Tensor& logits, double temperature) {
    if (!logits.is_vector() || logits.size() < 1) throw std::invalid_argument("softmax: need a nonempty vector");
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be > 0");
    if (!logits.all_finite()) throw std::invalid_argument("softmax: non-finite logits");
    const int n = logits.size();
    double mx = logits[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    Tensor p = Tensor::vec(n);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = std::exp((logits[i] - mx) / temperature);
        z += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= z;
    return p;
}

// log softmax(logits)[k] at temperature 1, max-subtracted.
inline double log_prob(const Tensor& logits, int k) {
    if (k < 0 || k >= logits.size()) throw std::invalid_argument("log_prob: index out of range");
    if (!logits.all_finite()) throw std::invalid_argument("log_prob: non-finite logits");
    const int n = logits.size();
    double mx = logits[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(logits[i] - mx);
    return (logits[k] - mx) - std::log(z);
}

}  // namespace kernels

}  // namespace tokenlab
