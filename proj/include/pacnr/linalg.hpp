#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace pacnr {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                                 std::to_string(rows_ * cols_));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Matrix& operator+=(const Matrix& o) {
        check_same(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    bool operator==(const Matrix& o) const = default;

private:
    void check_same(const Matrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionError(std::string("matrix ") + op + ": " + shape_str() + " vs " + o.shape_str());
    }
    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_of(const Matrix& a) { return std::to_string(a.rows()) + "x" + std::to_string(a.cols()); }

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v.data(), v.data(), v.size())); }

inline Vector matvec(const Matrix& a, const Vector& v) {
    if (a.cols() != v.size())
        throw DimensionError("matvec: matrix " + shape_of(a) + " times vector of dim " + std::to_string(v.size()));
    Vector out(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) out[r] = dot(a.row(r), v.data(), a.cols());
    return out;
}

/// aᵀ·v without forming the transpose.
inline Vector matvec_t(const Matrix& a, const Vector& v) {
    if (a.rows() != v.size())
        throw DimensionError("matvec_t: matrix " + shape_of(a) + " transposed times vector of dim " +
                             std::to_string(v.size()));
    Vector out(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double s = v[r];
        if (s == 0.0) continue;
        const double* row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] += s * row[c];
    }
    return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape_of(a) + " times " + shape_of(b));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            if (s == 0.0) continue;
            const double* br = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += s * br[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

inline double frobenius_norm_sq(const Matrix& a) { return dot(a.data().data(), a.data().data(), a.size()); }

inline double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

inline Vector row_l2_norms(const Matrix& a) {
    Vector out(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) out[r] = std::sqrt(dot(a.row(r), a.row(r), a.cols()));
    return out;
}

/// ‖a‖_{2,∞}
inline double max_row_l2(const Matrix& a) {
    const Vector n = row_l2_norms(a);
    return n.empty() ? 0.0 : *std::max_element(n.begin(), n.end());
}

/// ‖a‖_{2,1}: sum of column ℓ2 norms.
inline double col_l2_sum(const Matrix& a) {
    Vector sq(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) sq[c] += row[c] * row[c];
    }
    double s = 0.0;
    for (double v : sq) s += std::sqrt(v);
    return s;
}

struct SpectralNorm {
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    Vector right;  // unit right singular vector estimate (empty for the zero matrix)

    operator double() const { return value; }
};

/// Largest singular value by power iteration on aᵀa. Stops when the Rayleigh estimate
/// changes by at most tol (relative) between iterations.
inline SpectralNorm spectral_norm(const Matrix& a, RngStream& rng, double tol = 1e-10, std::size_t max_iters = 1000,
                                  const Vector* start = nullptr) {
    if (a.empty()) throw DimensionError("spectral_norm: empty matrix");
    if (!(tol > 0.0)) throw Error("spectral_norm: tol must be positive");
    SpectralNorm out;
    if (frobenius_norm_sq(a) == 0.0) return out;

    Vector v(a.cols());
    if (start && start->size() == a.cols()) {
        v = *start;
    } else {
        for (double& x : v) x = rng.normal();
    }
    double nv = norm2(v);
    if (nv == 0.0) {
        for (double& x : v) x = rng.normal();
        nv = norm2(v);
    }
    for (double& x : v) x /= nv;

    double lambda = -1.0;
    out.converged = false;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        const Vector u = matvec(a, v);
        const double next = dot(u.data(), u.data(), u.size());
        Vector w = matvec_t(a, u);
        const double nw = norm2(w);
        out.iterations = it;
        if (nw == 0.0) {  // v fell into the null space
            lambda = next;
            out.converged = true;
            break;
        }
        const bool done = lambda >= 0.0 && std::abs(next - lambda) <= tol * next;
        lambda = next;
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
        if (done) {
            out.converged = true;
            break;
        }
    }
    out.value = std::sqrt(std::max(lambda, 0.0));
    out.right = std::move(v);
    return out;
}

inline SpectralNorm spectral_norm(const Matrix& a, double tol = 1e-10, std::size_t max_iters = 1000) {
    RngStream rng(0x5eed5eed, a.rows() * 131 + a.cols());
    return spectral_norm(a, rng, tol, max_iters);
}

inline Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, RngStream& rng) {
    if (!(sigma >= 0.0)) throw Error("sample_gaussian_matrix: sigma must be nonnegative");
    Matrix m(rows, cols);
    if (sigma == 0.0) return m;
    for (double& x : m.data()) x = sigma * rng.normal();
    return m;
}

inline bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace pacnr
