#include "dmce/complex_matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dmce/errors.hpp"

namespace dmce {

namespace {

std::string shape_str(const ComplexMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("ComplexMatrix: data length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = cplx{1.0, 0.0};
    return m;
}

bool ComplexMatrix::all_finite() const {
    for (const cplx& z : data_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

std::vector<double> ComplexMatrix::to_real_vector() const {
    std::vector<double> v(2 * data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
        v[i] = data_[i].real();
        v[data_.size() + i] = data_[i].imag();
    }
    return v;
}

ComplexMatrix ComplexMatrix::from_real_vector(const std::vector<double>& v, std::size_t rows,
                                              std::size_t cols) {
    const std::size_t n = rows * cols;
    if (v.size() != 2 * n) {
        throw std::invalid_argument("from_real_vector: length " + std::to_string(v.size()) +
                                    " does not match 2*" + std::to_string(rows) + "*" +
                                    std::to_string(cols));
    }
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < n; ++i) m.data()[i] = cplx{v[i], v[n + i]};
    return m;
}

ComplexMatrix hermitian(const ComplexMatrix& a) {
    ComplexMatrix r(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
    return r;
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " * " +
                                    shape_str(b));
    }
    ComplexMatrix r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{0.0, 0.0}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    }
    return r;
}

ComplexMatrix solve_least_squares(const ComplexMatrix& h, const ComplexMatrix& y) {
    if (h.rows() < h.cols()) {
        throw std::invalid_argument("solve_least_squares: underdetermined system " + shape_str(h));
    }
    if (h.rows() != y.rows()) {
        throw std::invalid_argument("solve_least_squares: row mismatch " + shape_str(h) + " vs " +
                                    shape_str(y));
    }
    const std::size_t n = h.cols();

    // Normal equations: A = H^H H (Hermitian positive definite on full rank),
    // B = H^H Y.
    ComplexMatrix a = matmul(hermitian(h), h);
    ComplexMatrix b = matmul(hermitian(h), y);

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i).real()));
    const double tol = 1e-12 * max_diag;

    // In-place Cholesky A = L L^H.
    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > tol)) throw SingularMatrixError(j, d);
        const double ljj = std::sqrt(d);
        l(j, j) = cplx{ljj, 0.0};
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }

    // Forward/back substitution per right-hand-side column.
    ComplexMatrix x(n, y.cols());
    std::vector<cplx> w(n);
    for (std::size_t c = 0; c < y.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            cplx s = b(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * w[k];
            w[i] = s / l(i, i).real();
        }
        for (std::size_t ii = n; ii-- > 0;) {
            cplx s = w[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l(k, ii)) * x(k, c);
            x(ii, c) = s / l(ii, ii).real();
        }
    }
    return x;
}

double frobenius_norm_sq(const ComplexMatrix& a) {
    double s = 0.0;
    for (const cplx& z : a.data()) s += std::norm(z);
    return s;
}

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("operator+: shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    ComplexMatrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] += b.data()[i];
    return r;
}

ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("operator-: shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    ComplexMatrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= b.data()[i];
    return r;
}

ComplexMatrix operator*(cplx s, const ComplexMatrix& a) {
    ComplexMatrix r = a;
    for (cplx& z : r.data()) z *= s;
    return r;
}

}  // namespace dmce
