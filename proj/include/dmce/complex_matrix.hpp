#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dmce {

using cplx = std::complex<double>;

/// Dense complex matrix, row-major, double precision.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data);

    static ComplexMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }

    bool all_finite() const;

    /// Flat real layout used for network and diffusion I/O: all real parts
    /// in row-major order, then all imaginary parts in row-major order.
    std::vector<double> to_real_vector() const;
    static ComplexMatrix from_real_vector(const std::vector<double>& v, std::size_t rows,
                                          std::size_t cols);

    bool operator==(const ComplexMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

/// Conjugate transpose.
ComplexMatrix hermitian(const ComplexMatrix& a);

/// Complex matrix product. Throws std::invalid_argument on shape mismatch.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);

/// Least-squares solve: returns X minimizing ||H X - Y||_F via the normal
/// equations (H^H H) X = H^H Y with a Hermitian Cholesky factorization.
/// Requires h.rows >= h.cols and full column rank; throws
/// SingularMatrixError when a pivot falls below 1e-12 times the largest
/// Gram diagonal.
ComplexMatrix solve_least_squares(const ComplexMatrix& h, const ComplexMatrix& y);

/// Sum of squared magnitudes of all entries.
double frobenius_norm_sq(const ComplexMatrix& a);

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(cplx s, const ComplexMatrix& a);

}  // namespace dmce
