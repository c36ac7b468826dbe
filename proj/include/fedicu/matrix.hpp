#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace fedicu {

// Dense row-major matrix of 64-bit floats. This is the only array type in
// the library; weights, activations and data grids all use it.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a (m×k) * b (k×n) -> m×n
Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ (k×m)ᵀ * b (k×n) -> m×n
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a (m×k) * bᵀ (n×k)ᵀ -> m×n
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Column sums as a 1×cols row vector.
Matrix col_sums(const Matrix& m);

// Throws DimensionError naming `name` when shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const std::string& name);

// Throws NumericError naming `name` when any entry is not finite.
void require_finite(const Matrix& m, const std::string& name);

}  // namespace fedicu
