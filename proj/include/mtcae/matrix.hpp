#pragma once

#include <cstddef>
#include <vector>

#include "mtcae/errors.hpp"

namespace mtcae {

// Dense row-major matrix of 64-bit floats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool all_finite() const;
};

// c = a * b, a is [m x k], b is [k x n].
Matrix matmul(const Matrix& a, const Matrix& b);

// c = a^T * b, a is [k x m], b is [k x n].
Matrix matmul_trans_a(const Matrix& a, const Matrix& b);

// c = a * b^T, a is [m x k], b is [n x k].
Matrix matmul_trans_b(const Matrix& a, const Matrix& b);

// Sum of squared entries.
double squared_norm(const Matrix& m);

// New matrix holding the given rows, in the given order.
Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows);

}  // namespace mtcae
