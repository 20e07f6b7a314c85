#include "mtcae/matrix.hpp"

#include <cblas-openblas.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>

extern "C" void openblas_set_num_threads(int);

namespace mtcae {

namespace {

// OpenBLAS reads OPENBLAS_CORETYPE during its own static initializer and
// misdetects virtualized Xeons as Prescott, falling back to scalar kernels.
// This constructor runs before the (statically linked) BLAS initializer and
// selects the AVX-512 kernel set unless the user already chose a core type.
__attribute__((constructor(101))) void select_blas_core() {
    ::setenv("OPENBLAS_CORETYPE", "SKYLAKEX", /*overwrite=*/0);
}

void ensure_blas_single_threaded() {
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
}

void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string("matmul inner dimension mismatch (") + what +
                         "): " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

}  // namespace

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols, b.rows, "a*b");
    ensure_blas_single_threaded();
    Matrix c(a.rows, b.cols);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                static_cast<blasint>(a.rows), static_cast<blasint>(b.cols),
                static_cast<blasint>(a.cols), 1.0, a.data.data(),
                static_cast<blasint>(a.cols), b.data.data(),
                static_cast<blasint>(b.cols), 0.0, c.data.data(),
                static_cast<blasint>(c.cols));
    return c;
}

Matrix matmul_trans_a(const Matrix& a, const Matrix& b) {
    check_inner(a.rows, b.rows, "a^T*b");
    ensure_blas_single_threaded();
    Matrix c(a.cols, b.cols);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
                static_cast<blasint>(a.cols), static_cast<blasint>(b.cols),
                static_cast<blasint>(a.rows), 1.0, a.data.data(),
                static_cast<blasint>(a.cols), b.data.data(),
                static_cast<blasint>(b.cols), 0.0, c.data.data(),
                static_cast<blasint>(c.cols));
    return c;
}

Matrix matmul_trans_b(const Matrix& a, const Matrix& b) {
    check_inner(a.cols, b.cols, "a*b^T");
    ensure_blas_single_threaded();
    Matrix c(a.rows, b.rows);
    if (c.empty()) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans,
                static_cast<blasint>(a.rows), static_cast<blasint>(b.rows),
                static_cast<blasint>(a.cols), 1.0, a.data.data(),
                static_cast<blasint>(a.cols), b.data.data(),
                static_cast<blasint>(b.cols), 0.0, c.data.data(),
                static_cast<blasint>(c.cols));
    return c;
}

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows) {
            throw ShapeError("select_rows: row index out of range");
        }
        const double* src = m.row_ptr(rows[i]);
        std::copy(src, src + m.cols, out.row_ptr(i));
    }
    return out;
}

double squared_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return s;
}

}  // namespace mtcae
