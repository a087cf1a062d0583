#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/linalg.hpp"
#include "ttconv/tt_tensor.hpp"

namespace ttconv {

using Factors = std::vector<std::size_t>;

// Little-endian mixed-radix digits of a 0-based flat index (digit 0 fastest).
std::vector<std::size_t> index_to_multi(std::size_t t, std::span<const std::size_t> factors);
std::size_t multi_to_index(std::span<const std::size_t> digits, std::span<const std::size_t> factors);

// An M x N matrix whose row and column indices are split into d digits and
// paired into compound modes of size m_k * n_k, flattened as row_digit * n_k
// + col_digit.
class TTMatrix {
public:
    TTMatrix() = default;
    TTMatrix(Factors row_factors, Factors col_factors, TTTensor tt);

    const Factors& row_factors() const noexcept { return row_factors_; }
    const Factors& col_factors() const noexcept { return col_factors_; }
    const TTTensor& tt() const noexcept { return tt_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    friend bool operator==(const TTMatrix&, const TTMatrix&) = default;

private:
    Factors row_factors_;
    Factors col_factors_;
    TTTensor tt_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

// Compound-mode tensor of a dense matrix; the reshape ttm_from_dense decomposes.
DenseTensor ttm_reshape(const RowMatrix& a, std::span<const std::size_t> row_factors,
                        std::span<const std::size_t> col_factors);

TTMatrix ttm_from_dense(const RowMatrix& a, Factors row_factors, Factors col_factors,
                        const Truncation& truncation);

double ttm_element(const TTMatrix& a, std::size_t row, std::size_t col);

RowMatrix ttm_full(const TTMatrix& a);

// y = A x without forming A: x is viewed as an (n_1, ..., n_d) digit tensor and
// the cores are contracted left to right.
std::vector<double> ttm_matvec(const TTMatrix& a, std::span<const double> x);

}  // namespace ttconv
