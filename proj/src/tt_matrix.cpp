#include "ttconv/tt_matrix.hpp"

#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

std::vector<std::size_t> index_to_multi(std::size_t t, std::span<const std::size_t> factors) {
    const std::size_t total = shape_product(factors);
    if (t >= total) {
        throw IndexError("index " + std::to_string(t) + " out of range for " +
                         std::to_string(total) + " entries");
    }
    std::vector<std::size_t> digits(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k) {
        digits[k] = t % factors[k];
        t /= factors[k];
    }
    return digits;
}

std::size_t multi_to_index(std::span<const std::size_t> digits,
                           std::span<const std::size_t> factors) {
    if (digits.size() != factors.size()) throw IndexError("digit count mismatch");
    std::size_t t = 0;
    for (std::size_t k = digits.size(); k-- > 0;) {
        if (digits[k] >= factors[k]) throw IndexError("digit out of range");
        t = t * factors[k] + digits[k];
    }
    return t;
}

TTMatrix::TTMatrix(Factors row_factors, Factors col_factors, TTTensor tt)
    : row_factors_(std::move(row_factors)),
      col_factors_(std::move(col_factors)),
      tt_(std::move(tt)) {
    const std::size_t d = row_factors_.size();
    if (d == 0 || col_factors_.size() != d || tt_.order() != d) {
        throw ShapeError("TTMatrix factor lists and TT order must agree");
    }
    for (std::size_t k = 0; k < d; ++k) {
        if (tt_.mode_size(k) != row_factors_[k] * col_factors_[k]) {
            throw ShapeError("TT mode " + std::to_string(k) + " has size " +
                             std::to_string(tt_.mode_size(k)) + ", expected m_k*n_k = " +
                             std::to_string(row_factors_[k] * col_factors_[k]));
        }
    }
    rows_ = shape_product(row_factors_);
    cols_ = shape_product(col_factors_);
}

namespace {

// Position of matrix entry (row, col) in the lexicographic compound tensor.
std::size_t compound_flat(std::size_t row, std::size_t col, std::span<const std::size_t> m,
                          std::span<const std::size_t> n) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        const std::size_t mu = row % m[k];
        const std::size_t nu = col % n[k];
        row /= m[k];
        col /= n[k];
        flat = flat * (m[k] * n[k]) + mu * n[k] + nu;
    }
    return flat;
}

Shape compound_shape(std::span<const std::size_t> m, std::span<const std::size_t> n) {
    Shape shape(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) shape[k] = m[k] * n[k];
    return shape;
}

}  // namespace

DenseTensor ttm_reshape(const RowMatrix& a, std::span<const std::size_t> row_factors,
                        std::span<const std::size_t> col_factors) {
    if (row_factors.empty() || row_factors.size() != col_factors.size()) {
        throw ShapeError("row and column factor lists must have equal nonzero length");
    }
    if (shape_product(row_factors) != static_cast<std::size_t>(a.rows()) ||
        shape_product(col_factors) != static_cast<std::size_t>(a.cols())) {
        throw ShapeError("factor products do not match the " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " matrix");
    }
    DenseTensor t(compound_shape(row_factors, col_factors));
    for (Eigen::Index l = 0; l < a.rows(); ++l) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            t[compound_flat(static_cast<std::size_t>(l), static_cast<std::size_t>(c), row_factors,
                            col_factors)] = a(l, c);
        }
    }
    return t;
}

TTMatrix ttm_from_dense(const RowMatrix& a, Factors row_factors, Factors col_factors,
                        const Truncation& truncation) {
    DenseTensor t = ttm_reshape(a, row_factors, col_factors);
    return TTMatrix(std::move(row_factors), std::move(col_factors), tt_svd(t, truncation));
}

double ttm_element(const TTMatrix& a, std::size_t row, std::size_t col) {
    if (row >= a.rows() || col >= a.cols()) {
        throw IndexError("matrix index (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") out of range");
    }
    const std::size_t d = a.row_factors().size();
    std::vector<std::size_t> index(d);
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t m = a.row_factors()[k];
        const std::size_t n = a.col_factors()[k];
        index[k] = (row % m) * n + col % n;
        row /= m;
        col /= n;
    }
    return tt_element(a.tt(), index);
}

RowMatrix ttm_full(const TTMatrix& a) {
    const DenseTensor t = tt_full(a.tt());
    RowMatrix out(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    for (std::size_t l = 0; l < a.rows(); ++l) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c)) =
                t[compound_flat(l, c, a.row_factors(), a.col_factors())];
        }
    }
    return out;
}

std::vector<double> ttm_matvec(const TTMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) {
        throw ShapeError("ttm_matvec: vector length " + std::to_string(x.size()) +
                         " does not match " + std::to_string(a.cols()) + " columns");
    }
    const TTTensor& tt = a.tt();
    const std::size_t d = tt.order();
    // state[p][r][q]: p = output digits so far (little-endian), r = current rank,
    // q = remaining input digits (little-endian, current digit fastest).
    std::vector<double> state(x.begin(), x.end());
    std::size_t prefix = 1;
    std::size_t suffix = a.cols();
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t m = a.row_factors()[k];
        const std::size_t n = a.col_factors()[k];
        const std::size_t r0 = tt.rank(k);
        const std::size_t r1 = tt.rank(k + 1);
        const std::size_t rest = suffix / n;
        const std::span<const double> core = tt.core(k);
        std::vector<double> next(prefix * m * r1 * rest, 0.0);
        for (std::size_t p = 0; p < prefix; ++p) {
            for (std::size_t ra = 0; ra < r0; ++ra) {
                const double* in = state.data() + (p * r0 + ra) * suffix;
                for (std::size_t q = 0; q < rest; ++q) {
                    for (std::size_t nu = 0; nu < n; ++nu) {
                        const double v = in[q * n + nu];
                        for (std::size_t mu = 0; mu < m; ++mu) {
                            const double* g = core.data() + (ra * m * n + mu * n + nu) * r1;
                            double* out = next.data() + ((p + mu * prefix) * r1) * rest + q;
                            for (std::size_t rb = 0; rb < r1; ++rb) out[rb * rest] += v * g[rb];
                        }
                    }
                }
            }
        }
        state = std::move(next);
        prefix *= m;
        suffix = rest;
    }
    return state;
}

}  // namespace ttconv
