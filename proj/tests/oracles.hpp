#pragma once

// Brute-force reference computations used only by tests. They transcribe the
// 1-based index formulas directly and share no code with the library's
// contraction paths.

#include <cstddef>
#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/tt_tensor.hpp"

namespace oracle {

using ttconv::DenseTensor;
using ttconv::TTTensor;

// Explicit chain G_1[j_1] ... G_d[j_d] with naive triple loops.
inline double chain_product(const TTTensor& tt, const std::vector<std::size_t>& idx) {
    std::vector<double> row{1.0};
    for (std::size_t k = 0; k < tt.order(); ++k) {
        const std::size_t r0 = tt.rank(k), n = tt.mode_size(k), r1 = tt.rank(k + 1);
        const auto core = tt.core(k);
        std::vector<double> next(r1, 0.0);
        for (std::size_t b = 0; b < r1; ++b) {
            for (std::size_t a = 0; a < r0; ++a) next[b] += row[a] * core[(a * n + idx[k]) * r1 + b];
        }
        row = next;
    }
    return row[0];
}

inline DenseTensor full_by_chain(const TTTensor& tt) {
    DenseTensor out(tt.mode_sizes());
    std::vector<std::size_t> idx(tt.order(), 0);
    std::size_t flat = 0;
    do {
        out[flat++] = chain_product(tt, idx);
    } while (ttconv::next_index(idx, tt.mode_sizes()));
    return out;
}

// Mixed-radix digits of t (1-based), digit 1 fastest, each 1-based.
inline std::vector<std::size_t> mixed_radix_1based(std::size_t t, const std::vector<std::size_t>& f) {
    std::vector<std::size_t> out;
    std::size_t v = t - 1;
    for (std::size_t k : f) {
        out.push_back(v % k + 1);
        v /= k;
    }
    return out;
}

// Y(x,y,s) = sum_{i,j,c} K(i,j,c,s) X(x+i-1, y+j-1, c), all indices 1-based.
inline DenseTensor conv_eq1(const DenseTensor& X, const DenseTensor& K) {
    const std::size_t W = X.dim(0), H = X.dim(1), C = X.dim(2);
    const std::size_t l = K.dim(0), S = K.dim(3);
    DenseTensor Y({W - l + 1, H - l + 1, S});
    for (std::size_t x = 1; x <= W - l + 1; ++x)
        for (std::size_t y = 1; y <= H - l + 1; ++y)
            for (std::size_t s = 1; s <= S; ++s) {
                double acc = 0.0;
                for (std::size_t i = 1; i <= l; ++i)
                    for (std::size_t j = 1; j <= l; ++j)
                        for (std::size_t c = 1; c <= C; ++c)
                            acc += K.at({i - 1, j - 1, c - 1, s - 1}) *
                                   X.at({x + i - 2, y + j - 2, c - 1});
                Y.at({x - 1, y - 1, s - 1}) = acc;
            }
    return Y;
}

inline DenseTensor random_dense(const ttconv::Shape& shape, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    DenseTensor t(shape);
    for (double& v : t.data()) v = normal(rng);
    return t;
}

inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
