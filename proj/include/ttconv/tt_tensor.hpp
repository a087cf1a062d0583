#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/linalg.hpp"

namespace ttconv {

using Ranks = std::vector<std::size_t>;

// A tensor in TT-format. Core k (0-based) is an r_k x n_k x r_{k+1} block
// stored contiguously with the last index fastest, so slice G_k[j] is the
// r_k x r_{k+1} matrix core(k)[a*n_k*r_{k+1} + j*r_{k+1} + b].
class TTTensor {
public:
    TTTensor() = default;
    TTTensor(Shape mode_sizes, Ranks ranks, std::vector<std::vector<double>> cores);

    // Gaussian cores with the given standard deviation.
    static TTTensor random(Shape mode_sizes, Ranks ranks, std::mt19937_64& rng,
                           double stddev = 1.0);

    std::size_t order() const noexcept { return mode_sizes_.size(); }
    const Shape& mode_sizes() const noexcept { return mode_sizes_; }
    const Ranks& ranks() const noexcept { return ranks_; }
    std::size_t mode_size(std::size_t k) const { return mode_sizes_.at(k); }
    std::size_t rank(std::size_t k) const { return ranks_.at(k); }

    std::span<const double> core(std::size_t k) const { return cores_.at(k); }
    const std::vector<std::vector<double>>& cores() const noexcept { return cores_; }

    ConstStridedMatrixMap slice(std::size_t k, std::size_t j) const;

    friend bool operator==(const TTTensor&, const TTTensor&) = default;

private:
    Shape mode_sizes_;
    Ranks ranks_;
    std::vector<std::vector<double>> cores_;
};

// Chain product G_1[j_1] ... G_d[j_d] at a 0-based multi-index.
double tt_element(const TTTensor& tt, std::span<const std::size_t> index);

// Materializes every element; throws SizeError above kMaxDenseElements.
DenseTensor tt_full(const TTTensor& tt);

// sum_k n_k r_{k-1} r_k
std::size_t tt_param_count(const TTTensor& tt);

// Exactly one of max_ranks (interior ranks, length d-1) or rel_tolerance
// must be set.
struct Truncation {
    std::optional<Ranks> max_ranks;
    std::optional<double> rel_tolerance;

    static Truncation ranks(Ranks r) { return {std::move(r), std::nullopt}; }
    static Truncation tolerance(double tol) { return {std::nullopt, tol}; }
};

// Left-to-right sequential SVD sweep. With a tolerance delta every unfolding
// drops a tail of norm at most delta*||a||_F/sqrt(d-1), which bounds the total
// relative error by delta.
TTTensor tt_svd(const DenseTensor& a, const Truncation& truncation);

}  // namespace ttconv
