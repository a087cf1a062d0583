#include "ttconv/tt_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

TTTensor::TTTensor(Shape mode_sizes, Ranks ranks, std::vector<std::vector<double>> cores)
    : mode_sizes_(std::move(mode_sizes)), ranks_(std::move(ranks)), cores_(std::move(cores)) {
    const std::size_t d = mode_sizes_.size();
    if (d == 0) throw ShapeError("TT order must be at least 1");
    if (ranks_.size() != d + 1) {
        throw ShapeError("TT needs d+1 ranks, got " + std::to_string(ranks_.size()));
    }
    if (ranks_.front() != 1 || ranks_.back() != 1) {
        throw ShapeError("TT boundary ranks must be 1");
    }
    if (cores_.size() != d) throw ShapeError("TT needs one core per mode");
    for (std::size_t k = 0; k < d; ++k) {
        if (mode_sizes_[k] == 0 || ranks_[k + 1] == 0) {
            throw ShapeError("TT mode sizes and ranks must be positive");
        }
        const std::size_t expected = ranks_[k] * mode_sizes_[k] * ranks_[k + 1];
        if (cores_[k].size() != expected) {
            throw ShapeError("core " + std::to_string(k) + " has " +
                             std::to_string(cores_[k].size()) + " entries, expected " +
                             std::to_string(expected));
        }
    }
}

TTTensor TTTensor::random(Shape mode_sizes, Ranks ranks, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<std::vector<double>> cores;
    for (std::size_t k = 0; k < mode_sizes.size() && k + 1 < ranks.size(); ++k) {
        std::vector<double> core(ranks[k] * mode_sizes[k] * ranks[k + 1]);
        for (double& v : core) v = normal(rng);
        cores.push_back(std::move(core));
    }
    return TTTensor(std::move(mode_sizes), std::move(ranks), std::move(cores));
}

ConstStridedMatrixMap TTTensor::slice(std::size_t k, std::size_t j) const {
    const std::size_t r0 = ranks_.at(k);
    const std::size_t n = mode_sizes_.at(k);
    const std::size_t r1 = ranks_.at(k + 1);
    if (j >= n) throw IndexError("slice index out of range");
    return ConstStridedMatrixMap(cores_[k].data() + j * r1, static_cast<Eigen::Index>(r0),
                                 static_cast<Eigen::Index>(r1),
                                 Eigen::OuterStride<>(static_cast<Eigen::Index>(n * r1)));
}

double tt_element(const TTTensor& tt, std::span<const std::size_t> index) {
    if (index.size() != tt.order()) {
        throw IndexError("index order " + std::to_string(index.size()) +
                         " does not match TT order " + std::to_string(tt.order()));
    }
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= tt.mode_size(k)) {
            throw IndexError("index " + std::to_string(index[k]) + " out of range in mode " +
                             std::to_string(k));
        }
    }
    Eigen::RowVectorXd row = tt.slice(0, index[0]);
    for (std::size_t k = 1; k < index.size(); ++k) {
        row = (row * tt.slice(k, index[k])).eval();
    }
    return row(0);
}

DenseTensor tt_full(const TTTensor& tt) {
    const std::size_t total = shape_product(tt.mode_sizes());
    if (total > kMaxDenseElements) {
        throw SizeError("tt_full: " + std::to_string(total) + " elements exceeds cap");
    }
    // acc holds the partial contraction as a (prod n_1..n_k) x r_k matrix.
    RowMatrix acc = RowMatrix::Ones(1, 1);
    for (std::size_t k = 0; k < tt.order(); ++k) {
        const auto r0 = static_cast<Eigen::Index>(tt.rank(k));
        const auto n = static_cast<Eigen::Index>(tt.mode_size(k));
        const auto r1 = static_cast<Eigen::Index>(tt.rank(k + 1));
        ConstMatrixMap core(tt.core(k).data(), r0, n * r1);
        RowMatrix next = acc * core;
        acc = Eigen::Map<RowMatrix>(next.data(), acc.rows() * n, r1);
    }
    std::vector<double> data(acc.data(), acc.data() + acc.size());
    return DenseTensor(tt.mode_sizes(), std::move(data));
}

std::size_t tt_param_count(const TTTensor& tt) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < tt.order(); ++k) {
        count += tt.mode_size(k) * tt.rank(k) * tt.rank(k + 1);
    }
    return count;
}

namespace {

constexpr double kTieTolerance = 1e-12;

// Smallest rank whose discarded tail has norm <= threshold, then widened
// over singular values tied with the last kept one.
std::size_t rank_for_threshold(const Eigen::VectorXd& sigma, double threshold) {
    const auto n = static_cast<std::size_t>(sigma.size());
    std::size_t rank = n;
    double tail = 0.0;
    while (rank > 1) {
        const double s = sigma(static_cast<Eigen::Index>(rank - 1));
        if (tail + s * s > threshold * threshold) break;
        tail += s * s;
        --rank;
    }
    const double scale = std::max(sigma(0), 1.0);
    while (rank < n && std::abs(sigma(static_cast<Eigen::Index>(rank - 1)) -
                                sigma(static_cast<Eigen::Index>(rank))) <= kTieTolerance * scale) {
        ++rank;
    }
    return rank;
}

void validate_truncation(const Truncation& t, std::size_t order) {
    if (t.max_ranks.has_value() == t.rel_tolerance.has_value()) {
        throw ArgumentError("exactly one of max_ranks or rel_tolerance must be given");
    }
    if (t.max_ranks) {
        if (t.max_ranks->size() + 1 != order) {
            throw ArgumentError("max_ranks must have d-1 = " + std::to_string(order - 1) +
                                " entries, got " + std::to_string(t.max_ranks->size()));
        }
        for (std::size_t r : *t.max_ranks) {
            if (r == 0) throw ArgumentError("max_ranks entries must be positive");
        }
    } else {
        const double tol = *t.rel_tolerance;
        if (!(tol > 0.0 && tol < 1.0)) {
            throw ArgumentError("rel_tolerance must lie in (0, 1)");
        }
    }
}

}  // namespace

TTTensor tt_svd(const DenseTensor& a, const Truncation& truncation) {
    const std::size_t d = a.order();
    if (d == 0 || a.size() == 0) throw ArgumentError("tt_svd: empty tensor");
    validate_truncation(truncation, d);
    const Shape& n = a.shape();

    const double norm = a.frobenius_norm();
    if (norm == 0.0) {
        std::vector<std::vector<double>> cores;
        for (std::size_t k = 0; k < d; ++k) cores.emplace_back(n[k], 0.0);
        return TTTensor(n, Ranks(d + 1, 1), std::move(cores));
    }

    const double threshold =
        truncation.rel_tolerance && d > 1
            ? *truncation.rel_tolerance * norm / std::sqrt(static_cast<double>(d - 1))
            : 0.0;

    Ranks ranks(d + 1, 1);
    std::vector<std::vector<double>> cores(d);
    // remainder is the not-yet-decomposed part, r_k * (n_k ... n_d) entries.
    std::vector<double> remainder(a.data().begin(), a.data().end());
    std::size_t cols = a.size();

    for (std::size_t k = 0; k + 1 < d; ++k) {
        const std::size_t rows = ranks[k] * n[k];
        cols /= n[k];
        Eigen::MatrixXd unfolding = ConstMatrixMap(remainder.data(), static_cast<Eigen::Index>(rows),
                                                   static_cast<Eigen::Index>(cols));
        Eigen::BDCSVD<Eigen::MatrixXd> svd(unfolding, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sigma = svd.singularValues();

        std::size_t rank = static_cast<std::size_t>(sigma.size());
        if (truncation.max_ranks) {
            rank = std::min(rank, (*truncation.max_ranks)[k]);
        } else {
            rank = rank_for_threshold(sigma, threshold);
        }
        const auto r = static_cast<Eigen::Index>(rank);
        ranks[k + 1] = rank;

        RowMatrix u = svd.matrixU().leftCols(r);
        cores[k].assign(u.data(), u.data() + u.size());

        RowMatrix next = sigma.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
        remainder.assign(next.data(), next.data() + next.size());
    }
    cores[d - 1] = std::move(remainder);
    return TTTensor(n, std::move(ranks), std::move(cores));
}

}  // namespace ttconv
