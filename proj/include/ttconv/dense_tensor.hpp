#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ttconv {

using Shape = std::vector<std::size_t>;

// Largest tensor any routine will materialize.
inline constexpr std::size_t kMaxDenseElements = 100'000'000;

std::size_t shape_product(std::span<const std::size_t> shape);

// d-dimensional real array, lexicographic storage with the last index
// varying fastest. Indices are 0-based.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> data);

    static DenseTensor zeros(Shape shape) { return DenseTensor(std::move(shape)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t order() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t k) const { return shape_.at(k); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    std::vector<double> take_data() && { return std::move(data_); }

    std::size_t flat_index(std::span<const std::size_t> index) const;
    double at(std::span<const std::size_t> index) const { return data_[flat_index(index)]; }
    double at(std::initializer_list<std::size_t> index) const {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }
    double& at(std::initializer_list<std::size_t> index) {
        return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
    }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    // Same data under a new shape with equal element count.
    DenseTensor reshaped(Shape shape) const;

    double frobenius_norm() const;
    double max_abs() const;

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// ||a - b||_F / ||b||_F, or the absolute error when b is zero.
double relative_error(const DenseTensor& a, const DenseTensor& b);

// Advances a multi-index in last-fastest order; returns false after the last.
bool next_index(std::span<std::size_t> index, std::span<const std::size_t> shape);

}  // namespace ttconv
