#include "ttconv/dense_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) {
        if (s != 0 && n > kMaxDenseElements * 16 / s) {
            throw SizeError("shape product overflows the element cap");
        }
        n *= s;
    }
    return n;
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor order must be at least 1");
    for (std::size_t s : shape) {
        if (s == 0) throw ShapeError("tensor dimensions must be positive");
    }
}

}  // namespace

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    const std::size_t n = shape_product(shape_);
    if (n > kMaxDenseElements) {
        throw SizeError("dense tensor of " + std::to_string(n) + " elements exceeds cap");
    }
    data_.assign(n, 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape product " +
                         std::to_string(shape_product(shape_)));
    }
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw IndexError("index order " + std::to_string(index.size()) +
                         " does not match tensor order " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (index[k] >= shape_[k]) {
            throw IndexError("index " + std::to_string(index[k]) + " out of range in mode " +
                             std::to_string(k));
        }
        flat = flat * shape_[k] + index[k];
    }
    return flat;
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
    return DenseTensor(std::move(shape), data_);
}

double DenseTensor::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double DenseTensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double relative_error(const DenseTensor& a, const DenseTensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("relative_error: shape mismatch");
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        diff += d * d;
        ref += b[i] * b[i];
    }
    return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

bool next_index(std::span<std::size_t> index, std::span<const std::size_t> shape) {
    for (std::size_t k = index.size(); k-- > 0;) {
        if (++index[k] < shape[k]) return true;
        index[k] = 0;
    }
    return false;
}

}  // namespace ttconv
