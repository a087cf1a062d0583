#include "ttconv/dataset.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ttconv/errors.hpp"

namespace ttconv {

Shape Dataset::sample_shape() const {
    if (images.order() < 2) throw ShapeError("dataset images need a leading sample axis");
    return Shape(images.shape().begin() + 1, images.shape().end());
}

DenseTensor Dataset::gather(std::span<const std::size_t> indices) const {
    Shape shape = sample_shape();
    const std::size_t size = shape_product(shape);
    shape.insert(shape.begin(), indices.size());
    DenseTensor out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= labels.size()) throw IndexError("sample index out of range");
        const auto src = images.data().subspan(indices[i] * size, size);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * size));
    }
    return out;
}

namespace {

void stripes(std::span<double> img, std::size_t side, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> freq(0.12, 0.3);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double a = angle(rng), f = freq(rng), p = phase(rng);
    const double kx = std::cos(a) * f * 2.0 * std::numbers::pi;
    const double ky = std::sin(a) * f * 2.0 * std::numbers::pi;
    for (std::size_t x = 0; x < side; ++x) {
        for (std::size_t y = 0; y < side; ++y) {
            img[x * side + y] = std::sin(kx * static_cast<double>(x) + ky * static_cast<double>(y) + p);
        }
    }
}

void blobs(std::span<double> img, std::size_t side, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_real_distribution<double> centre(0.0, static_cast<double>(side - 1));
    std::uniform_real_distribution<double> width(1.5, 3.5);
    const int n = count(rng);
    for (int b = 0; b < n; ++b) {
        const double cx = centre(rng), cy = centre(rng), w = width(rng);
        for (std::size_t x = 0; x < side; ++x) {
            for (std::size_t y = 0; y < side; ++y) {
                const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                img[x * side + y] += std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
            }
        }
    }
}

Dataset generate(std::size_t n, const SyntheticOptions& options, std::mt19937_64& rng) {
    const std::size_t side = options.side;
    Dataset d{DenseTensor({n, side, side, 1}), std::vector<int>(n)};
    std::normal_distribution<double> noise(0.0, options.noise);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        d.labels[i] = label;
        auto img = d.images.data().subspan(i * side * side, side * side);
        if (label == 0) {
            stripes(img, side, rng);
        } else {
            blobs(img, side, rng);
        }
        double mean = 0.0;
        for (double& v : img) {
            v += noise(rng);
            mean += v;
        }
        mean /= static_cast<double>(img.size());
        double var = 0.0;
        for (double v : img) var += (v - mean) * (v - mean);
        const double inv = 1.0 / std::sqrt(var / static_cast<double>(img.size()) + 1e-12);
        for (double& v : img) v = (v - mean) * inv;
    }
    return d;
}

}  // namespace

SplitDataset make_stripes_blobs(const SyntheticOptions& options) {
    if (options.side < 2) throw ArgumentError("synthetic images need side >= 2");
    std::mt19937_64 rng(options.seed);
    SplitDataset split;
    split.train = generate(options.train_size, options, rng);
    split.test = generate(options.test_size, options, rng);
    return split;
}

}  // namespace ttconv
