#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ttconv/dense_tensor.hpp"

namespace ttconv {

// Labelled images stacked as (N, W, H, C).
struct Dataset {
    DenseTensor images;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const;
    // The listed samples, in order.
    DenseTensor gather(std::span<const std::size_t> indices) const;
};

struct SyntheticOptions {
    std::size_t train_size = 2000;
    std::size_t test_size = 500;
    std::size_t side = 16;
    std::uint64_t seed = 1;
    double noise = 1.0;
};

struct SplitDataset {
    Dataset train;
    Dataset test;
};

// Two single-channel texture classes: label 0 is an oriented sinusoidal
// stripe pattern (random angle, frequency, phase), label 1 a sum of one to
// three Gaussian blobs. Every image gets additive Gaussian noise and is
// standardized to zero mean, unit variance. Labels alternate 0, 1, 0, ...
SplitDataset make_stripes_blobs(const SyntheticOptions& options);

}  // namespace ttconv
