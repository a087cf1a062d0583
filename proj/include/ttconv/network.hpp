#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ttconv/layers.hpp"

namespace ttconv {

// Mean softmax cross-entropy over a (N, K) logit batch.
struct SoftmaxCrossEntropy {
    static double loss(const DenseTensor& logits, std::span<const int> labels);
    // Same value accumulated in long double. Finite differences of the loss
    // use it so rounding of the O(1) loss does not swamp small gradients.
    static long double loss_extended(const DenseTensor& logits, std::span<const int> labels);
    // d(loss_scale * loss)/dlogits.
    static DenseTensor gradient(const DenseTensor& logits, std::span<const int> labels,
                                double loss_scale = 1.0);
};

struct ForwardResult {
    DenseTensor logits;
    double loss = 0.0;
};

// A feed-forward stack ending in logits, trained with softmax cross-entropy.
class Network {
public:
    explicit Network(Shape input_shape);

    void add(std::unique_ptr<Layer> layer);

    const Shape& input_shape() const noexcept { return input_shape_; }
    // Walks the shape chain; ShapeError names the first layer that rejects
    // its input.
    Shape output_shape() const;

    ForwardResult forward(const DenseTensor& batch, std::span<const int> labels,
                          Mode mode = Mode::Train);
    DenseTensor logits(const DenseTensor& batch, Mode mode = Mode::Eval);
    // Gradient of loss_scale * loss for the last forward pass, over every
    // parameter in layer order. Also fills input_gradient().
    std::vector<double> backward(double loss_scale = 1.0);
    const DenseTensor& input_gradient() const noexcept { return input_grad_; }

    std::size_t size() const noexcept { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    std::size_t param_count() const;
    std::size_t dense_param_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);
    // Offset of layer i's parameters in the flat vector.
    std::size_t param_offset(std::size_t i) const;

private:
    DenseTensor run(const DenseTensor& batch, Mode mode);

    Shape input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
    DenseTensor logits_;
    Shape output_batch_shape_;
    std::vector<int> labels_;
    DenseTensor input_grad_;
    bool has_forward_ = false;
};

}  // namespace ttconv
