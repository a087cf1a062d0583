#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/tt_conv.hpp"
#include "ttconv/tt_matrix.hpp"

namespace ttconv {

enum class Mode { Train, Eval };

// A network stage acting on a batch tensor of shape (N, sample...). Conv-like
// layers take W x H x C samples; fully-connected layers flatten whatever
// sample shape they receive.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    // Sample shape produced from the given sample shape; ShapeError if unsupported.
    virtual Shape output_shape(const Shape& input) const = 0;
    virtual DenseTensor forward(const DenseTensor& batch, Mode mode) = 0;
    // Accumulates parameter gradients and returns dL/dinput. StateError when
    // no forward pass is cached.
    virtual DenseTensor backward(const DenseTensor& grad_out) = 0;

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> grads() noexcept { return grads_; }
    std::span<const double> grads() const noexcept { return grads_; }
    void zero_grads();

    // Parameter count of the uncompressed layer this one stands in for.
    virtual std::size_t dense_param_count() const { return params_.size(); }

    bool frozen = false;

protected:
    void allocate(std::size_t n);
    void require_forward(bool cached) const;

    std::vector<double> params_;
    std::vector<double> grads_;
};

class DenseConvLayer : public Layer {
public:
    DenseConvLayer(std::size_t filter, std::size_t in_channels, std::size_t out_channels,
                   std::mt19937_64& rng);

    std::string kind() const override { return "dense-conv"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

    ConvKernel kernel() const;
    void set_kernel(const ConvKernel& k);

private:
    std::size_t filter_, in_, out_;
    Shape input_shape_;
    std::vector<RowMatrix> patches_;
};

class TTConvLayer : public Layer {
public:
    // Cores drawn so the reconstructed kernel has He-style variance 2/(l^2 C).
    TTConvLayer(std::size_t filter, ChannelFactorization fact, const Ranks& ranks,
                std::mt19937_64& rng);
    explicit TTConvLayer(const TTConvKernel& kernel);

    std::string kind() const override { return "tt-conv"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    std::size_t dense_param_count() const override;

    TTConvKernel kernel() const;

private:
    std::size_t filter_;
    ChannelFactorization fact_;
    Shape modes_;
    Ranks ranks_;
    Shape input_shape_;
    std::vector<TTConvTrace> traces_;
};

class NaiveTTConvLayer : public Layer {
public:
    NaiveTTConvLayer(std::size_t filter, std::size_t in_channels, std::size_t out_channels,
                     const Ranks& ranks, std::mt19937_64& rng);

    std::string kind() const override { return "naive-tt-conv"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    std::size_t dense_param_count() const override;

    NaiveTTConvKernel kernel() const;

private:
    std::size_t filter_, in_, out_;
    Ranks ranks_;
    Shape input_shape_;
    RowMatrix kernel_matrix_;
    std::vector<RowMatrix> patches_;
};

class DenseFCLayer : public Layer {
public:
    DenseFCLayer(std::size_t inputs, std::size_t outputs, std::mt19937_64& rng);

    std::string kind() const override { return "dense-fc"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

private:
    std::size_t in_, out_;
    DenseTensor input_;
    bool cached_ = false;
};

// y = A x + b with A (outputs x inputs) in TT-matrix format; params are the
// cores followed by the bias.
class TTFCLayer : public Layer {
public:
    TTFCLayer(Factors in_factors, Factors out_factors, const Ranks& ranks, std::mt19937_64& rng);

    std::string kind() const override { return "tt-fc"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;
    std::size_t dense_param_count() const override;

    TTMatrix matrix() const;

private:
    std::vector<ChainStep> steps(std::size_t batch) const;

    Factors in_factors_, out_factors_;
    Shape modes_;
    Ranks ranks_;
    std::size_t in_, out_;
    Shape input_shape_;
    std::vector<std::vector<double>> states_;
};

class ReluLayer : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Shape output_shape(const Shape& input) const override { return input; }
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

private:
    DenseTensor input_;
    bool cached_ = false;
};

// Window `size`, step `stride`, no padding. Ties go to the first position in
// scan order (x offset outer, y offset inner).
class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(std::size_t size = 3, std::size_t stride = 2);

    std::string kind() const override { return "max-pool"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

private:
    std::size_t size_, stride_;
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
};

// Non-overlapping size x size averaging.
class AvgPoolLayer : public Layer {
public:
    explicit AvgPoolLayer(std::size_t size);

    std::string kind() const override { return "avg-pool"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

private:
    std::size_t size_;
    Shape input_shape_;
};

// Normalizes the last axis. Train mode uses batch statistics and updates
// running averages with momentum 0.9; eval mode uses the running averages.
class BatchNormLayer : public Layer {
public:
    explicit BatchNormLayer(std::size_t channels, double epsilon = 1e-5, double momentum = 0.9);

    std::string kind() const override { return "batch-norm"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

    std::span<const double> running_mean() const { return running_mean_; }
    std::span<const double> running_var() const { return running_var_; }

private:
    std::size_t channels_;
    double epsilon_, momentum_;
    std::vector<double> running_mean_, running_var_;
    DenseTensor normalized_;
    std::vector<double> inv_std_;
    Mode mode_ = Mode::Train;
    bool cached_ = false;
};

class ZeroPadLayer : public Layer {
public:
    explicit ZeroPadLayer(std::size_t pad);

    std::string kind() const override { return "zero-pad"; }
    Shape output_shape(const Shape& input) const override;
    DenseTensor forward(const DenseTensor& batch, Mode mode) override;
    DenseTensor backward(const DenseTensor& grad_out) override;

private:
    std::size_t pad_;
    Shape input_shape_;
};

// Gradient of tt_full with respect to every core, concatenated in core order.
std::vector<double> tt_full_backward(const TTTensor& tt, std::span<const double> grad_full);

}  // namespace ttconv
