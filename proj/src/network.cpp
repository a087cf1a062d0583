#include "ttconv/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

namespace {

void check_logits(const DenseTensor& logits, std::span<const int> labels) {
    if (logits.order() != 2) throw ShapeError("logits must be an (N, K) batch");
    if (labels.size() != logits.dim(0)) {
        throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                         std::to_string(logits.dim(0)));
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= logits.dim(1)) {
            throw ArgumentError("label " + std::to_string(y) + " out of range");
        }
    }
}

}  // namespace

double SoftmaxCrossEntropy::loss(const DenseTensor& logits, std::span<const int> labels) {
    check_logits(logits, labels);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits.data().subspan(i * k, k);
        const double top = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double z : row) sum += std::exp(z - top);
        total += top + std::log(sum) - row[static_cast<std::size_t>(labels[i])];
    }
    return total / static_cast<double>(n);
}

long double SoftmaxCrossEntropy::loss_extended(const DenseTensor& logits,
                                              std::span<const int> labels) {
    check_logits(logits, labels);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    long double total = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits.data().subspan(i * k, k);
        const long double top = *std::max_element(row.begin(), row.end());
        long double sum = 0.0L;
        for (double z : row) sum += std::exp(static_cast<long double>(z) - top);
        total += top + std::log(sum) - row[static_cast<std::size_t>(labels[i])];
    }
    return total / static_cast<long double>(n);
}

DenseTensor SoftmaxCrossEntropy::gradient(const DenseTensor& logits, std::span<const int> labels,
                                          double loss_scale) {
    check_logits(logits, labels);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    const double scale = loss_scale / static_cast<double>(n);
    DenseTensor g(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits.data().subspan(i * k, k);
        const double top = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double z : row) sum += std::exp(z - top);
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - top) / sum;
            g[i * k + j] = scale * (p - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0));
        }
    }
    return g;
}

Network::Network(Shape input_shape) : input_shape_(std::move(input_shape)) {
    if (input_shape_.empty()) throw ShapeError("network input shape must be non-empty");
}

void Network::add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    has_forward_ = false;
}

Shape Network::output_shape() const {
    Shape s = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            s = layers_[i]->output_shape(s);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layers_[i]->kind() + "): " + e.what());
        }
    }
    return s;
}

DenseTensor Network::run(const DenseTensor& batch, Mode mode) {
    if (batch.order() != input_shape_.size() + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
        throw ShapeError("batch does not match the network input shape");
    }
    const Shape out = output_shape();
    DenseTensor x = batch;
    for (auto& layer : layers_) x = layer->forward(x, mode);
    // Whatever the last layer emits is read as one logit row per sample.
    return x.reshaped({batch.dim(0), shape_product(out)});
}

ForwardResult Network::forward(const DenseTensor& batch, std::span<const int> labels, Mode mode) {
    DenseTensor z = run(batch, mode);
    const double loss = SoftmaxCrossEntropy::loss(z, labels);
    logits_ = z;
    output_batch_shape_ = {batch.dim(0)};
    const Shape out = output_shape();
    output_batch_shape_.insert(output_batch_shape_.end(), out.begin(), out.end());
    labels_.assign(labels.begin(), labels.end());
    has_forward_ = true;
    return {std::move(z), loss};
}

DenseTensor Network::logits(const DenseTensor& batch, Mode mode) { return run(batch, mode); }

std::vector<double> Network::backward(double loss_scale) {
    if (!has_forward_) throw StateError("Network::backward called before forward");
    for (auto& layer : layers_) layer->zero_grads();
    DenseTensor g =
        SoftmaxCrossEntropy::gradient(logits_, labels_, loss_scale).reshaped(output_batch_shape_);
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    input_grad_ = std::move(g);
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& layer : layers_) flat.insert(flat.end(), layer->grads().begin(), layer->grads().end());
    return flat;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer->params().size();
    return n;
}

std::size_t Network::dense_param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer->dense_param_count();
    return n;
}

std::vector<double> Network::parameters() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& layer : layers_) flat.insert(flat.end(), layer->params().begin(), layer->params().end());
    return flat;
}

void Network::set_parameters(std::span<const double> values) {
    if (values.size() != param_count()) {
        throw ShapeError("expected " + std::to_string(param_count()) + " parameters, got " +
                         std::to_string(values.size()));
    }
    std::size_t offset = 0;
    for (auto& layer : layers_) {
        auto p = layer->params();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), p.size(), p.begin());
        offset += p.size();
    }
}

std::size_t Network::param_offset(std::size_t i) const {
    if (i > layers_.size()) throw IndexError("layer index out of range");
    std::size_t offset = 0;
    for (std::size_t j = 0; j < i; ++j) offset += layers_[j]->params().size();
    return offset;
}

}  // namespace ttconv
