#include "ttconv/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

namespace {

using Eigen::Index;

Shape sample_shape(const DenseTensor& batch) {
    if (batch.order() < 2) throw ShapeError("batch tensor needs a leading batch axis");
    return Shape(batch.shape().begin() + 1, batch.shape().end());
}

Shape with_batch(std::size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

void check_image(const std::string& who, const Shape& in) {
    if (in.size() != 3) throw ShapeError(who + " expects W x H x C samples");
}

ConvInput sample_image(const DenseTensor& batch, std::size_t n) {
    const Shape s = sample_shape(batch);
    const std::size_t size = shape_product(s);
    const auto src = batch.data().subspan(n * size, size);
    return ConvInput(DenseTensor(s, std::vector<double>(src.begin(), src.end())));
}

void put_sample(DenseTensor& batch, std::size_t n, const DenseTensor& sample) {
    std::copy(sample.data().begin(), sample.data().end(),
              batch.data().begin() + static_cast<std::ptrdiff_t>(n * sample.size()));
}

std::vector<double> gaussian(std::size_t n, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

Shape conv_output(const std::string& who, const Shape& in, std::size_t filter,
                  std::size_t channels, std::size_t out_channels) {
    check_image(who, in);
    if (in[2] != channels) {
        throw ShapeError(who + " expects " + std::to_string(channels) + " input channels, got " +
                         std::to_string(in[2]));
    }
    if (in[0] < filter || in[1] < filter) throw ShapeError(who + ": filter larger than input");
    return {in[0] - filter + 1, in[1] - filter + 1, out_channels};
}

}  // namespace

void Layer::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void Layer::allocate(std::size_t n) {
    params_.assign(n, 0.0);
    grads_.assign(n, 0.0);
}

void Layer::require_forward(bool cached) const {
    if (!cached) throw StateError(kind() + ": backward called before forward");
}

// ---------------------------------------------------------------- dense conv

DenseConvLayer::DenseConvLayer(std::size_t filter, std::size_t in_channels,
                               std::size_t out_channels, std::mt19937_64& rng)
    : filter_(filter), in_(in_channels), out_(out_channels) {
    if (filter == 0 || in_channels == 0 || out_channels == 0) {
        throw ArgumentError("dense-conv sizes must be positive");
    }
    params_ = gaussian(filter * filter * in_channels * out_channels,
                       std::sqrt(2.0 / static_cast<double>(filter * filter * in_channels)), rng);
    grads_.assign(params_.size(), 0.0);
}

Shape DenseConvLayer::output_shape(const Shape& input) const {
    return conv_output(kind(), input, filter_, in_, out_);
}

ConvKernel DenseConvLayer::kernel() const {
    return ConvKernel(DenseTensor({filter_, filter_, in_, out_}, params_));
}

void DenseConvLayer::set_kernel(const ConvKernel& k) {
    if (k.tensor().shape() != Shape{filter_, filter_, in_, out_}) {
        throw ShapeError("dense-conv: kernel shape mismatch");
    }
    std::copy(k.tensor().data().begin(), k.tensor().data().end(), params_.begin());
}

DenseTensor DenseConvLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    const RowMatrix kmat = kernel_to_matrix(kernel());
    DenseTensor y(with_batch(n, out));
    patches_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        patches_.push_back(im2col(sample_image(batch, i), filter_));
        const RowMatrix ym = patches_.back() * kmat;
        put_sample(y, i, output_from_matrix(ym, out[0], out[1]).tensor());
    }
    return y;
}

DenseTensor DenseConvLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    const std::size_t n = patches_.size();
    const Shape out = output_shape(input_shape_);
    if (grad_out.shape() != with_batch(n, out)) throw ShapeError("dense-conv: gradient shape");
    const RowMatrix kmat = kernel_to_matrix(kernel());
    RowMatrix dk = RowMatrix::Zero(kmat.rows(), kmat.cols());
    DenseTensor dx(with_batch(n, input_shape_));
    for (std::size_t i = 0; i < n; ++i) {
        const RowMatrix dy = output_to_matrix(sample_image(grad_out, i).tensor());
        dk.noalias() += patches_[i].transpose() * dy;
        const RowMatrix dp = dy * kmat.transpose();
        put_sample(dx, i, col2im(dp, input_shape_[0], input_shape_[1], in_, filter_));
    }
    const ConvKernel dker = matrix_to_kernel(dk, filter_, in_);
    for (std::size_t j = 0; j < grads_.size(); ++j) grads_[j] += dker.tensor()[j];
    return dx;
}

// ---------------------------------------------------------------- TT conv

TTConvLayer::TTConvLayer(std::size_t filter, ChannelFactorization fact, const Ranks& ranks,
                         std::mt19937_64& rng)
    : TTConvLayer(TTConvKernel::random(
          filter, fact, ranks, rng,
          2.0 / static_cast<double>(filter * filter * fact.in_channels()))) {}

TTConvLayer::TTConvLayer(const TTConvKernel& kernel)
    : filter_(kernel.filter()),
      fact_(kernel.factorization()),
      modes_(kernel.tt().mode_sizes()),
      ranks_(kernel.tt().ranks()) {
    for (const auto& core : kernel.tt().cores()) params_.insert(params_.end(), core.begin(), core.end());
    grads_.assign(params_.size(), 0.0);
}

Shape TTConvLayer::output_shape(const Shape& input) const {
    return conv_output(kind(), input, filter_, fact_.in_channels(), fact_.out_channels());
}

std::size_t TTConvLayer::dense_param_count() const {
    return filter_ * filter_ * fact_.in_channels() * fact_.out_channels();
}

TTConvKernel TTConvLayer::kernel() const {
    std::vector<std::vector<double>> cores;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        const std::size_t size = ranks_[k] * modes_[k] * ranks_[k + 1];
        cores.emplace_back(params_.begin() + static_cast<std::ptrdiff_t>(offset),
                           params_.begin() + static_cast<std::ptrdiff_t>(offset + size));
        offset += size;
    }
    return TTConvKernel(filter_, fact_, TTTensor(modes_, ranks_, std::move(cores)));
}

DenseTensor TTConvLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    const TTConvKernel tk = kernel();
    DenseTensor y(with_batch(n, out));
    traces_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        put_sample(y, i, ttconv_forward(sample_image(batch, i), tk, traces_[i]).tensor());
    }
    return y;
}

DenseTensor TTConvLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    const std::size_t n = traces_.size();
    if (grad_out.shape() != with_batch(n, output_shape(input_shape_))) {
        throw ShapeError("tt-conv: gradient shape");
    }
    const TTConvKernel tk = kernel();
    DenseTensor dx(with_batch(n, input_shape_));
    for (std::size_t i = 0; i < n; ++i) {
        put_sample(dx, i, ttconv_backward(tk, traces_[i], sample_image(grad_out, i).tensor(), grads_));
    }
    return dx;
}

// ---------------------------------------------------------------- naive TT conv

NaiveTTConvLayer::NaiveTTConvLayer(std::size_t filter, std::size_t in_channels,
                                   std::size_t out_channels, const Ranks& ranks,
                                   std::mt19937_64& rng)
    : filter_(filter), in_(in_channels), out_(out_channels) {
    if (ranks.size() != 3) throw ArgumentError("naive-tt-conv needs 3 interior ranks");
    ranks_ = {1, ranks[0], ranks[1], ranks[2], 1};
    const double variance = 2.0 / static_cast<double>(filter * filter * in_channels);
    const double paths = static_cast<double>(ranks[0] * ranks[1] * ranks[2]);
    const TTTensor tt = TTTensor::random({filter, filter, in_channels, out_channels}, ranks_, rng,
                                         std::sqrt(std::pow(variance / paths, 0.25)));
    for (const auto& core : tt.cores()) params_.insert(params_.end(), core.begin(), core.end());
    grads_.assign(params_.size(), 0.0);
}

Shape NaiveTTConvLayer::output_shape(const Shape& input) const {
    return conv_output(kind(), input, filter_, in_, out_);
}

std::size_t NaiveTTConvLayer::dense_param_count() const { return filter_ * filter_ * in_ * out_; }

NaiveTTConvKernel NaiveTTConvLayer::kernel() const {
    const Shape modes{filter_, filter_, in_, out_};
    std::vector<std::vector<double>> cores;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t size = ranks_[k] * modes[k] * ranks_[k + 1];
        cores.emplace_back(params_.begin() + static_cast<std::ptrdiff_t>(offset),
                           params_.begin() + static_cast<std::ptrdiff_t>(offset + size));
        offset += size;
    }
    return {TTTensor(modes, ranks_, std::move(cores))};
}

DenseTensor NaiveTTConvLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    kernel_matrix_ = kernel_to_matrix(ConvKernel(tt_full(kernel().tt)));
    DenseTensor y(with_batch(n, out));
    patches_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        patches_.push_back(im2col(sample_image(batch, i), filter_));
        const RowMatrix ym = patches_.back() * kernel_matrix_;
        put_sample(y, i, output_from_matrix(ym, out[0], out[1]).tensor());
    }
    return y;
}

DenseTensor NaiveTTConvLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    const std::size_t n = patches_.size();
    if (grad_out.shape() != with_batch(n, output_shape(input_shape_))) {
        throw ShapeError("naive-tt-conv: gradient shape");
    }
    RowMatrix dk = RowMatrix::Zero(kernel_matrix_.rows(), kernel_matrix_.cols());
    DenseTensor dx(with_batch(n, input_shape_));
    for (std::size_t i = 0; i < n; ++i) {
        const RowMatrix dy = output_to_matrix(sample_image(grad_out, i).tensor());
        dk.noalias() += patches_[i].transpose() * dy;
        const RowMatrix dp = dy * kernel_matrix_.transpose();
        put_sample(dx, i, col2im(dp, input_shape_[0], input_shape_[1], in_, filter_));
    }
    const ConvKernel dker = matrix_to_kernel(dk, filter_, in_);
    const auto dcores = tt_full_backward(kernel().tt, dker.tensor().data());
    for (std::size_t j = 0; j < grads_.size(); ++j) grads_[j] += dcores[j];
    return dx;
}

// ---------------------------------------------------------------- dense FC

DenseFCLayer::DenseFCLayer(std::size_t inputs, std::size_t outputs, std::mt19937_64& rng)
    : in_(inputs), out_(outputs) {
    if (inputs == 0 || outputs == 0) throw ArgumentError("dense-fc sizes must be positive");
    params_ = gaussian(inputs * outputs, std::sqrt(2.0 / static_cast<double>(inputs)), rng);
    params_.resize(inputs * outputs + outputs, 0.0);
    grads_.assign(params_.size(), 0.0);
}

Shape DenseFCLayer::output_shape(const Shape& input) const {
    if (shape_product(input) != in_) {
        throw ShapeError("dense-fc expects " + std::to_string(in_) + " features, got " +
                         std::to_string(shape_product(input)));
    }
    return {out_};
}

DenseTensor DenseFCLayer::forward(const DenseTensor& batch, Mode) {
    output_shape(sample_shape(batch));
    const auto n = static_cast<Index>(batch.dim(0));
    input_ = batch;
    cached_ = true;
    ConstMatrixMap x(batch.data().data(), n, static_cast<Index>(in_));
    ConstMatrixMap w(params_.data(), static_cast<Index>(out_), static_cast<Index>(in_));
    Eigen::Map<const Eigen::RowVectorXd> b(params_.data() + in_ * out_, static_cast<Index>(out_));
    DenseTensor y({batch.dim(0), out_});
    MatrixMap ym(y.data().data(), n, static_cast<Index>(out_));
    ym.noalias() = x * w.transpose();
    ym.rowwise() += b;
    return y;
}

DenseTensor DenseFCLayer::backward(const DenseTensor& grad_out) {
    require_forward(cached_);
    const std::size_t n = input_.dim(0);
    if (grad_out.shape() != Shape{n, out_}) throw ShapeError("dense-fc: gradient shape");
    const auto ni = static_cast<Index>(n);
    ConstMatrixMap x(input_.data().data(), ni, static_cast<Index>(in_));
    ConstMatrixMap dy(grad_out.data().data(), ni, static_cast<Index>(out_));
    ConstMatrixMap w(params_.data(), static_cast<Index>(out_), static_cast<Index>(in_));
    MatrixMap dw(grads_.data(), static_cast<Index>(out_), static_cast<Index>(in_));
    Eigen::Map<Eigen::RowVectorXd> db(grads_.data() + in_ * out_, static_cast<Index>(out_));
    dw.noalias() += dy.transpose() * x;
    db += dy.colwise().sum();
    DenseTensor dx(input_.shape());
    MatrixMap dxm(dx.data().data(), ni, static_cast<Index>(in_));
    dxm.noalias() = dy * w;
    return dx;
}

// ---------------------------------------------------------------- TT FC

TTFCLayer::TTFCLayer(Factors in_factors, Factors out_factors, const Ranks& ranks,
                     std::mt19937_64& rng)
    : in_factors_(std::move(in_factors)), out_factors_(std::move(out_factors)) {
    const std::size_t d = in_factors_.size();
    if (d == 0 || out_factors_.size() != d) {
        throw ShapeError("tt-fc needs equal, nonzero numbers of input and output factors");
    }
    if (ranks.size() + 1 != d) throw ArgumentError("tt-fc needs d-1 interior ranks");
    in_ = shape_product(in_factors_);
    out_ = shape_product(out_factors_);
    ranks_ = {1};
    double paths = 1.0;
    for (std::size_t r : ranks) {
        if (r == 0) throw ArgumentError("tt-fc ranks must be positive");
        ranks_.push_back(r);
        paths *= static_cast<double>(r);
    }
    ranks_.push_back(1);
    for (std::size_t k = 0; k < d; ++k) modes_.push_back(out_factors_[k] * in_factors_[k]);
    const double variance = 2.0 / static_cast<double>(in_);
    const TTTensor tt = TTTensor::random(
        modes_, ranks_, rng, std::sqrt(std::pow(variance / paths, 1.0 / static_cast<double>(d))));
    for (const auto& core : tt.cores()) params_.insert(params_.end(), core.begin(), core.end());
    params_.resize(params_.size() + out_, 0.0);
    grads_.assign(params_.size(), 0.0);
}

Shape TTFCLayer::output_shape(const Shape& input) const {
    if (shape_product(input) != in_) {
        throw ShapeError("tt-fc expects " + std::to_string(in_) + " features, got " +
                         std::to_string(shape_product(input)));
    }
    return {out_};
}

std::size_t TTFCLayer::dense_param_count() const { return in_ * out_ + out_; }

TTMatrix TTFCLayer::matrix() const {
    std::vector<std::vector<double>> cores;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        const std::size_t size = ranks_[k] * modes_[k] * ranks_[k + 1];
        cores.emplace_back(params_.begin() + static_cast<std::ptrdiff_t>(offset),
                           params_.begin() + static_cast<std::ptrdiff_t>(offset + size));
        offset += size;
    }
    return TTMatrix(out_factors_, in_factors_, TTTensor(modes_, ranks_, std::move(cores)));
}

std::vector<ChainStep> TTFCLayer::steps(std::size_t batch) const {
    std::vector<ChainStep> steps(modes_.size());
    std::size_t prefix = 1, suffix = in_;
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        ChainStep& st = steps[k];
        st.batch = batch;
        st.prefix = prefix;
        st.rank_in = ranks_[k];
        st.rank_out = ranks_[k + 1];
        st.n_in = in_factors_[k];
        st.n_out = out_factors_[k];
        st.rest = suffix / st.n_in;
        st.order = SliceOrder::OutputMajor;
        prefix *= st.n_out;
        suffix = st.rest;
    }
    return steps;
}

DenseTensor TTFCLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    const auto chain = steps(n);
    std::vector<double> state(batch.data().begin(), batch.data().end());
    states_.clear();
    std::size_t offset = 0;
    for (const ChainStep& st : chain) {
        std::vector<double> next =
            chain_forward(st, state, std::span<const double>(params_).subspan(offset, st.core_size()));
        offset += st.core_size();
        states_.push_back(std::move(state));
        state = std::move(next);
    }
    DenseTensor y({n, out_}, std::move(state));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out_; ++o) y[i * out_ + o] += params_[offset + o];
    }
    return y;
}

DenseTensor TTFCLayer::backward(const DenseTensor& grad_out) {
    require_forward(!states_.empty());
    const std::size_t n = states_.front().size() / in_;
    if (grad_out.shape() != Shape{n, out_}) throw ShapeError("tt-fc: gradient shape");
    const auto chain = steps(n);
    std::vector<std::size_t> offsets{0};
    for (const ChainStep& st : chain) offsets.push_back(offsets.back() + st.core_size());
    const std::size_t bias = offsets.back();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out_; ++o) grads_[bias + o] += grad_out[i * out_ + o];
    }
    std::vector<double> grad(grad_out.data().begin(), grad_out.data().end());
    const std::span<const double> params(params_);
    const std::span<double> grads(grads_);
    for (std::size_t k = chain.size(); k-- > 0;) {
        const std::size_t size = chain[k].core_size();
        grad = chain_backward(chain[k], states_[k], params.subspan(offsets[k], size), grad,
                              grads.subspan(offsets[k], size));
    }
    return DenseTensor(with_batch(n, input_shape_), std::move(grad));
}

// ---------------------------------------------------------------- ReLU

DenseTensor ReluLayer::forward(const DenseTensor& batch, Mode) {
    input_ = batch;
    cached_ = true;
    DenseTensor y = batch;
    for (double& v : y.data()) v = std::max(v, 0.0);
    return y;
}

DenseTensor ReluLayer::backward(const DenseTensor& grad_out) {
    require_forward(cached_);
    if (grad_out.shape() != input_.shape()) throw ShapeError("relu: gradient shape");
    DenseTensor dx = grad_out;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (input_[i] <= 0.0) dx[i] = 0.0;
    }
    return dx;
}

// ---------------------------------------------------------------- max pool

MaxPoolLayer::MaxPoolLayer(std::size_t size, std::size_t stride) : size_(size), stride_(stride) {
    if (size == 0 || stride == 0) throw ArgumentError("max-pool size and stride must be positive");
}

Shape MaxPoolLayer::output_shape(const Shape& input) const {
    check_image(kind(), input);
    if (input[0] < size_ || input[1] < size_) throw ShapeError("max-pool window larger than input");
    return {(input[0] - size_) / stride_ + 1, (input[1] - size_) / stride_ + 1, input[2]};
}

DenseTensor MaxPoolLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    const std::size_t H = input_shape_[1], C = input_shape_[2];
    const std::size_t in_size = shape_product(input_shape_);
    DenseTensor y(with_batch(n, out));
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ox = 0; ox < out[0]; ++ox) {
            for (std::size_t oy = 0; oy < out[1]; ++oy) {
                for (std::size_t c = 0; c < C; ++c, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t arg = 0;
                    bool first = true;
                    for (std::size_t i = 0; i < size_; ++i) {
                        for (std::size_t j = 0; j < size_; ++j) {
                            const std::size_t at = b * in_size +
                                                   ((ox * stride_ + i) * H + oy * stride_ + j) * C + c;
                            if (first || batch[at] > best) {
                                best = batch[at];
                                arg = at;
                                first = false;
                            }
                        }
                    }
                    y[o] = best;
                    argmax_[o] = arg;
                }
            }
        }
    }
    return y;
}

DenseTensor MaxPoolLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    if (grad_out.size() != argmax_.size()) throw ShapeError("max-pool: gradient shape");
    DenseTensor dx(with_batch(argmax_.size() / shape_product(output_shape(input_shape_)), input_shape_));
    for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += grad_out[o];
    return dx;
}

// ---------------------------------------------------------------- avg pool

AvgPoolLayer::AvgPoolLayer(std::size_t size) : size_(size) {
    if (size == 0) throw ArgumentError("avg-pool size must be positive");
}

Shape AvgPoolLayer::output_shape(const Shape& input) const {
    check_image(kind(), input);
    if (input[0] < size_ || input[1] < size_) throw ShapeError("avg-pool window larger than input");
    return {input[0] / size_, input[1] / size_, input[2]};
}

DenseTensor AvgPoolLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    const std::size_t H = input_shape_[1], C = input_shape_[2];
    const std::size_t in_size = shape_product(input_shape_);
    const double scale = 1.0 / static_cast<double>(size_ * size_);
    DenseTensor y(with_batch(n, out));
    std::size_t o = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ox = 0; ox < out[0]; ++ox) {
            for (std::size_t oy = 0; oy < out[1]; ++oy) {
                for (std::size_t c = 0; c < C; ++c, ++o) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < size_; ++i) {
                        for (std::size_t j = 0; j < size_; ++j) {
                            sum += batch[b * in_size + ((ox * size_ + i) * H + oy * size_ + j) * C + c];
                        }
                    }
                    y[o] = sum * scale;
                }
            }
        }
    }
    return y;
}

DenseTensor AvgPoolLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    const Shape out = output_shape(input_shape_);
    const std::size_t n = grad_out.dim(0);
    if (grad_out.shape() != with_batch(n, out)) throw ShapeError("avg-pool: gradient shape");
    const std::size_t H = input_shape_[1], C = input_shape_[2];
    const std::size_t in_size = shape_product(input_shape_);
    const double scale = 1.0 / static_cast<double>(size_ * size_);
    DenseTensor dx(with_batch(n, input_shape_));
    std::size_t o = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ox = 0; ox < out[0]; ++ox) {
            for (std::size_t oy = 0; oy < out[1]; ++oy) {
                for (std::size_t c = 0; c < C; ++c, ++o) {
                    for (std::size_t i = 0; i < size_; ++i) {
                        for (std::size_t j = 0; j < size_; ++j) {
                            dx[b * in_size + ((ox * size_ + i) * H + oy * size_ + j) * C + c] +=
                                grad_out[o] * scale;
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------- batch norm

BatchNormLayer::BatchNormLayer(std::size_t channels, double epsilon, double momentum)
    : channels_(channels),
      epsilon_(epsilon),
      momentum_(momentum),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {
    if (channels == 0) throw ArgumentError("batch-norm needs at least one channel");
    allocate(2 * channels);
    std::fill(params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(channels), 1.0);
}

Shape BatchNormLayer::output_shape(const Shape& input) const {
    if (input.empty() || input.back() != channels_) {
        throw ShapeError("batch-norm expects " + std::to_string(channels_) + " channels on the last axis");
    }
    return input;
}

DenseTensor BatchNormLayer::forward(const DenseTensor& batch, Mode mode) {
    output_shape(sample_shape(batch));
    const std::size_t C = channels_;
    const std::size_t m = batch.size() / C;
    mode_ = mode;
    inv_std_.assign(C, 0.0);
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (mode == Mode::Train) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < C; ++c) mean[c] += batch[i * C + c];
        }
        for (double& v : mean) v /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < C; ++c) {
                const double dv = batch[i * C + c] - mean[c];
                var[c] += dv * dv;
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            var[c] /= static_cast<double>(m);
            const double unbiased = m > 1 ? var[c] * static_cast<double>(m) / static_cast<double>(m - 1) : var[c];
            running_mean_[c] = momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c];
            running_var_[c] = momentum_ * running_var_[c] + (1.0 - momentum_) * unbiased;
        }
    } else {
        mean = running_mean_;
        var = running_var_;
    }
    for (std::size_t c = 0; c < C; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + epsilon_);

    normalized_ = DenseTensor(batch.shape());
    DenseTensor y(batch.shape());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
            const double xh = (batch[i * C + c] - mean[c]) * inv_std_[c];
            normalized_[i * C + c] = xh;
            y[i * C + c] = params_[c] * xh + params_[C + c];
        }
    }
    cached_ = true;
    return y;
}

DenseTensor BatchNormLayer::backward(const DenseTensor& grad_out) {
    require_forward(cached_);
    if (grad_out.shape() != normalized_.shape()) throw ShapeError("batch-norm: gradient shape");
    const std::size_t C = channels_;
    const std::size_t m = grad_out.size() / C;
    std::vector<double> sum_dy(C, 0.0), sum_dy_xh(C, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
            sum_dy[c] += grad_out[i * C + c];
            sum_dy_xh[c] += grad_out[i * C + c] * normalized_[i * C + c];
        }
    }
    for (std::size_t c = 0; c < C; ++c) {
        grads_[c] += sum_dy_xh[c];
        grads_[C + c] += sum_dy[c];
    }
    DenseTensor dx(grad_out.shape());
    const double md = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
            const double g = params_[c] * inv_std_[c];
            if (mode_ == Mode::Eval) {
                dx[i * C + c] = g * grad_out[i * C + c];
            } else {
                dx[i * C + c] = g / md *
                                (md * grad_out[i * C + c] - sum_dy[c] -
                                 normalized_[i * C + c] * sum_dy_xh[c]);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------- zero pad

ZeroPadLayer::ZeroPadLayer(std::size_t pad) : pad_(pad) {}

Shape ZeroPadLayer::output_shape(const Shape& input) const {
    check_image(kind(), input);
    return {input[0] + 2 * pad_, input[1] + 2 * pad_, input[2]};
}

DenseTensor ZeroPadLayer::forward(const DenseTensor& batch, Mode) {
    input_shape_ = sample_shape(batch);
    const Shape out = output_shape(input_shape_);
    const std::size_t n = batch.dim(0);
    DenseTensor y(with_batch(n, out));
    for (std::size_t i = 0; i < n; ++i) {
        put_sample(y, i, zero_pad_spatial(sample_image(batch, i).tensor(), pad_));
    }
    return y;
}

DenseTensor ZeroPadLayer::backward(const DenseTensor& grad_out) {
    require_forward(!input_shape_.empty());
    const Shape out = output_shape(input_shape_);
    const std::size_t n = grad_out.dim(0);
    if (grad_out.shape() != with_batch(n, out)) throw ShapeError("zero-pad: gradient shape");
    const std::size_t W = input_shape_[0], H = input_shape_[1], C = input_shape_[2];
    const std::size_t in_size = W * H * C, out_size = shape_product(out);
    DenseTensor dx(with_batch(n, input_shape_));
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t x = 0; x < W; ++x) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t c = 0; c < C; ++c) {
                    dx[b * in_size + (x * H + y) * C + c] =
                        grad_out[b * out_size + ((x + pad_) * out[1] + y + pad_) * C + c];
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------- tt_full adjoint

std::vector<double> tt_full_backward(const TTTensor& tt, std::span<const double> grad_full) {
    const std::size_t d = tt.order();
    const Shape& n = tt.mode_sizes();
    if (grad_full.size() != shape_product(n)) throw ShapeError("tt_full_backward: gradient size");

    // left[k]: prod_{i<k} n_i x r_k;  right[k]: r_k x prod_{i>=k} n_i.
    std::vector<RowMatrix> left(d + 1), right(d + 1);
    left[0] = RowMatrix::Ones(1, 1);
    for (std::size_t k = 0; k < d; ++k) {
        ConstMatrixMap g(tt.core(k).data(), static_cast<Index>(tt.rank(k)),
                         static_cast<Index>(n[k] * tt.rank(k + 1)));
        RowMatrix prod = left[k] * g;
        left[k + 1] = Eigen::Map<RowMatrix>(prod.data(), prod.rows() * static_cast<Index>(n[k]),
                                            static_cast<Index>(tt.rank(k + 1)));
    }
    right[d] = RowMatrix::Ones(1, 1);
    for (std::size_t k = d; k-- > 0;) {
        ConstMatrixMap g(tt.core(k).data(), static_cast<Index>(tt.rank(k) * n[k]),
                         static_cast<Index>(tt.rank(k + 1)));
        RowMatrix prod = g * right[k + 1];
        right[k] = Eigen::Map<RowMatrix>(prod.data(), static_cast<Index>(tt.rank(k)),
                                         prod.cols() * static_cast<Index>(n[k]));
    }

    std::vector<double> out;
    out.reserve(tt_param_count(tt));
    for (std::size_t k = 0; k < d; ++k) {
        const auto p = left[k].rows();
        const auto q = right[k + 1].cols();
        const auto nk = static_cast<Index>(n[k]);
        ConstMatrixMap df(grad_full.data(), p, nk * q);
        const RowMatrix m = left[k].transpose() * df;  // r_k x (n_k q)
        RowMatrix core(m.rows(), nk * right[k + 1].rows());
        for (Index j = 0; j < nk; ++j) {
            core.middleCols(j * right[k + 1].rows(), right[k + 1].rows()) =
                m.middleCols(j * q, q) * right[k + 1].transpose();
        }
        out.insert(out.end(), core.data(), core.data() + core.size());
    }
    return out;
}

}  // namespace ttconv
