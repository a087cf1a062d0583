#include "ttconv/conv.hpp"

#include <string>

#include "ttconv/errors.hpp"

namespace ttconv {

ConvInput::ConvInput(DenseTensor t) : t_(std::move(t)) {
    if (t_.order() != 3) throw ShapeError("conv input must be W x H x C");
}

ConvKernel::ConvKernel(DenseTensor t) : t_(std::move(t)) {
    if (t_.order() != 4) throw ShapeError("conv kernel must be l x l x C x S");
    if (t_.dim(0) != t_.dim(1)) throw ShapeError("conv kernel must be square");
}

ConvOutput::ConvOutput(DenseTensor t) : t_(std::move(t)) {
    if (t_.order() != 3) throw ShapeError("conv output must be W' x H' x S");
}

namespace {

void check_compatible(const ConvInput& x, std::size_t filter, std::size_t in_channels) {
    if (filter > x.width() || filter > x.height()) {
        throw ShapeError("filter size " + std::to_string(filter) + " exceeds input " +
                         std::to_string(x.width()) + "x" + std::to_string(x.height()));
    }
    if (in_channels != x.channels()) {
        throw ShapeError("kernel expects " + std::to_string(in_channels) +
                         " input channels, input has " + std::to_string(x.channels()));
    }
}

}  // namespace

ConvOutput conv2d_direct(const ConvInput& x, const ConvKernel& k) {
    const std::size_t l = k.size();
    check_compatible(x, l, k.in_channels());
    const std::size_t W = x.width(), H = x.height(), C = x.channels(), S = k.out_channels();
    const std::size_t Wo = W - l + 1, Ho = H - l + 1;
    const auto xin = x.tensor().data();
    const auto ker = k.tensor().data();
    DenseTensor y({Wo, Ho, S});
    for (std::size_t ox = 0; ox < Wo; ++ox) {
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t s = 0; s < S; ++s) {
                double acc = 0.0;
                for (std::size_t i = 0; i < l; ++i) {
                    for (std::size_t j = 0; j < l; ++j) {
                        for (std::size_t c = 0; c < C; ++c) {
                            acc += ker[((i * l + j) * C + c) * S + s] *
                                   xin[((ox + i) * H + (oy + j)) * C + c];
                        }
                    }
                }
                y[(ox * Ho + oy) * S + s] = acc;
            }
        }
    }
    return ConvOutput(std::move(y));
}

RowMatrix im2col(const ConvInput& x, std::size_t filter) {
    check_compatible(x, filter, x.channels());
    const std::size_t l = filter;
    const std::size_t W = x.width(), H = x.height(), C = x.channels();
    const std::size_t Wo = W - l + 1, Ho = H - l + 1;
    const auto xin = x.tensor().data();
    RowMatrix m(static_cast<Eigen::Index>(Wo * Ho), static_cast<Eigen::Index>(l * l * C));
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            double* row = m.row(static_cast<Eigen::Index>(ox + Wo * oy)).data();
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t j = 0; j < l; ++j) {
                    for (std::size_t i = 0; i < l; ++i) {
                        row[i + l * j + l * l * c] = xin[((ox + i) * H + (oy + j)) * C + c];
                    }
                }
            }
        }
    }
    return m;
}

DenseTensor col2im(const RowMatrix& patches, std::size_t width, std::size_t height,
                   std::size_t channels, std::size_t filter) {
    const std::size_t l = filter;
    if (l == 0 || l > width || l > height) throw ShapeError("col2im: bad filter size");
    const std::size_t Wo = width - l + 1, Ho = height - l + 1;
    if (static_cast<std::size_t>(patches.rows()) != Wo * Ho ||
        static_cast<std::size_t>(patches.cols()) != l * l * channels) {
        throw ShapeError("col2im: patch matrix shape mismatch");
    }
    DenseTensor x({width, height, channels});
    for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            const double* row = patches.row(static_cast<Eigen::Index>(ox + Wo * oy)).data();
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t j = 0; j < l; ++j) {
                    for (std::size_t i = 0; i < l; ++i) {
                        x[((ox + i) * height + (oy + j)) * channels + c] +=
                            row[i + l * j + l * l * c];
                    }
                }
            }
        }
    }
    return x;
}

RowMatrix kernel_to_matrix(const ConvKernel& k) {
    const std::size_t l = k.size(), C = k.in_channels(), S = k.out_channels();
    const auto ker = k.tensor().data();
    RowMatrix m(static_cast<Eigen::Index>(l * l * C), static_cast<Eigen::Index>(S));
    for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t s = 0; s < S; ++s) {
                    m(static_cast<Eigen::Index>(i + l * j + l * l * c),
                      static_cast<Eigen::Index>(s)) = ker[((i * l + j) * C + c) * S + s];
                }
            }
        }
    }
    return m;
}

ConvKernel matrix_to_kernel(const RowMatrix& m, std::size_t filter, std::size_t in_channels) {
    const std::size_t l = filter, C = in_channels;
    if (static_cast<std::size_t>(m.rows()) != l * l * C) {
        throw ShapeError("kernel matrix must have l^2 C rows");
    }
    const auto S = static_cast<std::size_t>(m.cols());
    DenseTensor k({l, l, C, S});
    for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t s = 0; s < S; ++s) {
                    k[((i * l + j) * C + c) * S + s] =
                        m(static_cast<Eigen::Index>(i + l * j + l * l * c),
                          static_cast<Eigen::Index>(s));
                }
            }
        }
    }
    return ConvKernel(std::move(k));
}

ConvOutput output_from_matrix(const RowMatrix& y, std::size_t width, std::size_t height) {
    if (static_cast<std::size_t>(y.rows()) != width * height) {
        throw ShapeError("output matrix must have W'H' rows");
    }
    const auto S = static_cast<std::size_t>(y.cols());
    DenseTensor out({width, height, S});
    for (std::size_t oy = 0; oy < height; ++oy) {
        for (std::size_t ox = 0; ox < width; ++ox) {
            for (std::size_t s = 0; s < S; ++s) {
                out[(ox * height + oy) * S + s] =
                    y(static_cast<Eigen::Index>(ox + width * oy), static_cast<Eigen::Index>(s));
            }
        }
    }
    return ConvOutput(std::move(out));
}

RowMatrix output_to_matrix(const DenseTensor& y) {
    if (y.order() != 3) throw ShapeError("output tensor must be W' x H' x S");
    const std::size_t W = y.dim(0), H = y.dim(1), S = y.dim(2);
    RowMatrix m(static_cast<Eigen::Index>(W * H), static_cast<Eigen::Index>(S));
    for (std::size_t oy = 0; oy < H; ++oy) {
        for (std::size_t ox = 0; ox < W; ++ox) {
            for (std::size_t s = 0; s < S; ++s) {
                m(static_cast<Eigen::Index>(ox + W * oy), static_cast<Eigen::Index>(s)) =
                    y[(ox * H + oy) * S + s];
            }
        }
    }
    return m;
}

ConvOutput conv2d_gemm(const ConvInput& x, const ConvKernel& k) {
    check_compatible(x, k.size(), k.in_channels());
    const RowMatrix y = im2col(x, k.size()) * kernel_to_matrix(k);
    return output_from_matrix(y, x.width() - k.size() + 1, x.height() - k.size() + 1);
}

DenseTensor zero_pad_spatial(const DenseTensor& x, std::size_t pad) {
    if (x.order() != 3) throw ShapeError("zero_pad_spatial expects W x H x C");
    if (pad == 0) return x;
    const std::size_t W = x.dim(0), H = x.dim(1), C = x.dim(2);
    const std::size_t Wp = W + 2 * pad, Hp = H + 2 * pad;
    DenseTensor out({Wp, Hp, C});
    for (std::size_t ix = 0; ix < W; ++ix) {
        for (std::size_t iy = 0; iy < H; ++iy) {
            for (std::size_t c = 0; c < C; ++c) {
                out[((ix + pad) * Hp + iy + pad) * C + c] = x[(ix * H + iy) * C + c];
            }
        }
    }
    return out;
}

}  // namespace ttconv
