#pragma once

#include <cstddef>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/linalg.hpp"

namespace ttconv {

// W x H x C image.
class ConvInput {
public:
    explicit ConvInput(DenseTensor t);
    const DenseTensor& tensor() const noexcept { return t_; }
    std::size_t width() const { return t_.dim(0); }
    std::size_t height() const { return t_.dim(1); }
    std::size_t channels() const { return t_.dim(2); }

private:
    DenseTensor t_;
};

// l x l x C x S filter bank.
class ConvKernel {
public:
    explicit ConvKernel(DenseTensor t);
    const DenseTensor& tensor() const noexcept { return t_; }
    std::size_t size() const { return t_.dim(0); }
    std::size_t in_channels() const { return t_.dim(2); }
    std::size_t out_channels() const { return t_.dim(3); }

private:
    DenseTensor t_;
};

// (W-l+1) x (H-l+1) x S response.
class ConvOutput {
public:
    explicit ConvOutput(DenseTensor t);
    const DenseTensor& tensor() const noexcept { return t_; }
    std::size_t width() const { return t_.dim(0); }
    std::size_t height() const { return t_.dim(1); }
    std::size_t channels() const { return t_.dim(2); }

private:
    DenseTensor t_;
};

// Y(x,y,s) = sum_{i,j,c} K(i,j,c,s) X(x+i, y+j, c); no padding, stride 1.
ConvOutput conv2d_direct(const ConvInput& x, const ConvKernel& k);

// Patch matrix of W'H' rows and l^2 C columns. Row x + W'y holds the patch at
// output pixel (x, y); column i + l*j + l^2*c holds X(x+i, y+j, c).
RowMatrix im2col(const ConvInput& x, std::size_t filter);

// Adjoint of im2col: scatters patch-matrix entries back onto a W x H x C image.
DenseTensor col2im(const RowMatrix& patches, std::size_t width, std::size_t height,
                   std::size_t channels, std::size_t filter);

// l^2 C x S matrix with K(i,j,c,s) at row i + l*j + l^2*c.
RowMatrix kernel_to_matrix(const ConvKernel& k);
ConvKernel matrix_to_kernel(const RowMatrix& m, std::size_t filter, std::size_t in_channels);

// im2col(x) * kernel_to_matrix(k), with row x + W'y reshaped back to (x, y).
ConvOutput conv2d_gemm(const ConvInput& x, const ConvKernel& k);

// W'H' x S output matrix to the W' x H' x S tensor and back.
ConvOutput output_from_matrix(const RowMatrix& y, std::size_t width, std::size_t height);
RowMatrix output_to_matrix(const DenseTensor& y);

// Symmetric zero border of `pad` pixels on both spatial axes.
DenseTensor zero_pad_spatial(const DenseTensor& x, std::size_t pad);

}  // namespace ttconv
