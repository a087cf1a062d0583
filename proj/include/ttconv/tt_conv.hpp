#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ttconv/conv.hpp"
#include "ttconv/core_chain.hpp"
#include "ttconv/tt_matrix.hpp"
#include "ttconv/tt_tensor.hpp"

namespace ttconv {

// Channel counts C and S split into d little-endian digits each, after
// appending pad_c / pad_s zero channels.
struct ChannelFactorization {
    Factors c_factors;
    Factors s_factors;
    std::size_t pad_c = 0;
    std::size_t pad_s = 0;

    std::size_t levels() const { return c_factors.size(); }
    std::size_t padded_in() const;
    std::size_t padded_out() const;
    std::size_t in_channels() const { return padded_in() - pad_c; }
    std::size_t out_channels() const { return padded_out() - pad_s; }
    void validate() const;

    friend bool operator==(const ChannelFactorization&, const ChannelFactorization&) = default;
};

// Pads each of C and S to a count with at least d prime factors (next power
// of two, at least 2^d, when C has fewer) and picks the most balanced
// descending factorization.
ChannelFactorization factorize_channels(std::size_t in_channels, std::size_t out_channels,
                                        std::size_t levels);

// Balanced descending split of n into exactly `levels` factors, each >= 2
// unless n == 1. Throws ArgumentError if no such split exists.
Factors balanced_factors(std::size_t n, std::size_t levels);

// Kernel K(x,y,c,s) = G0[x,y] G1[c1,s1] ... Gd[cd,sd]. The underlying TT has
// modes (l^2, C1*S1, ..., Cd*Sd); mode 0 is indexed x + l*y and mode k by
// c_k * S_k + s_k.
class TTConvKernel {
public:
    TTConvKernel() = default;
    TTConvKernel(std::size_t filter, ChannelFactorization fact, TTTensor tt);

    // Gaussian cores scaled so the reconstructed kernel has element variance
    // `kernel_variance`. ranks = (r1, ..., rd).
    static TTConvKernel random(std::size_t filter, ChannelFactorization fact,
                               const Ranks& ranks, std::mt19937_64& rng,
                               double kernel_variance);

    std::size_t filter() const noexcept { return filter_; }
    const ChannelFactorization& factorization() const noexcept { return fact_; }
    const TTTensor& tt() const noexcept { return tt_; }
    const Ranks& ranks() const noexcept { return tt_.ranks(); }
    std::size_t in_channels() const { return fact_.in_channels(); }
    std::size_t out_channels() const { return fact_.out_channels(); }

    // G0[x,y], a 1 x r1 row.
    ConstStridedMatrixMap g0(std::size_t x, std::size_t y) const;
    // G_k[c_k, s_k] for k = 1..d.
    ConstStridedMatrixMap core_slice(std::size_t k, std::size_t c, std::size_t s) const;

    friend bool operator==(const TTConvKernel&, const TTConvKernel&) = default;

private:
    std::size_t filter_ = 0;
    ChannelFactorization fact_;
    TTTensor tt_;
};

// 1x1 kernel with all ranks 1 and G_k[c,s] = [c == s]; requires C_k == S_k.
TTConvKernel ttconv_identity(const ChannelFactorization& fact);

// The (d+1)-mode tensor that ttconv_from_dense decomposes.
DenseTensor ttconv_reshape(const ConvKernel& k, const ChannelFactorization& fact);

// max_ranks, when given, lists (r1, ..., rd).
TTConvKernel ttconv_from_dense(const ConvKernel& k, const ChannelFactorization& fact,
                               const Truncation& truncation);
ConvKernel ttconv_to_dense(const TTConvKernel& tk);

std::size_t ttconv_param_count(const TTConvKernel& tk);

// Intermediates of one forward pass, kept for the backward pass.
struct TTConvTrace {
    std::size_t width = 0;
    std::size_t height = 0;
    RowMatrix patches;                        // im2col of the channel-padded input
    std::vector<std::vector<double>> states;  // input to each channel core
};

std::vector<ChainStep> ttconv_chain_steps(const TTConvKernel& tk, std::size_t pixels);

// Contracts the spatial core against input patches, then the channel cores
// one at a time; the dense kernel is never formed.
ConvOutput ttconv_forward(const ConvInput& x, const TTConvKernel& tk);
ConvOutput ttconv_forward(const ConvInput& x, const TTConvKernel& tk, TTConvTrace& trace);

// Returns dL/dX and accumulates dL/dcores (concatenated in TT core order).
DenseTensor ttconv_backward(const TTConvKernel& tk, const TTConvTrace& trace,
                            const DenseTensor& grad_out, std::span<double> grad_cores);

// For l == 1: the TT-matrix of the S_padded x C_padded map applied per pixel,
// sharing the channel cores (G0 folded into the first one).
TTMatrix pointwise_ttmatrix(const TTConvKernel& tk);

// TT of the raw l x l x C x S kernel tensor.
struct NaiveTTConvKernel {
    TTTensor tt;

    std::size_t filter() const { return tt.mode_size(0); }
    std::size_t in_channels() const { return tt.mode_size(2); }
    std::size_t out_channels() const { return tt.mode_size(3); }
    friend bool operator==(const NaiveTTConvKernel&, const NaiveTTConvKernel&) = default;
};

NaiveTTConvKernel naive_ttconv_from_dense(const ConvKernel& k, const Truncation& truncation);
ConvKernel naive_ttconv_to_dense(const NaiveTTConvKernel& nk);
ConvOutput naive_ttconv_forward(const ConvInput& x, const NaiveTTConvKernel& nk);

double compression_ratio(std::size_t dense_params, std::size_t compressed_params);

}  // namespace ttconv
