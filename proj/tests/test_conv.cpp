#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ttconv/conv.hpp"
#include "ttconv/errors.hpp"

using namespace ttconv;

namespace {

DenseTensor grid3x3() { return DenseTensor({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}); }

}  // namespace

TEST(ConvDirect, PointwiseScalarKernelScales) {
    std::mt19937_64 rng(1);
    const DenseTensor x = oracle::random_dense({4, 5, 1}, rng);
    const ConvOutput y = conv2d_direct(ConvInput(x), ConvKernel(DenseTensor({1, 1, 1, 1}, {2.0})));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.tensor()[i], 2.0 * x[i]);
}

TEST(ConvDirect, ZeroKernel) {
    std::mt19937_64 rng(2);
    const ConvOutput y =
        conv2d_direct(ConvInput(oracle::random_dense({5, 4, 2}, rng)), ConvKernel(DenseTensor({3, 3, 2, 3})));
    EXPECT_EQ(y.tensor().max_abs(), 0.0);
    EXPECT_EQ(y.tensor().shape(), (Shape{3, 2, 3}));
}

TEST(ConvDirect, PatchSumsOnSmallGrid) {
    const DenseTensor k({2, 2, 1, 1}, {1, 1, 1, 1});
    const ConvOutput y = conv2d_direct(ConvInput(grid3x3()), ConvKernel(k));
    EXPECT_EQ(y.tensor(), DenseTensor({2, 2, 1}, {12, 16, 24, 28}));
    EXPECT_EQ(y.tensor(), oracle::conv_eq1(grid3x3(), k));
}

TEST(ConvDirect, ShapeErrors) {
    EXPECT_THROW(conv2d_direct(ConvInput(DenseTensor({2, 2, 1})), ConvKernel(DenseTensor({3, 3, 1, 1}))),
                 ShapeError);
    EXPECT_THROW(conv2d_direct(ConvInput(DenseTensor({4, 4, 2})), ConvKernel(DenseTensor({3, 3, 1, 1}))),
                 ShapeError);
    EXPECT_THROW(ConvKernel(DenseTensor({2, 3, 1, 1})), ShapeError);
    EXPECT_THROW(ConvInput(DenseTensor({2, 3})), ShapeError);
}

TEST(Im2col, PointwiseRowsArePixelChannelVectors) {
    std::mt19937_64 rng(3);
    const DenseTensor x = oracle::random_dense({3, 2, 4}, rng);
    const RowMatrix m = im2col(ConvInput(x), 1);
    ASSERT_EQ(m.rows(), 6);
    ASSERT_EQ(m.cols(), 4);
    for (std::size_t px = 0; px < 3; ++px)
        for (std::size_t py = 0; py < 2; ++py)
            for (std::size_t c = 0; c < 4; ++c)
                EXPECT_EQ(m(static_cast<Eigen::Index>(px + 3 * py), static_cast<Eigen::Index>(c)),
                          x.at({px, py, c}));
}

TEST(Im2col, SmallGridLayout) {
    const RowMatrix m = im2col(ConvInput(grid3x3()), 2);
    ASSERT_EQ(m.rows(), 4);
    ASSERT_EQ(m.cols(), 4);
    // Row for output pixel (1,1): X(1,1), X(2,1), X(1,2), X(2,2).
    EXPECT_EQ(m.row(0), (Eigen::RowVector4d(1, 4, 2, 5)));
}

TEST(Im2col, MatchesIndexFormulaOracle) {
    std::mt19937_64 rng(4);
    const std::size_t W = 5, H = 4, C = 3, l = 2;
    const DenseTensor x = oracle::random_dense({W, H, C}, rng);
    const RowMatrix m = im2col(ConvInput(x), l);
    const std::size_t Wo = W - l + 1, Ho = H - l + 1;
    for (std::size_t px = 1; px <= Wo; ++px)
        for (std::size_t py = 1; py <= Ho; ++py)
            for (std::size_t i = 1; i <= l; ++i)
                for (std::size_t j = 1; j <= l; ++j)
                    for (std::size_t c = 1; c <= C; ++c)
                        EXPECT_EQ(m(static_cast<Eigen::Index>(px + Wo * (py - 1) - 1),
                                    static_cast<Eigen::Index>(i + l * (j - 1) + l * l * (c - 1) - 1)),
                                  x.at({px + i - 2, py + j - 2, c - 1}));
}

TEST(Im2col, ConstantInputGivesIdenticalRows) {
    const DenseTensor x({4, 4, 2}, std::vector<double>(32, 1.5));
    const RowMatrix m = im2col(ConvInput(x), 3);
    for (Eigen::Index r = 1; r < m.rows(); ++r) EXPECT_EQ(m.row(r), m.row(0));
}

TEST(Col2im, IsAdjointOfIm2col) {
    std::mt19937_64 rng(5);
    const DenseTensor x = oracle::random_dense({5, 6, 2}, rng);
    const RowMatrix m = im2col(ConvInput(x), 3);
    RowMatrix p(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = std::normal_distribution<double>()(rng);
    const DenseTensor back = col2im(p, 5, 6, 2, 3);
    double lhs = (m.array() * p.array()).sum();
    double rhs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(KernelToMatrix, PointwiseKernel) {
    std::mt19937_64 rng(6);
    const DenseTensor k = oracle::random_dense({1, 1, 3, 2}, rng);
    const RowMatrix m = kernel_to_matrix(ConvKernel(k));
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t s = 0; s < 2; ++s)
            EXPECT_EQ(m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)), k.at({0, 0, c, s}));
}

TEST(KernelToMatrix, SpatialOrder) {
    const DenseTensor k({2, 2, 1, 1}, {11, 12, 21, 22});  // K(i,j) = 10*i + j (1-based)
    const RowMatrix m = kernel_to_matrix(ConvKernel(k));
    EXPECT_EQ(m.col(0), (Eigen::Vector4d(11, 21, 12, 22)));
}

TEST(KernelToMatrix, RoundTrip) {
    std::mt19937_64 rng(7);
    const ConvKernel k(oracle::random_dense({3, 3, 4, 5}, rng));
    EXPECT_EQ(matrix_to_kernel(kernel_to_matrix(k), 3, 4).tensor(), k.tensor());
}

TEST(ConvGemm, MatchesDirectOnRandomConfigs) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t W = oracle::uniform(rng, 1, 8), H = oracle::uniform(rng, 1, 8);
        const std::size_t l = oracle::uniform(rng, 1, std::min(W, H));
        const std::size_t C = oracle::uniform(rng, 1, 8), S = oracle::uniform(rng, 1, 8);
        const DenseTensor x = oracle::random_dense({W, H, C}, rng);
        const DenseTensor k = oracle::random_dense({l, l, C, S}, rng);
        const DenseTensor ref = oracle::conv_eq1(x, k);
        const DenseTensor direct = conv2d_direct(ConvInput(x), ConvKernel(k)).tensor();
        const DenseTensor gemm = conv2d_gemm(ConvInput(x), ConvKernel(k)).tensor();
        ASSERT_EQ(gemm.shape(), (Shape{W - l + 1, H - l + 1, S}));
        const double tol = 1e-12 * (1 + ref.max_abs());
        EXPECT_LE(oracle::max_abs_diff(direct.data(), ref.data()), tol);
        EXPECT_LE(oracle::max_abs_diff(gemm.data(), direct.data()), tol);
    }
}

TEST(ConvGemm, PointwiseIsPerPixelMatvec) {
    std::mt19937_64 rng(9);
    const DenseTensor x = oracle::random_dense({3, 3, 4}, rng);
    const DenseTensor k = oracle::random_dense({1, 1, 4, 2}, rng);
    const DenseTensor y = conv2d_gemm(ConvInput(x), ConvKernel(k)).tensor();
    for (std::size_t px = 0; px < 3; ++px)
        for (std::size_t py = 0; py < 3; ++py)
            for (std::size_t s = 0; s < 2; ++s) {
                double acc = 0.0;
                for (std::size_t c = 0; c < 4; ++c) acc += k.at({0, 0, c, s}) * x.at({px, py, c});
                EXPECT_NEAR(y.at({px, py, s}), acc, 1e-13);
            }
}

TEST(ConvGemm, ZeroInput) {
    std::mt19937_64 rng(10);
    const DenseTensor y =
        conv2d_gemm(ConvInput(DenseTensor({6, 6, 3})), ConvKernel(oracle::random_dense({3, 3, 3, 4}, rng))).tensor();
    EXPECT_EQ(y.max_abs(), 0.0);
}

TEST(ConvProperty, Linearity) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseTensor x1 = oracle::random_dense({6, 5, 3}, rng);
        const DenseTensor x2 = oracle::random_dense({6, 5, 3}, rng);
        const ConvKernel k(oracle::random_dense({3, 3, 3, 2}, rng));
        const double a = 0.7, b = -1.3;
        DenseTensor mix({6, 5, 3});
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
        const DenseTensor y = conv2d_gemm(ConvInput(mix), k).tensor();
        const DenseTensor y1 = conv2d_gemm(ConvInput(x1), k).tensor();
        const DenseTensor y2 = conv2d_gemm(ConvInput(x2), k).tensor();
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], a * y1[i] + b * y2[i], 1e-12 * (1 + std::abs(y[i])));
    }
}

TEST(ZeroPad, BorderIsZero) {
    const DenseTensor p = zero_pad_spatial(grid3x3(), 1);
    EXPECT_EQ(p.shape(), (Shape{5, 5, 1}));
    EXPECT_EQ(p.at({0, 0, 0}), 0.0);
    EXPECT_EQ(p.at({1, 1, 0}), 1.0);
    EXPECT_EQ(p.at({3, 3, 0}), 9.0);
    EXPECT_EQ(p.at({4, 2, 0}), 0.0);
}
