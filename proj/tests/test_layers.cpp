#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttconv/errors.hpp"
#include "ttconv/gradcheck.hpp"
#include "ttconv/network.hpp"

using namespace ttconv;

namespace {

DenseTensor gaussian(const Shape& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return oracle::random_dense(s, rng);
}

// Finite-difference check of dL/dinput with a loose bound; the parameter-free
// layers have nothing else to check.
void expect_input_gradient(Network& net, const DenseTensor& x, const std::vector<int>& labels) {
    net.forward(x, labels);
    net.backward();
    const DenseTensor analytic = net.input_gradient();
    ASSERT_EQ(analytic.shape(), x.shape());
    DenseTensor probe = x;
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const long double up = SoftmaxCrossEntropy::loss_extended(net.forward(probe, labels).logits, labels);
        probe[i] = x[i] - h;
        const long double down = SoftmaxCrossEntropy::loss_extended(net.forward(probe, labels).logits, labels);
        probe[i] = x[i];
        const double numeric = static_cast<double>((up - down) / (2.0L * h));
        EXPECT_NEAR(analytic[i], numeric, 1e-7 + 1e-5 * std::abs(numeric)) << "entry " << i;
    }
}

}  // namespace

TEST(Relu, ClampsNegatives) {
    ReluLayer relu;
    const DenseTensor y = relu.forward(DenseTensor({1, 2}, {-1.0, 2.0}), Mode::Train);
    EXPECT_EQ(y, DenseTensor({1, 2}, {0.0, 2.0}));
}

TEST(TTConvLayer, IdentityKernelPassesInputThrough) {
    const auto fact = factorize_channels(8, 8, 3);
    TTConvLayer layer(ttconv_identity(fact));
    const DenseTensor x = gaussian({2, 5, 4, 8}, 1);
    EXPECT_EQ(layer.forward(x, Mode::Train), x);
}

TEST(TTConvLayer, MatchesDenseReferenceNetwork) {
    std::mt19937_64 rng(11);
    const auto fact = factorize_channels(4, 6, 2);
    auto tt = std::make_unique<TTConvLayer>(3, fact, Ranks{3, 2}, rng);
    auto dense = std::make_unique<DenseConvLayer>(3, 4, 6, rng);
    dense->set_kernel(ttconv_to_dense(tt->kernel()));
    auto fc_a = std::make_unique<DenseFCLayer>(4 * 4 * 6, 3, rng);
    auto fc_b = std::make_unique<DenseFCLayer>(4 * 4 * 6, 3, rng);
    std::copy(fc_a->params().begin(), fc_a->params().end(), fc_b->params().begin());

    Network a({6, 6, 4}), b({6, 6, 4});
    a.add(std::move(tt));
    a.add(std::move(fc_a));
    b.add(std::move(dense));
    b.add(std::move(fc_b));
    const DenseTensor x = gaussian({5, 6, 6, 4}, 12);
    const std::vector<int> labels{0, 1, 2, 1, 0};
    const double la = a.forward(x, labels).loss;
    const double lb = b.forward(x, labels).loss;
    EXPECT_NEAR(la, lb, 1e-10);
    // Same loss, so same gradient with respect to the input.
    a.backward();
    b.backward();
    EXPECT_LE(oracle::max_abs_diff(a.input_gradient().data(), b.input_gradient().data()), 1e-10);
}

TEST(TTFCLayer, MatchesDenseMatrix) {
    std::mt19937_64 rng(5);
    TTFCLayer layer({3, 4}, {2, 5}, {3}, rng);
    std::normal_distribution<double> n;
    for (double& v : layer.params()) v = n(rng);
    const RowMatrix a = ttm_full(layer.matrix());
    ASSERT_EQ(a.rows(), 10);
    ASSERT_EQ(a.cols(), 12);
    const DenseTensor x = gaussian({4, 12}, 6);
    const DenseTensor y = layer.forward(x, Mode::Train);
    const auto bias = layer.params().subspan(layer.params().size() - 10);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t o = 0; o < 10; ++o) {
            double ref = bias[o];
            for (std::size_t t = 0; t < 12; ++t) ref += a(o, t) * x[i * 12 + t];
            EXPECT_NEAR(y[i * 10 + o], ref, 1e-12);
        }
    }
}

TEST(NaiveTTConvLayer, MatchesConvolutionOfReconstruction) {
    std::mt19937_64 rng(9);
    NaiveTTConvLayer layer(3, 2, 5, {2, 3, 2}, rng);
    const DenseTensor x = gaussian({1, 6, 7, 2}, 10);
    const DenseTensor y = layer.forward(x, Mode::Train);
    const DenseTensor ref = oracle::conv_eq1(x.reshaped({6, 7, 2}), tt_full(layer.kernel().tt));
    EXPECT_LE(oracle::max_abs_diff(y.data(), ref.data()), 1e-12);
}

TEST(TTFullBackward, SatisfiesMultilinearIdentity) {
    // full(G) is linear in each core, so <dL/dG_k, G_k> = <dF, full(G)> for every k.
    std::mt19937_64 rng(21);
    const TTTensor tt = TTTensor::random({3, 4, 2, 5}, {1, 2, 3, 2, 1}, rng);
    const DenseTensor df = gaussian({3, 4, 2, 5}, 22);
    const DenseTensor full = tt_full(tt);
    double target = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) target += df[i] * full[i];
    const auto grads = tt_full_backward(tt, df.data());
    ASSERT_EQ(grads.size(), tt_param_count(tt));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < tt.order(); ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < tt.core(k).size(); ++j) dot += grads[offset + j] * tt.core(k)[j];
        offset += tt.core(k).size();
        EXPECT_NEAR(dot, target, 1e-10 * (1.0 + std::abs(target))) << "core " << k;
    }
}

TEST(MaxPool, TiesRouteToFirstScanPosition) {
    MaxPoolLayer pool(3, 2);
    const DenseTensor x({1, 3, 3, 1}, std::vector<double>(9, 1.0));
    EXPECT_EQ(pool.forward(x, Mode::Train).shape(), (Shape{1, 1, 1, 1}));
    const DenseTensor dx = pool.backward(DenseTensor({1, 1, 1, 1}, {2.0}));
    EXPECT_EQ(dx[0], 2.0);
    for (std::size_t i = 1; i < 9; ++i) EXPECT_EQ(dx[i], 0.0);
}

TEST(MaxPool, OutputSizeFollowsStride) {
    MaxPoolLayer pool;
    EXPECT_EQ(pool.output_shape({16, 16, 8}), (Shape{7, 7, 8}));
    EXPECT_THROW(pool.output_shape({2, 5, 1}), ShapeError);
}

TEST(AvgPool, AveragesBlocks) {
    AvgPoolLayer pool(2);
    DenseTensor x({1, 2, 2, 1}, {1.0, 2.0, 3.0, 6.0});
    EXPECT_EQ(pool.forward(x, Mode::Train)[0], 3.0);
}

TEST(BatchNorm, NormalizesAndTracksRunningStatistics) {
    BatchNormLayer bn(2);
    const DenseTensor x({4, 2}, {1.0, 10.0, 3.0, 10.0, 5.0, 10.0, 7.0, 10.0});
    const DenseTensor y = bn.forward(x, Mode::Train);
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += y[2 * i] / 4.0;
    for (std::size_t i = 0; i < 4; ++i) var += (y[2 * i] - mean) * (y[2 * i] - mean) / 4.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 5.0 / (5.0 + 1e-5), 1e-12);
    EXPECT_EQ(y[1], 0.0);  // constant channel
    EXPECT_NEAR(bn.running_mean()[0], 0.1 * 4.0, 1e-12);
    EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * 20.0 / 3.0, 1e-12);

    const DenseTensor e = bn.forward(x, Mode::Eval);
    EXPECT_NEAR(e[0], (1.0 - bn.running_mean()[0]) / std::sqrt(bn.running_var()[0] + 1e-5), 1e-12);
}

TEST(ZeroPad, PadsSpatially) {
    ZeroPadLayer pad(1);
    const DenseTensor y = pad.forward(DenseTensor({1, 1, 1, 1}, {4.0}), Mode::Train);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 3, 1}));
    EXPECT_EQ(y[4], 4.0);
    EXPECT_EQ(y.frobenius_norm(), 4.0);
}

TEST(Layers, BackwardBeforeForwardIsStateError) {
    std::mt19937_64 rng(1);
    DenseFCLayer fc(3, 2, rng);
    EXPECT_THROW(fc.backward(DenseTensor({1, 2})), StateError);
    ReluLayer relu;
    EXPECT_THROW(relu.backward(DenseTensor({1, 2})), StateError);
    TTConvLayer tt(1, factorize_channels(4, 4, 2), {2, 2}, rng);
    EXPECT_THROW(tt.backward(DenseTensor({1, 1, 1, 4})), StateError);
}

TEST(Network, BackwardBeforeForwardIsStateError) {
    Network net({4});
    net.add(std::make_unique<ReluLayer>());
    EXPECT_THROW(net.backward(), StateError);
}

TEST(Network, ShapeMismatchNamesLayer) {
    std::mt19937_64 rng(1);
    Network net({8, 8, 1});
    net.add(std::make_unique<ZeroPadLayer>(1));
    net.add(std::make_unique<DenseConvLayer>(3, 3, 4, rng));
    try {
        net.output_shape();
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
    }
}

TEST(Network, EqualLogitsGiveZeroBiasGradient) {
    std::mt19937_64 rng(1);
    Network net({3});
    net.add(std::make_unique<DenseFCLayer>(3, 2, rng));
    std::vector<double> zeros(net.param_count(), 0.0);
    net.set_parameters(zeros);
    net.forward(gaussian({4, 3}, 2), std::vector<int>{0, 1, 1, 0});
    const auto g = net.backward();
    EXPECT_EQ(g[6], 0.0);
    EXPECT_EQ(g[7], 0.0);
}

TEST(Network, GradientIsLinearInLossScale) {
    std::mt19937_64 rng(4);
    Network net({6, 6, 4});
    net.add(std::make_unique<TTConvLayer>(3, factorize_channels(4, 4, 2), Ranks{2, 2}, rng));
    net.add(std::make_unique<BatchNormLayer>(4));
    net.add(std::make_unique<DenseFCLayer>(64, 2, rng));
    net.forward(gaussian({3, 6, 6, 4}, 5), std::vector<int>{0, 1, 1});
    const auto g1 = net.backward(1.0);
    const auto g2 = net.backward(2.0);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g2[i], 2.0 * g1[i]);
}

TEST(Network, ForwardBackwardLeavesParametersUnchanged) {
    std::mt19937_64 rng(4);
    Network net({5, 5, 2});
    net.add(std::make_unique<NaiveTTConvLayer>(3, 2, 3, Ranks{2, 2, 2}, rng));
    net.add(std::make_unique<DenseFCLayer>(27, 2, rng));
    const auto before = net.parameters();
    net.forward(gaussian({2, 5, 5, 2}, 1), std::vector<int>{0, 1});
    net.backward();
    EXPECT_EQ(net.parameters(), before);
}

TEST(Network, ParameterFreeLayersPropagateInputGradients) {
    std::mt19937_64 rng(8);
    Network net({7, 7, 2});
    net.add(std::make_unique<ZeroPadLayer>(1));
    net.add(std::make_unique<MaxPoolLayer>(3, 2));
    net.add(std::make_unique<ReluLayer>());
    net.add(std::make_unique<AvgPoolLayer>(2));
    net.add(std::make_unique<BatchNormLayer>(2));
    net.add(std::make_unique<DenseFCLayer>(8, 2, rng));
    expect_input_gradient(net, gaussian({3, 7, 7, 2}, 9), {0, 1, 0});
}

TEST(Network, ConvLayersPropagateInputGradients) {
    std::mt19937_64 rng(8);
    Network net({5, 5, 4});
    net.add(std::make_unique<TTConvLayer>(3, factorize_channels(4, 6, 2), Ranks{2, 3}, rng));
    net.add(std::make_unique<NaiveTTConvLayer>(1, 6, 4, Ranks{1, 3, 2}, rng));
    net.add(std::make_unique<DenseConvLayer>(2, 4, 2, rng));
    net.add(std::make_unique<TTFCLayer>(Factors{2, 4}, Factors{2, 1}, Ranks{2}, rng));
    expect_input_gradient(net, gaussian({2, 5, 5, 4}, 3), {1, 0});
}

// One toy net per layer kind, each small enough for exhaustive differencing.
class GradcheckPerKind : public ::testing::TestWithParam<int> {};

TEST_P(GradcheckPerKind, AnalyticMatchesCentralDifference) {
    std::mt19937_64 rng(100 + static_cast<std::uint64_t>(GetParam()));
    Network net({6, 6, 4});
    switch (GetParam()) {
        case 0:
            net.add(std::make_unique<DenseConvLayer>(3, 4, 3, rng));
            break;
        case 1:
            net.add(std::make_unique<TTConvLayer>(3, factorize_channels(4, 6, 2), Ranks{3, 2}, rng));
            break;
        case 2:
            net.add(std::make_unique<NaiveTTConvLayer>(3, 4, 3, Ranks{2, 3, 2}, rng));
            break;
        case 3:
            net.add(std::make_unique<TTFCLayer>(Factors{12, 12}, Factors{3, 2}, Ranks{2}, rng));
            break;
        case 4:
            net.add(std::make_unique<BatchNormLayer>(4));
            net.add(std::make_unique<ReluLayer>());
            break;
        case 5:
            net.add(std::make_unique<ZeroPadLayer>(1));
            net.add(std::make_unique<MaxPoolLayer>(3, 2));
            net.add(std::make_unique<AvgPoolLayer>(3));
            break;
    }
    net.add(std::make_unique<DenseFCLayer>(shape_product(net.output_shape()), 3, rng));
    ASSERT_LE(net.param_count(), 2000u);
    const GradcheckReport report = gradcheck(net, gaussian({4, 6, 6, 4}, 7), std::vector<int>{0, 1, 2, 1});
    EXPECT_TRUE(report.passed());
    for (const auto& row : report.rows) {
        EXPECT_LE(row.max_error, 1e-5) << row.block;
        if (row.entries == 0) EXPECT_EQ(row.max_error, 0.0) << row.block;
    }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GradcheckPerKind, ::testing::Range(0, 6));

TEST(Gradcheck, CorruptedGradientFails) {
    std::mt19937_64 rng(3);
    Network net({4});
    net.add(std::make_unique<DenseFCLayer>(4, 2, rng));
    GradcheckOptions opts;
    opts.corrupt = true;
    const auto report = gradcheck(net, gaussian({3, 4}, 1), std::vector<int>{0, 1, 1}, opts);
    EXPECT_FALSE(report.passed());
}

TEST(Gradcheck, EmptyNetworkGivesEmptyReport) {
    Network net({4});
    const auto report = gradcheck(net, gaussian({2, 4}, 1), std::vector<int>{0, 1});
    EXPECT_TRUE(report.rows.empty());
    EXPECT_TRUE(report.passed());
}

TEST(Gradcheck, RestoresParameters) {
    std::mt19937_64 rng(3);
    Network net({4});
    net.add(std::make_unique<DenseFCLayer>(4, 2, rng));
    const auto before = net.parameters();
    gradcheck(net, gaussian({3, 4}, 1), std::vector<int>{0, 1, 1});
    EXPECT_EQ(net.parameters(), before);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
    const DenseTensor z({2, 4});
    EXPECT_NEAR(SoftmaxCrossEntropy::loss(z, std::vector<int>{0, 3}), std::log(4.0), 1e-15);
    EXPECT_THROW(SoftmaxCrossEntropy::loss(z, std::vector<int>{0, 4}), ArgumentError);
    EXPECT_THROW(SoftmaxCrossEntropy::loss(z, std::vector<int>{0}), ShapeError);
}
